import sys

from aniso.cli import main

sys.exit(main())
