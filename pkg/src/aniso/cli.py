"""Command-line entry point: ``aniso fit|score|eval|toy|bench``.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from aniso.aggregation import format_alpha, parse_alpha
from aniso.detector import DetectorConfig, fit, score_samples
from aniso.errors import AnisoError, ConfigError, DataError, DegenerateLabels, DomainError
from aniso.experiments import (CubeOutlierSpec, SphereOriginSpec, auc_roc, evaluate_variants,
                               rank_table, run_trials, sorted_estimator_scores)
from aniso.io import load_dataset, load_model, save_model, write_scores

log = logging.getLogger("aniso")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _alpha(text: str) -> float:
    try:
        return parse_alpha(text)
    except DomainError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _alphas(text: str) -> list[float]:
    return [_alpha(t) for t in text.split(",") if t.strip()]


def _names(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _dims(text: str) -> list[int]:
    """``"10"``, ``"3,5,8"`` or an inclusive range ``"2-16"``."""
    out = []
    for part in _names(text):
        if "-" in part:
            a, b = part.split("-", 1)
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(part))
    return out


def _add_data_options(p, label_default=None):
    p.add_argument("--data", required=True, help="CSV dataset")
    p.add_argument("--label-column", default=label_default,
                   help="index or name of the 0/1 label column")
    p.add_argument("--delimiter", default=",")
    hdr = p.add_mutually_exclusive_group()
    hdr.add_argument("--header", dest="has_header", action="store_true", default=None)
    hdr.add_argument("--no-header", dest="has_header", action="store_false")


def _add_fit_options(p):
    p.add_argument("--scorer", choices=["depth", "volume"], default="depth")
    p.add_argument("--alpha", type=_alpha, default=0.0)
    p.add_argument("--n-estimators", type=int, default=100)
    p.add_argument("--subsample", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--contamination", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--strict-depth", action="store_true",
                   help="drop the c(count) correction for truncated leaves")
    p.add_argument("--bounding", choices=["subsample", "global"], default="subsample",
                   help="reference box for the volume scorer")


def _config(args, **over) -> DetectorConfig:
    kw = dict(n_estimators=args.n_estimators, subsample_size=args.subsample,
              scorer=args.scorer, alpha=args.alpha, tau=args.tau,
              contamination=args.contamination, seed=args.seed,
              strict_paper_depth=args.strict_depth, bounding_policy=args.bounding)
    kw.update(over)
    try:
        return DetectorConfig(**kw)
    except ConfigError as exc:
        raise UsageError(str(exc)) from None


def _load(args, need_labels=False):
    label = args.label_column
    if isinstance(label, str) and label.lower() in {"", "none"}:
        label = None
    data = load_dataset(args.data, label_column=label,
                        delimiter=args.delimiter, has_header=args.has_header)
    if need_labels and data.labels is None:
        raise DegenerateLabels(f"{args.data}: evaluation needs a label column")
    return data


def _emit_json(obj, out: Optional[str]) -> None:
    text = json.dumps(obj, indent=2) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_fit(args) -> None:
    data = _load(args)
    det = fit(data, _config(args))
    save_model(det, args.out)
    log.info("saved %d trees to %s", det.model.n_estimators, args.out)


def cmd_score(args) -> None:
    det = load_model(args.model)
    data = _load(args)
    write_scores(args.out, score_samples(det, data), stream=sys.stdout)


def cmd_eval(args) -> None:
    data = _load(args, need_labels=True)
    det = load_model(args.model) if args.model else fit(data, _config(args))
    auc = auc_roc(score_samples(det, data, log2=True), data.labels)
    print(f"{det.config.label}\tAUCROC={auc!r}")


def _variants(alphas, scorers, args) -> list[DetectorConfig]:
    out = []
    for s in scorers:
        if s not in ("depth", "volume"):
            raise UsageError(f"unknown scorer {s!r}")
        for a in alphas:
            out.append(DetectorConfig(n_estimators=args.n_estimators, subsample_size=args.subsample,
                                      scorer=s, alpha=a, seed=args.seed))
    return out


def cmd_toy(args) -> None:
    cube = args.experiment == "cube"
    dims = _dims(args.d) if args.d else ([10] if cube else list(range(2, 17)))
    scorers = _names(args.scorers) if args.scorers else (["depth"] if cube else ["depth", "volume"])
    configs = _variants(args.alphas, scorers, args)
    reports = []
    for d in dims:
        if cube:
            spec = CubeOutlierSpec(d=d, n_inliers=args.n_inliers, outlier_offset=args.offset,
                                   seed=args.seed)
        else:
            spec = SphereOriginSpec(d=d, n_inliers=args.n_inliers, noise_sigma=args.noise,
                                    seed=args.seed)
        rep = run_trials(spec, configs, args.trials)
        for r in rep.results:
            log.info("%s d=%d %s mean AUCROC %.4f", rep.experiment, d, r.config.label, r.mean_auc)
        reports.append(rep.to_dict())
        if args.dump_scores:
            _dump_profiles(Path(args.dump_scores), spec, configs[0], d, len(dims) > 1)
    _emit_json(reports[0] if len(reports) == 1 else reports, args.out)


def _dump_profiles(path: Path, spec, config: DetectorConfig, d: int, many: bool) -> None:
    if many:
        path = path.with_name(f"{path.stem}_d{d}{path.suffix}")
    phi, labels = sorted_estimator_scores(spec, config)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["point", "label"] + [f"rank{k}" for k in range(phi.shape[1])])
        for i, (row, y) in enumerate(zip(phi, labels)):
            w.writerow([i, int(y)] + [repr(float(v)) for v in row])


def cmd_bench(args) -> None:
    files = sorted(Path(args.data_dir).glob("*.csv"))
    if not files:
        raise DataError(f"no .csv files in {args.data_dir}")
    configs = _variants(args.alphas, _names(args.scorers), args)
    algorithms = [c.label for c in configs]
    matrix = np.full((len(configs), len(files)), np.nan)
    for j, f in enumerate(files):
        data = load_dataset(f, label_column=args.label_column, delimiter=args.delimiter)
        if data.labels is None or data.labels.min() == data.labels.max():
            log.warning("%s: skipped, needs both label classes", f.name)
            continue
        res = evaluate_variants(data, configs)
        matrix[:, j] = [res[a] for a in algorithms]
    table = rank_table(matrix, algorithms, [f.stem for f in files])

    out_dir = Path(args.out_dir) if args.out_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "auc_matrix.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["algorithm"] + table.datasets)
            for name, row in zip(algorithms, matrix):
                w.writerow([name] + ["" if np.isnan(v) else repr(float(v)) for v in row])
        with open(out_dir / "rank_table.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, ["algorithm", "mean_rank", "mean_auc", "n_datasets", "incomplete"])
            w.writeheader()
            w.writerows(table.rows())
    print("algorithm\tmean_rank\tmean_auc\tn_datasets")
    for r in table.rows():
        flag = "*" if r["incomplete"] else ""
        print(f"{r['algorithm']}\t{r['mean_rank']:.4f}\t{r['mean_auc']:.4f}\t{r['n_datasets']}{flag}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="aniso", description="Isolation forests with alpha aggregation "
                                               "and hypervolume scoring.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="fit a detector and save it")
    _add_data_options(p)
    _add_fit_options(p)
    p.add_argument("--out", required=True, help="model file to write")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("score", help="score a dataset with a saved model")
    p.add_argument("--model", required=True)
    _add_data_options(p)
    p.add_argument("--out", help="scores CSV (default: stdout)")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", help="AUCROC on a labeled dataset")
    p.add_argument("--model", help="saved model; otherwise fit with the options below")
    _add_data_options(p, label_default="-1")
    _add_fit_options(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("toy", help="repeated synthetic cube/sphere experiments")
    p.add_argument("--experiment", choices=["cube", "sphere"], required=True)
    p.add_argument("--d", help="dimension(s): 10, 3,5,8 or 2-16")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--alphas", type=_alphas, default=[0.0, float("inf")])
    p.add_argument("--scorers", help="comma list of depth,volume")
    p.add_argument("--n-estimators", type=int, default=100)
    p.add_argument("--subsample", type=int, default=256)
    p.add_argument("--n-inliers", type=int, default=127)
    p.add_argument("--offset", type=float, default=1.05, help="cube outlier coordinate")
    p.add_argument("--noise", type=float, default=0.05, help="sphere noise sigma")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="TrialReport JSON (default: stdout)")
    p.add_argument("--dump-scores", help="CSV of sorted per-estimator scores for one run")
    p.set_defaults(func=cmd_toy)

    p = sub.add_parser("bench", help="AUCROC matrix and rank table over a directory of CSVs")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--alphas", type=_alphas, default=[0.0, 0.5, 1.0, 2.0, float("inf")])
    p.add_argument("--scorers", default="depth,volume")
    p.add_argument("--label-column", default="-1")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--n-estimators", type=int, default=100)
    p.add_argument("--subsample", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", help="write auc_matrix.csv and rank_table.csv here")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        args.func(args)
    except UsageError as exc:
        print(f"aniso: {exc}", file=sys.stderr)
        return 1
    except (DataError, OSError) as exc:
        print(f"aniso: data error: {exc}", file=sys.stderr)
        return 2
    except AnisoError as exc:
        print(f"aniso: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
