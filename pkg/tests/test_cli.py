import json

import numpy as np
import pytest

from aniso.cli import main


@pytest.fixture
def labeled_csv(tmp_path, rng):
    X = rng.normal(size=(120, 3))
    X[:6] += 6
    y = np.zeros(120, int)
    y[:6] = 1
    p = tmp_path / "data.csv"
    np.savetxt(p, np.column_stack([X, y]), delimiter=",", fmt="%.17g",
               header="a,b,c,label", comments="")
    return p


@pytest.fixture
def plain_csv(tmp_path, rng):
    p = tmp_path / "plain.csv"
    np.savetxt(p, rng.normal(size=(40, 2)), delimiter=",", fmt="%.17g")
    return p


def test_fit_score(tmp_path, plain_csv):
    model = tmp_path / "m.json"
    assert main(["fit", "--data", str(plain_csv), "--n-estimators", "10", "--seed", "4",
                 "--contamination", "0.1", "--out", str(model)]) == 0
    out = tmp_path / "s.csv"
    assert main(["score", "--model", str(model), "--data", str(plain_csv), "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "index,score" and len(lines) == 41
    assert [int(l.split(",")[0]) for l in lines[1:]] == list(range(40))


def test_reproducible_outputs(tmp_path, plain_csv):
    for k in (1, 2):
        main(["fit", "--data", str(plain_csv), "--n-estimators", "8", "--seed", "9",
              "--scorer", "volume", "--out", str(tmp_path / f"m{k}.json")])
    assert (tmp_path / "m1.json").read_bytes() == (tmp_path / "m2.json").read_bytes()


def test_negative_alpha_is_usage_error(plain_csv, tmp_path, capsys):
    assert main(["fit", "--data", str(plain_csv), "--alpha", "-1",
                 "--out", str(tmp_path / "m.json")]) == 1
    assert "alpha" in capsys.readouterr().err


def test_both_thresholds_usage_error(plain_csv, tmp_path):
    assert main(["fit", "--data", str(plain_csv), "--tau", "0.5", "--contamination", "0.1",
                 "--out", str(tmp_path / "m.json")]) == 1


def test_unknown_command():
    assert main(["frobnicate"]) == 1


def test_eval_without_labels_is_data_error(plain_csv):
    assert main(["eval", "--data", str(plain_csv), "--label-column", "none"]) == 2


def test_eval_missing_label_column_values(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("1,2\n3,4\n5,6\n")
    assert main(["eval", "--data", str(p)]) == 2


def test_eval(labeled_csv, capsys):
    assert main(["eval", "--data", str(labeled_csv), "--n-estimators", "30", "--alpha", "inf"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("IF_inf\tAUCROC=")
    assert float(out.split("=")[1]) > 0.9


def test_eval_with_model(tmp_path, labeled_csv, capsys):
    model = tmp_path / "m.json"
    main(["fit", "--data", str(labeled_csv), "--label-column", "label", "--n-estimators", "20",
          "--out", str(model)])
    assert main(["eval", "--model", str(model), "--data", str(labeled_csv)]) == 0
    assert "AUCROC=" in capsys.readouterr().out


def test_missing_file_is_data_error(tmp_path):
    assert main(["score", "--model", str(tmp_path / "nope.json"),
                 "--data", str(tmp_path / "nope.csv")]) == 2


def test_toy_cube(tmp_path):
    out = tmp_path / "r.json"
    assert main(["toy", "--experiment", "cube", "--d", "3", "--trials", "3", "--alphas", "0,inf",
                 "--n-estimators", "20", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["experiment"] == "cube" and rep["d"] == 3 and rep["trials"] == 3
    assert [c["alpha"] for c in rep["configs"]] == [0.0, "inf"]
    assert all({"alpha", "scorer", "mean_auc", "std_auc", "per_trial"} <= c.keys()
               for c in rep["configs"])


def test_toy_sphere_sweep_and_dump(tmp_path):
    out = tmp_path / "r.json"
    dump = tmp_path / "prof.csv"
    assert main(["toy", "--experiment", "sphere", "--d", "2-3", "--trials", "2", "--alphas", "0",
                 "--n-estimators", "10", "--out", str(out), "--dump-scores", str(dump)]) == 0
    reps = json.loads(out.read_text())
    assert [r["d"] for r in reps] == [2, 3]
    assert [c["scorer"] for c in reps[0]["configs"]] == ["depth", "volume"]
    assert (tmp_path / "prof_d2.csv").exists() and (tmp_path / "prof_d3.csv").exists()


def test_toy_stdout_reproducible(capsys):
    args = ["toy", "--experiment", "cube", "--d", "2", "--trials", "2", "--n-estimators", "5",
            "--seed", "3"]
    main(args)
    first = capsys.readouterr().out
    main(args)
    assert capsys.readouterr().out == first


def test_bench_skips_single_class(tmp_path, rng):
    d = tmp_path / "sets"
    d.mkdir()
    X = rng.normal(size=(30, 2))
    np.savetxt(d / "a.csv", np.column_stack([X, np.r_[np.ones(3), np.zeros(27)]]), delimiter=",")
    np.savetxt(d / "b.csv", np.column_stack([X, np.zeros(30)]), delimiter=",")
    assert main(["bench", "--data-dir", str(d), "--alphas", "0", "--scorers", "depth",
                 "--n-estimators", "5", "--out-dir", str(tmp_path / "o")]) == 0
    rows = (tmp_path / "o" / "auc_matrix.csv").read_text().splitlines()
    assert rows[1].endswith(",")  # dataset b left empty


def test_bench_empty_dir(tmp_path):
    assert main(["bench", "--data-dir", str(tmp_path)]) == 2
