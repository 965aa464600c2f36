import csv
import json
import sys
from pathlib import Path

import numpy as np
import pytest

from deepfa.cli import main
from deepfa.data import save_dataset

from synthdata import blob_dataset, make_dataset

STUB = f"{sys.executable} {Path(__file__).parent / 'stub_extractor.py'}"


@pytest.fixture(scope="module")
def dataset_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "blobs.csv"
    centers = [(0.0,) * 5, (10.0,) + (0.0,) * 4]
    save_dataset(blob_dataset(60, centers, sigma=0.8, seed=3), path, "csv")
    return path


def run_cli(*argv):
    return main([str(a) for a in argv])


def test_split_prints_counts(dataset_csv, tmp_path, capsys):
    code = run_cli("split", "--input", dataset_csv, "--x", "0.05",
                   "--test", "0.30", "--seed", "7", "--out", tmp_path)
    assert code == 0
    out = capsys.readouterr().out.strip()
    assert out == "S=6 U=78 T=36"
    assert (tmp_path / "split.csv").exists()


def test_split_table_scale_counts(tmp_path, capsys):
    path = tmp_path / "big.csv"
    save_dataset(make_dataset(5000, 10, d=2, seed=0), path, "csv")
    code = run_cli("split", "--input", path, "--x", "0.01", "--test", "0.30",
                   "--seed", "7", "--out", tmp_path / "s")
    assert code == 0
    assert capsys.readouterr().out.strip() == "S=50 U=3450 T=1500"


def test_split_missing_input_is_usage_error(capsys):
    assert run_cli("split", "--x", "0.05", "--out", "x") == 1


def test_split_bad_x_is_data_error(dataset_csv, tmp_path, capsys):
    code = run_cli("split", "--input", dataset_csv, "--x", "0.0",
                   "--out", tmp_path)
    assert code == 2
    assert "0 < x" in capsys.readouterr().err


def test_run_baseline_equals_loop_zero_iterations(dataset_csv, tmp_path, capsys):
    common = ["--input", dataset_csv, "--x", "0.05", "--partitions", "2",
              "--seed", "5", "--epochs", "10", "--tsne-iterations", "60"]
    assert run_cli("run", "--mode", "baseline", "--out", tmp_path / "a",
                   *common) == 0
    assert run_cli("run", "--mode", "deepfa-loop", "--iterations", "0",
                   "--out", tmp_path / "b", *common) == 0
    for p in ("0", "1"):
        a = (tmp_path / "a" / "baseline" / "0.05" / p / "iter0" / "metrics.json")
        b = (tmp_path / "b" / "deepfa-loop" / "0.05" / p / "iter0" / "metrics.json")
        assert a.read_bytes() == b.read_bytes()


def test_run_missing_extractor_command_exits_3(dataset_csv, tmp_path, capsys):
    code = run_cli(
        "run", "--mode", "deepfa", "--x", "0.05", "--partitions", "1",
        "--extractor", "cmd:./definitely-not-here", "--epochs", "2",
        "--tsne-iterations", "50", "--input", dataset_csv, "--out", tmp_path)
    assert code == 3
    assert "definitely-not-here" in capsys.readouterr().err


def test_run_with_config_json(dataset_csv, tmp_path, capsys):
    cfg = {
        "mode": "deepfa",
        "split": {"x": 0.05, "test_frac": 0.30, "seed": 4},
        "tsne": {"iterations": 60, "perplexity": 8.0},
        "extractor": {"epochs": 10, "hidden_width": 16, "lr_initial": 0.05},
        "base_seed": 4,
        "partitions": 1,
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    code = run_cli("run", "--input", dataset_csv, "--config", cfg_path,
                   "--out", tmp_path / "run")
    assert code == 0
    assert (tmp_path / "run" / "summary.json").exists()
    labels = tmp_path / "run" / "deepfa" / "0.05" / "0" / "iter1" / "labels.csv"
    assert labels.exists()


def test_project_and_plot_pipeline(tmp_path, capsys):
    from deepfa.data import write_feature_matrix
    rng = np.random.default_rng(0)
    feats = np.vstack([rng.normal(0, 1, (20, 6)), rng.normal(9, 1, (20, 6))])
    write_feature_matrix(tmp_path / "f.dfa", feats)
    code = run_cli("project", "--input", tmp_path / "f.dfa",
                   "--out", tmp_path / "emb.csv",
                   "--trace", tmp_path / "trace.csv",
                   "--iterations", "80", "--perplexity", "8", "--seed", "2")
    assert code == 0
    with open(tmp_path / "emb.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["id", "y0", "y1"]
    assert len(rows) == 41
    with open(tmp_path / "trace.csv") as fh:
        trows = list(csv.reader(fh))
    assert trows[0] == ["iteration", "kl"] and len(trows) == 81

    code = run_cli("plot", "--embedding", tmp_path / "emb.csv",
                   "--mode", "by-confidence",
                   "--confidence", _fake_confidence(tmp_path, rows[1:]),
                   "--out", tmp_path / "p.svg")
    assert code == 0
    svg = (tmp_path / "p.svg").read_text()
    assert svg.count("<circle") == 40


def test_project_from_dataset_csv(dataset_csv, tmp_path):
    code = run_cli("project", "--input", dataset_csv, "--format", "csv",
                   "--out", tmp_path / "e.csv", "--iterations", "60",
                   "--perplexity", "8", "--seed", "1")
    assert code == 0
    with open(tmp_path / "e.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["id", "y0", "y1"]
    assert rows[1][0].startswith("b")  # dataset ids, not row indices


def _fake_confidence(tmp_path, emb_rows):
    path = tmp_path / "conf.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "confidence"])
        for i, row in enumerate(emb_rows):
            writer.writerow([row[0], repr(i / max(1, len(emb_rows) - 1))])
    return path


def test_report_over_grid(dataset_csv, tmp_path, capsys):
    common = ["--input", dataset_csv, "--x", "0.05", "--partitions", "1",
              "--seed", "9", "--epochs", "8", "--tsne-iterations", "50"]
    run_cli("run", "--mode", "baseline", "--out", tmp_path / "r1", *common)
    run_cli("run", "--mode", "deepfa", "--out", tmp_path / "r2", *common)
    code = run_cli("report", "--runs", tmp_path / "r1", tmp_path / "r2",
                   "--out", tmp_path / "report.csv")
    assert code == 0
    with open(tmp_path / "report.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2
    assert {row["mode"] for row in rows} == {"baseline", "deepfa"}
    best_kappa = max(float(row["kappa_mean"]) for row in rows)
    for row in rows:
        expected = int(float(row["kappa_mean"]) == best_kappa)
        assert int(row["best"]) == expected
    baseline_row = next(r for r in rows if r["mode"] == "baseline")
    assert baseline_row["propagation_mean"] == ""


def test_report_missing_summary_is_data_error(tmp_path, capsys):
    assert run_cli("report", "--runs", tmp_path / "ghost",
                   "--out", tmp_path / "r.csv") == 2


def test_report_values_match_recomputation(dataset_csv, tmp_path):
    common = ["--input", dataset_csv, "--x", "0.05", "--partitions", "2",
              "--seed", "3", "--epochs", "8", "--tsne-iterations", "50"]
    run_cli("run", "--mode", "deepfa", "--out", tmp_path / "r", *common)
    summary = json.loads((tmp_path / "r" / "summary.json").read_text())
    run_cli("report", "--runs", tmp_path / "r", "--out", tmp_path / "rep.csv")
    with open(tmp_path / "rep.csv") as fh:
        row = next(csv.DictReader(fh))
    # report echoes the final-iteration aggregate exactly
    final = summary["runs"][0]["iterations"]["1"]
    assert float(row["kappa_mean"]) == pytest.approx(final["kappa_mean"], abs=1e-12)
    assert float(row["accuracy_std"]) == pytest.approx(final["accuracy_std"], abs=1e-12)
