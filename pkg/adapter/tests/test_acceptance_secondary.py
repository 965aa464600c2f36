"""Secondary acceptance: engine golden-file conformance plus an end-to-end
DeepFA iteration driven entirely through the engine's CLI."""

import csv
import json
import subprocess

from toydata import toy_images

ADAPTER_CMD = "deepfa-adapter"


def test_engine_conformance_suite_accepts_adapter(tmp_path):
    # the engine's own golden-file suite, run against the real adapter
    from deepfa.extractor import check_protocol_conformance

    check_protocol_conformance(ADAPTER_CMD, tmp_path)
    print("[ACCEPTANCE] Adapter protocol conformance (engine golden files): PASS")


def test_engine_run_completes_deepfa_iteration(tmp_path):
    # 100-image toy set, flattened to a dataset CSV the engine can load
    imgs, labels = toy_images(100, side=12, seed=8)
    flat = imgs.reshape(100, -1)
    data_csv = tmp_path / "toy.csv"
    with open(data_csv, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "label"] + [f"f{i}" for i in range(flat.shape[1])])
        for i in range(100):
            writer.writerow([f"img{i:03d}", "a" if labels[i] == 0 else "b"]
                            + [repr(float(v)) for v in flat[i]])

    config = {
        "mode": "deepfa",
        "split": {"x": 0.05, "test_frac": 0.30, "seed": 5},
        "tsne": {"iterations": 400, "perplexity": 15.0},
        "extractor": {
            "kind": "external",
            "external_command": ADAPTER_CMD,
            "epochs": 15,
            "lr_initial": 0.05,
            "seed": 5,
        },
        "base_seed": 5,
        "partitions": 1,
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(config), encoding="utf-8")

    out_dir = tmp_path / "run"
    proc = subprocess.run(
        ["deepfa", "run", "--input", str(data_csv), "--config", str(cfg_path),
         "--out", str(out_dir)],
        capture_output=True, text=True, timeout=900,
    )
    assert proc.returncode == 0, proc.stderr

    iter1 = out_dir / "deepfa" / "0.05" / "0" / "iter1"
    metrics = json.loads((iter1 / "metrics.json").read_text())
    assert metrics["iteration"] == 1
    assert metrics["propagation_accuracy"] is not None
    assert 0.0 <= metrics["propagation_accuracy"] <= 1.0
    for artifact in ("embedding.csv", "labels.csv", "confidence.csv"):
        assert (iter1 / artifact).exists(), artifact

    summary = json.loads((out_dir / "summary.json").read_text())
    assert summary["runs"][0]["mode"] == "deepfa"
    assert summary["runs"][0]["errors"] == []
    print("[ACCEPTANCE] Engine DeepFA iteration via cmd: adapter "
          f"(propagation={metrics['propagation_accuracy']:.3f}): PASS")
