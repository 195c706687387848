"""End-to-end tests of the command-line interface."""

import json

import numpy as np
import pytest

from confopt.cli import EXIT_IO, EXIT_OK, EXIT_USAGE, EXIT_VERIFICATION, load_dataset, main
from confopt.confusion import empirical_conf
from confopt.metrics import MetricId, eval_metric
from confopt.serialize import rule_from_json
from confopt.synth import random_finite_distribution


@pytest.fixture()
def dist_file(tmp_path):
    dist = random_finite_distribution(2, 3, seed=77)
    path = tmp_path / "dist.json"
    path.write_text(json.dumps(dist.to_json()))
    return path, dist


def test_synth_train_eval_round_trip(tmp_path, capsys):
    data = tmp_path / "data.csv"
    model = tmp_path / "model.json"
    assert main(["synth", "--dist", "gaussian-default", "--m", "300",
                 "--seed", "5", "--out", str(data)]) == EXIT_OK
    assert main(["train", "--algo", "bayescg", "--metric", "qmean", "--rho", "0.1",
                 "--data", str(data), "--out", str(model),
                 "--seed", "5", "--t-cap", "40", "--cpe-max-iters", "300"]) == EXIT_OK
    capsys.readouterr()
    assert main(["eval", "--model", str(model), "--data", str(data),
                 "--metric", "qmean", "--metric", "accuracy"]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    # The reported value must equal a direct library evaluation.
    rule = rule_from_json(json.loads(model.read_text()))
    sample = load_dataset(data)
    want = eval_metric(MetricId.QMEAN, empirical_conf(rule, sample))
    assert out["metrics"]["qmean"] == pytest.approx(want, abs=1e-12)
    assert out["m"] == 300
    conf = np.asarray(out["confusion"]["entries"]).reshape(3, 3)
    assert conf.sum() == pytest.approx(1.0, abs=1e-9)


def test_synth_csv_format(tmp_path):
    data = tmp_path / "d.csv"
    main(["synth", "--dist", "gaussian-default", "--m", "10", "--seed", "0",
          "--out", str(data)])
    lines = data.read_text().splitlines()
    assert lines[0] == "f1,f2,label"
    assert len(lines) == 11
    sample = load_dataset(data)
    assert sample.m == 10 and sample.d == 2


def test_train_binary_plugin_and_trace_restriction(tmp_path, dist_file):
    path, _ = dist_file
    data = tmp_path / "data.csv"
    main(["synth", "--dist", str(path), "--m", "80", "--seed", "1", "--out", str(data)])
    model = tmp_path / "m.json"
    assert main(["train", "--algo", "binary-plugin", "--metric", "binary-f1",
                 "--data", str(data), "--out", str(model),
                 "--cpe-max-iters", "200"]) == EXIT_OK
    doc = json.loads(model.read_text())
    assert doc["kind"] == "binary_threshold"
    # Traces exist only for the iterative learner.
    assert main(["train", "--algo", "binary-plugin", "--metric", "accuracy",
                 "--data", str(data), "--out", str(model),
                 "--trace", str(tmp_path / "t.csv"),
                 "--cpe-max-iters", "200"]) == EXIT_USAGE


def test_eval_rejects_labels_beyond_model(tmp_path, dist_file):
    path, _ = dist_file
    data2 = tmp_path / "two.csv"
    main(["synth", "--dist", str(path), "--m", "40", "--seed", "2", "--out", str(data2)])
    model = tmp_path / "m.json"
    main(["train", "--algo", "binary-plugin", "--metric", "accuracy",
          "--data", str(data2), "--out", str(model), "--cpe-max-iters", "100"])
    data3 = tmp_path / "three.csv"
    main(["synth", "--dist", "gaussian-default", "--m", "40", "--seed", "2",
          "--out", str(data3)])
    assert main(["eval", "--model", str(model), "--data", str(data3)]) == EXIT_USAGE


def test_exit_codes_for_bad_inputs(tmp_path, dist_file):
    path, _ = dist_file
    data = tmp_path / "data.csv"
    main(["synth", "--dist", str(path), "--m", "30", "--seed", "0", "--out", str(data)])
    missing = tmp_path / "nope.csv"
    assert main(["train", "--algo", "bayescg", "--metric", "qmean",
                 "--data", str(missing), "--out", str(tmp_path / "x.json")]) == EXIT_IO
    assert main(["train", "--algo", "bayescg", "--metric", "no-such-metric",
                 "--data", str(data), "--out", str(tmp_path / "x.json")]) == EXIT_USAGE
    assert main(["train", "--algo", "bayescg", "--metric", "minmax",
                 "--data", str(data), "--out", str(tmp_path / "x.json")]) == EXIT_USAGE
    # rho may come from the metric name or the flag, never both.
    assert main(["train", "--algo", "bayescg", "--metric", "qmean:rho=0.1",
                 "--rho", "0.05",
                 "--data", str(data), "--out", str(tmp_path / "x.json")]) == EXIT_USAGE
    assert main(["oracle", "--dist", str(path), "--metric", "accuracy",
                 "--levels", "100000"]) == EXIT_USAGE
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b,c\n1,2,3\n")
    assert main(["eval", "--model", str(tmp_path / "x.json"), "--data", str(bad)]) == EXIT_IO
    model = tmp_path / "m.json"
    main(["train", "--algo", "binary-plugin", "--metric", "accuracy",
          "--data", str(data), "--out", str(model), "--cpe-max-iters", "100"])
    assert main(["eval", "--model", str(model), "--data", str(bad)]) == EXIT_USAGE


def test_gradcheck_passes_and_detects_corruption(capsys):
    assert main(["gradcheck", "--trials", "5", "--rho", "0.1",
                 "--classes", "2"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "OK" in out
    assert main(["gradcheck", "--trials", "3", "--rho", "0.1", "--classes", "2",
                 "--inject-sign-flip"]) == EXIT_VERIFICATION
    assert "FAIL" in capsys.readouterr().out


def test_oracle_outputs_json(capsys, dist_file):
    path, dist = dist_file
    assert main(["oracle", "--dist", str(path), "--metric", "hmean",
                 "--method", "grid", "--levels", "101"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["method"] == "grid"
    assert 0.0 <= doc["optimum_value"] <= 1.0
    assert main(["oracle", "--dist", str(path), "--metric", "accuracy",
                 "--method", "vertex"]) == EXIT_OK
    vdoc = json.loads(capsys.readouterr().out)
    assert vdoc["method"] == "exhaustive-vertex"


def test_experiment_runs_are_byte_identical(tmp_path, dist_file):
    path, _ = dist_file
    outdir = tmp_path / "exp"
    cfg = {
        "distribution": str(path),
        "metric": "hmean",
        "rho": 0.05,
        "algorithm": "bayescg",
        "sample_sizes": [60],
        "seeds": [0, 1],
        "t_cap": 30,
        "cpe": {"max_iters": 150},
        "oracle": {"method": "grid", "levels": 101},
        "output_dir": str(outdir),
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    assert main(["experiment", "--config", str(cfg_path), "--no-timestamp"]) == EXIT_OK
    first = (outdir / "report.csv").read_bytes()
    trace_first = (outdir / "trace_m60_seed0.csv").read_bytes()
    assert main(["experiment", "--config", str(cfg_path), "--no-timestamp"]) == EXIT_OK
    assert (outdir / "report.csv").read_bytes() == first
    assert (outdir / "trace_m60_seed0.csv").read_bytes() == trace_first
    lines = first.decode().splitlines()
    header = lines[0].split(",")
    for column in ("m", "seed", "tune_value", "value", "oracle_value",
                   "regret", "regret_truncated", "trace"):
        assert column in header
    assert len(lines) == 3
    # Rows are sorted by (m, seed).
    seeds = [int(row.split(",")[1]) for row in lines[1:]]
    assert seeds == sorted(seeds)


def test_experiment_timestamp_header_present_by_default(tmp_path, dist_file):
    path, _ = dist_file
    outdir = tmp_path / "exp2"
    cfg = {
        "distribution": str(path),
        "metric": "accuracy",
        "algorithm": "brute-plugin",
        "sample_sizes": [40],
        "seeds": [3],
        "grid": {"per_entry_levels": 3},
        "cpe": {"max_iters": 100},
        "oracle": {"method": "vertex"},
        "output_dir": str(outdir),
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    assert main(["experiment", "--config", str(cfg_path)]) == EXIT_OK
    lines = (outdir / "report.csv").read_text().splitlines()
    assert lines[0].startswith("# generated ")


def test_experiment_config_validation(tmp_path, dist_file):
    path, _ = dist_file

    def run(overrides):
        cfg = {
            "distribution": str(path),
            "metric": "qmean",
            "algorithm": "bayescg",
            "sample_sizes": [40],
            "seeds": [0],
            "output_dir": str(tmp_path / "out"),
        }
        cfg.update(overrides)
        p = tmp_path / "c.json"
        p.write_text(json.dumps(cfg))
        return main(["experiment", "--config", str(p), "--no-timestamp"])

    assert run({"algorithm": "nope"}) == EXIT_USAGE
    assert run({"metric": "minmax"}) == EXIT_USAGE
    assert run({"sample_sizes": []}) == EXIT_USAGE
    assert run({"metric": "hmean:rho=0.1", "rho": 0.05}) == EXIT_USAGE
    assert run({"rho": {"bad": 1}}) == EXIT_USAGE


def test_experiment_macro_f1_needs_matching_classes(tmp_path):
    dist3 = random_finite_distribution(3, 3, seed=78)
    path = tmp_path / "d3.json"
    path.write_text(json.dumps(dist3.to_json()))
    cfg = {
        "distribution": str(path),
        "metric": "binary-f1",
        "algorithm": "brute-plugin",
        "sample_sizes": [40],
        "seeds": [0],
        "output_dir": str(tmp_path / "o"),
    }
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg))
    assert main(["experiment", "--config", str(p)]) == EXIT_USAGE
    cfg["metric"] = "accuracy"
    cfg["algorithm"] = "binary-plugin"
    p.write_text(json.dumps(cfg))
    assert main(["experiment", "--config", str(p)]) == EXIT_USAGE
