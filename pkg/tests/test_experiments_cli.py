import csv
import json

import numpy as np
import pytest

from mdsfeat.cli import main
from mdsfeat.datasets import synthetic_car_images, write_uiuc_layout
from mdsfeat.errors import InvalidArgumentError
from mdsfeat.experiments import ExperimentConfig, bench_swissroll, run_experiment
from mdsfeat.io import read_results_csv, read_trace_csv


@pytest.fixture(scope="module")
def small_set():
    return synthetic_car_images(n_pos=14, n_neg=12, seed=7)


def _stress_columns(path):
    with open(path) as fh:
        return [row[:2] for row in csv.reader(fh)]


def test_run_directory_layout(tmp_path, small_set):
    cfg = ExperimentConfig(method="pca", dims=list(range(1, 21)), out=str(tmp_path))
    run = run_experiment(cfg, small_set)
    assert run.name.endswith(cfg.digest())
    assert len(read_results_csv(run / "results.csv")) == 100
    manifest = json.loads((run / "manifest.json").read_text())
    assert manifest["dataset"]["content_hash"] == small_set.content_hash()
    assert manifest["config"]["method"] == "pca"
    assert (run / "features" / "scatter-pca.csv").exists()


def test_spm_manifest_records_pyramid_dimension(tmp_path, small_set):
    cfg = ExperimentConfig(method="spm1-mds", dims=[2], folds=2, vocab_size=200, levels=2, sweeps=3, out=str(tmp_path))
    run = run_experiment(cfg, small_set)
    manifest = json.loads((run / "manifest.json").read_text())
    assert manifest["methods"]["spm1-mds"]["pyramid_dimension"] == 4200
    traces = sorted((run / "traces").glob("*.csv"))
    assert len(traces) == 2
    for t in traces:
        s = read_trace_csv(t).stresses
        assert np.all(s[1:] <= s[:-1] + 1e-9 * s[1:])


def test_runs_are_deterministic(tmp_path, small_set):
    cfg = ExperimentConfig(method="pca,imed-mds,spm2-mds", dims=[1, 2], folds=3, vocab_size=15, sweeps=4)
    runs = []
    for sub in ("a", "b"):
        cfg.out = str(tmp_path / sub)
        runs.append(run_experiment(cfg, small_set))
    a, b = runs
    for rel in ["results.csv", "folds.csv"] + [p.relative_to(a).as_posix() for p in (a / "features").glob("*.csv")]:
        assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel
    for t in (a / "traces").glob("*.csv"):
        assert _stress_columns(t) == _stress_columns(b / "traces" / t.name)
    ma = json.loads((a / "manifest.json").read_text())
    mb = json.loads((b / "manifest.json").read_text())
    assert ma["results_hash"] == mb["results_hash"]


def test_manifest_round_trip(tmp_path, small_set):
    cfg = ExperimentConfig(method="kpca-gaussian", dims=[1, 3], folds=2, out=str(tmp_path / "a"))
    first = run_experiment(cfg, small_set)
    again = ExperimentConfig.from_json(first / "manifest.json")
    assert again.to_dict() == cfg.to_dict()
    again.out = str(tmp_path / "b")
    second = run_experiment(again, small_set)
    assert (first / "results.csv").read_bytes() == (second / "results.csv").read_bytes()


def test_config_validation():
    with pytest.raises(InvalidArgumentError):
        ExperimentConfig(method="nope").validate()
    with pytest.raises(InvalidArgumentError):
        ExperimentConfig(dims=[0]).validate()
    with pytest.raises(InvalidArgumentError):
        ExperimentConfig.from_dict({"method": "pca", "colour": 1})


def test_bench_small(tmp_path):
    res = bench_swissroll(repeats=2, n=120, sweeps=3, out=tmp_path)
    for s in ("random", "largest-first", "smallest-first"):
        assert (tmp_path / f"mean-trace-{s}.csv").exists()
        assert len(res.mean_stress(s)) == 4
    for (method, _), trace in res.traces.items():
        if method != "smacof":
            s = trace.stresses
            assert np.all(s[1:] <= s[:-1] + 1e-9 * s[1:])
    with open(tmp_path / "stress_per_iteration.csv") as fh:
        assert next(csv.reader(fh)) == ["strategy", "iteration", "mean_raw_stress"]
    assert len(list((tmp_path / "traces").glob("*.csv"))) == 8


# --- command line ------------------------------------------------------------------


def test_cli_pipeline(tmp_path, capsys):
    assert main(["swissroll", "--n", "80", "--out", str(tmp_path / "sr")]) == 0
    assert main(["fit", "--distances", str(tmp_path / "sr" / "geodesic.csv"), "--dims", "2",
                 "--strategy", "largest", "--trace", str(tmp_path / "t.csv"), "--out", str(tmp_path / "e.csv")]) == 0
    d = np.loadtxt(tmp_path / "sr" / "geodesic.csv", delimiter=",")
    np.savetxt(tmp_path / "rows.csv", d[:2], delimiter=",")
    assert main(["encode", "--embedding", str(tmp_path / "e.csv"), "--rows", str(tmp_path / "rows.csv"),
                 "--out", str(tmp_path / "enc.csv")]) == 0
    assert np.loadtxt(tmp_path / "enc.csv", delimiter=",", skiprows=1).shape == (2, 2)


def test_cli_image_stages(tmp_path):
    data = synthetic_car_images(n_pos=6, n_neg=5, seed=2)
    root = write_uiuc_layout(data, tmp_path / "imgs")
    assert main(["distmat", "--data", str(root), "--measure", "imed", "--out", str(tmp_path / "d.csv")]) == 0
    assert main(["spm", "vocab", "--data", str(root), "--vocab-size", "8", "--out", str(tmp_path / "v.csv")]) == 0
    assert main(["spm", "vectors", "--data", str(root), "--vocab", str(tmp_path / "v.csv"),
                 "--out", str(tmp_path / "p.csv")]) == 0
    assert main(["distmat", "--data", str(root), "--measure", "spm2", "--vocab", str(tmp_path / "v.csv"),
                 "--out", str(tmp_path / "d2.csv")]) == 0
    row = (tmp_path / "p.csv").read_text().splitlines()[0].split(",")
    assert len(row) == 1 + 8 * 21
    assert main(["eval", "--data", str(root), "--method", "pca", "--dims", "1-2", "--folds", "2",
                 "--out", str(tmp_path / "runs")]) == 0
    run = next((tmp_path / "runs").iterdir())
    assert len(read_results_csv(run / "results.csv")) == 4


def test_cli_exit_codes(tmp_path, capsys):
    assert main([]) == 1
    assert main(["fit", "--bogus"]) == 1
    assert main(["fit", "--distances", "x.csv", "--out", "y.csv", "--strategy", "middle"]) == 1
    assert main(["distmat", "--data", str(tmp_path / "nowhere"), "--out", str(tmp_path / "x.csv")]) == 2
    (tmp_path / "bad.csv").write_text("0,1\n2,0\n")
    assert main(["fit", "--distances", str(tmp_path / "bad.csv"), "--out", str(tmp_path / "e.csv")]) == 2
    (tmp_path / "bin.csv").write_bytes(b"\x8e\xff\x00")
    assert main(["fit", "--distances", str(tmp_path / "bin.csv"), "--out", str(tmp_path / "e.csv")]) == 2
    assert main(["eval", "--method", "pca"]) == 1
    (tmp_path / "two.csv").write_text("0,3\n3,0\n")
    assert main(["fit", "--distances", str(tmp_path / "two.csv"), "--dims", "1,2", "--out", str(tmp_path / "e.csv")]) == 1


def test_cli_numerical_failure_exit_code(tmp_path, monkeypatch):
    import mdsfeat.cli as cli
    from mdsfeat.errors import NumericalError

    def boom(*a, **k):
        raise NumericalError("diverged")

    monkeypatch.setattr(cli, "ilma_fit", boom)
    (tmp_path / "two.csv").write_text("0,3\n3,0\n")
    assert main(["fit", "--distances", str(tmp_path / "two.csv"), "--out", str(tmp_path / "e.csv")]) == 3
