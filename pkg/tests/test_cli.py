import hashlib

import numpy as np
import pytest

from leakvqa import cli
from leakvqa.ansatz import AnsatzSpec
from leakvqa.config import build_config
from leakvqa.experiments import COLUMNS, ResultTable, emit_csv, read_csv, run_sweep
from leakvqa.plotting import emit_heatmap, emit_loss_curve, heatmap_grid


def small(experiment, **kw):
    base = {"n": [2], "d": [1], "L": [1.25e-4, 1.25e-2], "reps": 2, "samples": 50, "epochs": 3}
    base.update(kw)
    return build_config(experiment, base)


@pytest.mark.parametrize("experiment", ["expressibility", "fit", "iris"])
def test_sweep_shapes(experiment):
    table = run_sweep(small(experiment))
    assert len(table.rows) == 2
    assert set(table.rows[0]) == set(COLUMNS[experiment])


def test_topology_rows():
    cfg = build_config("topology", {"n": [4], "d": [1], "samples": 30, "reps": 2})
    table = run_sweep(cfg)
    assert [(r["topology"], r["L"]) for r in table.rows] == [
        ("chain", 0.0), ("chain", 1.25e-3), ("ladder", 0.0), ("ladder", 1.25e-3),
        ("lattice", 0.0), ("lattice", 1.25e-3)]


def test_csv_round_trip(tmp_path):
    table = run_sweep(small("fit"))
    path = tmp_path / "r.csv"
    emit_csv(table, path)
    back = read_csv(path, "fit")
    assert back.rows == table.rows
    emit_csv(back, tmp_path / "r2.csv")
    assert path.read_bytes() == (tmp_path / "r2.csv").read_bytes()
    with pytest.raises(ValueError):
        read_csv(path, "iris")


def test_parallel_matches_serial(tmp_path):
    a = run_sweep(small("expressibility", jobs=1))
    b = run_sweep(small("expressibility", jobs=3))
    emit_csv(a, tmp_path / "a.csv")
    emit_csv(b, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def _fake_table():
    rows = [{"n": 2, "d": d, "L": L, "mean": d * L, "stderr": 0.0, "reps": 1, "seed": 0,
             "ideal_mean": 0.0, "leaky_mean": 0.0} for d in (1, 2) for L in (1e-3, 1e-2)]
    return ResultTable("expressibility", rows)


def test_heatmap_grid_and_missing_slice():
    r, c, v = heatmap_grid(_fake_table(), 2)
    assert r == [1, 2] and c == [1e-3, 1e-2]
    np.testing.assert_allclose(v, [[1e-3, 1e-2], [2e-3, 2e-2]])
    with pytest.raises(KeyError):
        heatmap_grid(_fake_table(), 5)


def test_svg_is_deterministic(tmp_path):
    digests = []
    for k in range(2):
        path = tmp_path / f"h{k}.svg"
        emit_heatmap(_fake_table(), 2, path)
        digests.append(hashlib.sha256(path.read_bytes()).hexdigest())
    assert digests[0] == digests[1]
    assert (tmp_path / "h0.svg").read_text().lstrip().startswith("<?xml")
    emit_loss_curve(np.geomspace(1, 1e-3, 10), np.geomspace(1, 1e-2, 10), tmp_path / "c.svg")
    assert (tmp_path / "c.svg").stat().st_size > 0


def test_cli_end_to_end(tmp_path, capsys):
    cfg = tmp_path / "fit.cfg"
    cfg.write_text("experiment = fit\nn = [2]\nd = [1]\nL = [0.0125]\nreps = 2\nepochs = 4\n")
    out = tmp_path / "out"
    assert cli.main(["fit", "--config", str(cfg), "--out", str(out), "--seed", "7"]) == 0
    for name in ("results.csv", "run_manifest.txt", "heatmap_n2.svg", "loss_curve.csv", "loss_curve.svg"):
        assert (out / name).exists(), name
    manifest = (out / "run_manifest.txt").read_text()
    assert "seed = 7" in manifest and "config_hash" in manifest
    assert len((out / "loss_curve.csv").read_text().splitlines()) == 5


def test_cli_reports_config_errors(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("experiment = fit\nreps = 0\n")
    assert cli.main(["fit", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "bad.cfg:2:" in capsys.readouterr().err
    assert cli.main(["fit", "--config", str(tmp_path / "missing.cfg")]) == 2


def test_cli_no_figures(tmp_path):
    out = tmp_path / "o"
    cfg = tmp_path / "e.cfg"
    cfg.write_text("experiment = expressibility\nn = [2]\nd = [1]\nL = [0.01]\nreps = 2\nsamples = 20\n")
    assert cli.main(["expressibility", "--config", str(cfg), "--out", str(out), "--no-figures"]) == 0
    assert not list(out.glob("*.svg"))


def test_empty_table_csv(tmp_path):
    emit_csv(ResultTable("iris"), tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_text() == ",".join(COLUMNS["iris"]) + "\n"


def test_stderr_matches_repetitions():
    from leakvqa import expressibility as ex
    from leakvqa.experiments import EXPERIMENT_CODES, job_seed

    cfg = small("expressibility", d=[2])
    row = run_sweep(cfg).rows[1]
    diffs = []
    for rep in range(cfg.reps):
        rng = np.random.default_rng(job_seed(cfg.seed, EXPERIMENT_CODES["expressibility"], 2, 2, rep))
        vals = ex.expr2_paired(AnsatzSpec(2, 2), [0.0, *cfg.L], cfg.beta, cfg.samples, rng)
        diffs.append(vals[0] - vals[2])
    assert row["mean"] == pytest.approx(np.mean(diffs), abs=1e-15)
    assert row["stderr"] == pytest.approx(np.std(diffs, ddof=1) / np.sqrt(cfg.reps), abs=1e-15)


def test_smoke_sweep_is_finite():
    table = run_sweep(build_config("expressibility", {"n": [2, 3], "d": [1, 2, 3], "L": [0.01],
                                                      "samples": 100, "reps": 2}))
    assert len(table.rows) == 6
    assert np.all(np.isfinite(table.column("mean")))


def test_single_cell_heatmap(tmp_path):
    table = ResultTable("expressibility", _fake_table().rows[:1])
    emit_heatmap(table, 2, tmp_path / "one.svg")
    assert "<svg" in (tmp_path / "one.svg").read_text()
