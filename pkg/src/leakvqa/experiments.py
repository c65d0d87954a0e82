"""Sweep execution for the four experiments and CSV round-tripping of results.

A sweep is split into independent jobs, one per (cell, repetition), each with
its own seed derived from the base seed and the job coordinates. Every job
evaluates the noiseless arm and all leaky arms from the same random draws so
that per-repetition differences are paired. Jobs may run in worker
processes; aggregation always happens in job order, so the table does not
depend on the degree of parallelism.
"""
from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import expressibility as ex
from . import learn
from .ansatz import CZ_TOPOLOGY, AnsatzSpec
from .config import ExperimentConfig

log = logging.getLogger(__name__)

EXPERIMENT_CODES = {"expressibility": 1, "fit": 2, "iris": 3, "topology": 4}
TOPOLOGY_CODES = {"chain": 0, "ladder": 1, "lattice": 2}

COLUMNS = {
    "expressibility": ["n", "d", "L", "mean", "stderr", "reps", "seed", "ideal_mean", "leaky_mean"],
    "fit": ["n", "d", "L", "mean", "stderr", "reps", "seed", "ideal_final", "leaky_final", "floored"],
    "iris": ["n", "d", "L", "mean", "stderr", "reps", "seed", "ideal_score", "leaky_score"],
    "topology": ["topology", "n", "d", "L", "mean", "stderr", "reps", "seed"],
}
INT_COLUMNS = {"n", "d", "reps", "seed", "floored"}
STR_COLUMNS = {"topology"}


class SweepError(RuntimeError):
    """A grid cell failed; the message names the cell."""


def job_seed(base: int, *coords: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(base, spawn_key=tuple(int(c) for c in coords))


@dataclass
class ResultTable:
    experiment: str
    rows: list = field(default_factory=list)
    traces: dict = field(default_factory=dict)

    @property
    def columns(self) -> list[str]:
        return COLUMNS[self.experiment]

    def column(self, name: str) -> list:
        return [r[name] for r in self.rows]

    def where(self, **match) -> list[dict]:
        return [r for r in self.rows if all(r[k] == v for k, v in match.items())]


def _stats(values) -> tuple[float, float]:
    values = np.asarray(values, dtype=float)
    return float(values.mean()), learn.standard_error(values)


# ---- jobs ---------------------------------------------------------------

def _expressibility_job(args):
    cfg, n, d, rep = args
    spec = AnsatzSpec(n, d)
    rng = np.random.default_rng(job_seed(cfg.seed, EXPERIMENT_CODES["expressibility"], n, d, rep))
    vals = ex.expr2_paired(spec, [0.0] + list(cfg.L), cfg.beta, cfg.samples, rng, cfg.sigma,
                           phi=cfg.phi)
    return vals[0], vals[1:]


def _fit_job(args):
    cfg, n, d, rep = args
    rng = np.random.default_rng(job_seed(cfg.seed, EXPERIMENT_CODES["fit"], n, d, rep))
    out = learn.fit_paired(n, d, cfg.L, rng, beta=cfg.beta, epochs=cfg.epochs, lr=cfg.lr,
                           eps=cfg.eps, optimizer=cfg.optimizer, phi=cfg.phi)
    ideal = out["ideal"].losses
    leaky = np.array([out["leaky"][float(L)].losses for L in cfg.L])
    return ideal, leaky


def _iris_job(args):
    cfg, n, d, rep = args
    rng = np.random.default_rng(job_seed(cfg.seed, EXPERIMENT_CODES["iris"], n, d, rep))
    out = learn.iris_paired(d, cfg.L, rng, beta=cfg.beta, epochs=cfg.epochs, lr=cfg.lr,
                            eps=cfg.eps, optimizer=cfg.optimizer, phi=cfg.phi)
    return out["ideal"], np.array([out["leaky"][float(L)] for L in cfg.L])


def _topology_job(args):
    cfg, topology, n, d, rep = args
    spec = AnsatzSpec(n, d, CZ_TOPOLOGY, topology)
    rng = np.random.default_rng(job_seed(cfg.seed, EXPERIMENT_CODES["topology"],
                                         TOPOLOGY_CODES[topology], n, d, rep))
    vals = ex.expr2_paired(spec, [0.0] + list(cfg.L), cfg.beta, cfg.samples, rng, cfg.sigma,
                           phi=cfg.phi)
    return vals[0], vals[1:]


_JOBS = {"expressibility": _expressibility_job, "fit": _fit_job, "iris": _iris_job,
         "topology": _topology_job}


def _run_jobs(func, jobs: list, workers: int) -> list:
    if workers <= 1 or len(jobs) <= 1:
        results = []
        for job in jobs:
            try:
                results.append(func(job))
            except Exception as exc:
                raise SweepError(f"cell {job[1:]} failed: {exc}") from exc
        return results
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(func, job) for job in jobs]
        results = []
        for job, fut in zip(jobs, futures):
            try:
                results.append(fut.result())
            except Exception as exc:
                raise SweepError(f"cell {job[1:]} failed: {exc}") from exc
        return results


def run_sweep(cfg: ExperimentConfig) -> ResultTable:
    """Evaluate every grid cell of ``cfg`` and aggregate per-cell mean and stderr.

    The statistic is noiseless-minus-leaky Expr2 (expressibility),
    log10(leaky / ideal final loss) (fit), noiseless-minus-leaky CV score
    (iris) or Expr2 itself per topology and arm (topology).
    """
    exp = cfg.experiment
    if exp == "topology":
        return run_topology(cfg)
    cells = [(n, d) for n in cfg.n for d in cfg.d]
    jobs = [(cfg, n, d, rep) for n, d in cells for rep in range(cfg.reps)]
    log.info("%s sweep: %d cells x %d reps", exp, len(cells), cfg.reps)
    results = _run_jobs(_JOBS[exp], jobs, cfg.jobs)
    table = ResultTable(exp)
    for c, (n, d) in enumerate(cells):
        chunk = results[c * cfg.reps:(c + 1) * cfg.reps]
        ideal = [r[0] for r in chunk]
        leaky = np.array([r[1] for r in chunk])
        for k, L in enumerate(cfg.L):
            row = {"n": n, "d": d, "L": float(L), "reps": cfg.reps, "seed": cfg.seed}
            if exp == "expressibility":
                diff = np.asarray(ideal) - leaky[:, k]
                row.update(zip(("mean", "stderr"), _stats(diff)))
                row["ideal_mean"] = float(np.mean(ideal))
                row["leaky_mean"] = float(np.mean(leaky[:, k]))
            elif exp == "fit":
                ratios = [learn.log_loss_ratio(lk[k][-1], id_[-1]) for id_, lk in zip(ideal, leaky)]
                row.update(zip(("mean", "stderr"), _stats([r for r, _ in ratios])))
                row["ideal_final"] = float(np.mean([t[-1] for t in ideal]))
                row["leaky_final"] = float(np.mean(leaky[:, k, -1]))
                row["floored"] = int(sum(f for _, f in ratios))
                table.traces[(n, d, float(L))] = (np.mean(ideal, axis=0), leaky[:, k].mean(axis=0))
            else:
                diff = np.asarray(ideal) - leaky[:, k]
                row.update(zip(("mean", "stderr"), _stats(diff)))
                row["ideal_score"] = float(np.mean(ideal))
                row["leaky_score"] = float(np.mean(leaky[:, k]))
            table.rows.append(row)
    return table


def run_topology(cfg: ExperimentConfig) -> ResultTable:
    """Expr2 of the bare-CZ ansatz on each topology, noiseless (L=0) and leaky rows."""
    combos = [(t, n, d) for t in cfg.topologies for n in cfg.n for d in cfg.d]
    jobs = [(cfg, t, n, d, rep) for t, n, d in combos for rep in range(cfg.reps)]
    results = _run_jobs(_topology_job, jobs, cfg.jobs)
    table = ResultTable("topology")
    for c, (t, n, d) in enumerate(combos):
        chunk = results[c * cfg.reps:(c + 1) * cfg.reps]
        arms = [(0.0, [r[0] for r in chunk])]
        arms += [(float(L), [r[1][k] for r in chunk]) for k, L in enumerate(cfg.L)]
        for L, vals in arms:
            mean, se = _stats(vals)
            table.rows.append({"topology": t, "n": n, "d": d, "L": L, "mean": mean, "stderr": se,
                               "reps": cfg.reps, "seed": cfg.seed})
    return table


# ---- CSV ----------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def emit_csv(table: ResultTable, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(table.columns)
        for row in table.rows:
            w.writerow([_fmt(row[c]) for c in table.columns])


def read_csv(path, experiment: str) -> ResultTable:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != COLUMNS[experiment]:
            raise ValueError(f"unexpected columns {header}")
        rows = []
        for rec in reader:
            row = {}
            for name, text in zip(header, rec):
                row[name] = text if name in STR_COLUMNS else int(text) if name in INT_COLUMNS else float(text)
            rows.append(row)
    return ResultTable(experiment, rows)


def emit_trace_csv(ideal, leaky, path) -> None:
    """Mean loss per epoch for both arms, one row per epoch."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "ideal_loss", "leaky_loss"])
        for e, (a, b) in enumerate(zip(ideal, leaky), 1):
            w.writerow([e, _fmt(a), _fmt(b)])
