"""Experiment configuration: a small ``key = value`` text format.

Example::

    # data-fitting sweep
    experiment = fit
    n = 2..6
    d = [1, 2, 3]
    L = grid(1.25e-4, 1.25e-2, 11)
    reps = 20

Values are Python literals, integer ranges ``a..b`` (inclusive), or
``grid(min, max, points)`` for geometric leakage grids.
"""
from __future__ import annotations

import ast
import hashlib
import json
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

EXPERIMENTS = ("expressibility", "fit", "iris", "topology")


class ConfigError(ValueError):
    """Invalid configuration; ``line`` is the 1-based source line when known."""

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        where = ""
        if source is not None or line is not None:
            where = f"{source or '<config>'}:{line if line is not None else '?'}: "
        super().__init__(where + message)
        self.line = line


def l_grid(lo: float = 1.25e-4, hi: float = 1.25e-2, points: int = 11) -> np.ndarray:
    """Geometrically spaced leakage probabilities from ``lo`` to ``hi`` inclusive."""
    if lo <= 0 or hi <= 0:
        raise ValueError("grid bounds must be positive")
    if lo >= hi:
        raise ValueError("grid needs lo < hi")
    if points < 2:
        raise ValueError("grid needs at least 2 points")
    return np.geomspace(lo, hi, points)


# (desk, paper) defaults that depend on the run mode
MODE_DEFAULTS = {
    "expressibility": {"desk": {"samples": 2000, "reps": 5}, "paper": {"samples": 10000, "reps": 20}},
    "fit": {"desk": {"reps": 20}, "paper": {"reps": 100}},
    "iris": {"desk": {"reps": 20}, "paper": {"reps": 100}},
    "topology": {"desk": {"samples": 2000, "reps": 5}, "paper": {"samples": 10000, "reps": 20}},
}

EXPERIMENT_DEFAULTS = {
    "expressibility": {"n": list(range(2, 7)), "d": list(range(1, 7))},
    "fit": {"n": list(range(2, 7)), "d": list(range(1, 7)), "epochs": 200, "optimizer": "lm"},
    "iris": {"n": [2], "d": list(range(1, 7)), "epochs": 100, "optimizer": "adam"},
    "topology": {"n": [9], "d": [5], "L": [1.25e-3]},
}


@dataclass
class ExperimentConfig:
    experiment: str
    n: list = field(default_factory=lambda: [2])
    d: list = field(default_factory=lambda: [1])
    L: list = field(default_factory=lambda: [float(v) for v in l_grid()])
    beta: float = 0.0
    phi: float = 0.0
    samples: int = 2000
    reps: int = 5
    seed: int = 0
    out: str = "results"
    jobs: int = 1
    mode: str = "desk"
    epochs: int = 200
    lr: float = 0.05
    eps: float = 1e-4
    sigma: float = 0.01
    optimizer: str = "adam"
    topologies: list = field(default_factory=lambda: ["chain", "ladder", "lattice"])

    def validate(self, lines: dict | None = None, source: str | None = None) -> "ExperimentConfig":
        lines = lines or {}

        def fail(key, msg):
            raise ConfigError(msg, lines.get(key), source)

        if self.experiment not in EXPERIMENTS:
            fail("experiment", f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if self.mode not in ("desk", "paper"):
            fail("mode", "mode must be 'desk' or 'paper'")
        for key in ("n", "d", "L", "topologies"):
            if not getattr(self, key):
                fail(key, f"{key} grid must be non-empty")
        if any(not isinstance(v, int) or v < 1 for v in self.n):
            fail("n", "n values must be positive integers")
        if any(not isinstance(v, int) or v < 0 for v in self.d):
            fail("d", "d values must be non-negative integers")
        for v in self.L:
            if not np.isfinite(v) or v < 0 or 4 * v > 1:
                fail("L", f"leakage probability {v} violates 0 <= 4L <= 1")
        if not 0 <= self.beta <= 1:
            fail("beta", "beta must lie in [0, 1]")
        for key in ("reps", "samples", "jobs", "epochs"):
            if getattr(self, key) < 1:
                fail(key, f"{key} must be >= 1")
        if self.sigma <= 0 or self.lr <= 0 or self.eps <= 0:
            fail("sigma", "sigma, lr and eps must be positive")
        if self.seed < 0 or self.seed >= 2**64:
            fail("seed", "seed must be an unsigned 64-bit integer")
        if self.optimizer not in ("adam", "lm"):
            fail("optimizer", "optimizer must be 'adam' or 'lm'")
        bad = set(self.topologies) - {"chain", "ladder", "lattice"}
        if bad:
            fail("topologies", f"unknown topologies {sorted(bad)}")
        if self.experiment == "iris" and self.n != [2]:
            fail("n", "the Iris experiment uses n = 2")
        return self

    def digest(self) -> str:
        """Hash of the settings that determine the numbers (not ``out`` or ``jobs``)."""
        data = asdict(self)
        data.pop("out")
        data.pop("jobs")
        return hashlib.sha256(json.dumps(data, sort_keys=True).encode()).hexdigest()[:16]


KEYS = {f for f in ExperimentConfig.__dataclass_fields__}
_RANGE = re.compile(r"^\s*(-?\d+)\s*\.\.\s*(-?\d+)\s*$")
_GRID = re.compile(r"^\s*grid\s*\((.*)\)\s*$")


def _parse_value(text: str):
    m = _RANGE.match(text)
    if m:
        a, b = int(m.group(1)), int(m.group(2))
        if b < a:
            raise ValueError(f"empty range {text.strip()}")
        return list(range(a, b + 1))
    m = _GRID.match(text)
    if m:
        args = ast.literal_eval(f"({m.group(1)},)")
        return [float(v) for v in l_grid(*args)]
    try:
        return ast.literal_eval(text.strip())
    except (ValueError, SyntaxError):
        return text.strip()


_COERCE = {
    "n": int, "d": int, "L": float, "beta": float, "phi": float, "samples": int, "reps": int,
    "seed": int, "jobs": int, "epochs": int, "lr": float, "eps": float, "sigma": float,
    "experiment": str, "out": str, "mode": str, "topologies": str, "optimizer": str,
}
_LISTS = {"n", "d", "L", "topologies"}


def _coerce(key: str, value):
    conv = _COERCE[key]
    if key in _LISTS:
        items = list(value) if isinstance(value, (list, tuple)) else [value]
        if conv is int and any(isinstance(v, float) and not v.is_integer() for v in items):
            raise ValueError("expected integers")
        return [conv(v) for v in items]
    if isinstance(value, (list, tuple)):
        raise ValueError("expected a single value")
    if conv is int and isinstance(value, float) and not value.is_integer():
        raise ValueError("expected an integer")
    return conv(value)


def parse_text(text: str, source: str | None = None) -> tuple[dict, dict]:
    """Raw ``key -> value`` mapping and ``key -> line number``; rejects unknown keys."""
    values, lines = {}, {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno, source)
        key, _, val = (s.strip() for s in line.partition("="))
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno, source)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", lineno, source)
        try:
            values[key] = _coerce(key, _parse_value(val))
        except (ValueError, TypeError, SyntaxError) as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}", lineno, source) from None
        lines[key] = lineno
    return values, lines


def build_config(experiment: str | None = None, values: dict | None = None, lines: dict | None = None,
                 source: str | None = None, **overrides) -> ExperimentConfig:
    """Merge mode defaults, experiment defaults, file values and overrides, then validate."""
    values = dict(values or {})
    lines = dict(lines or {})
    if experiment is not None:
        if "experiment" in values and values["experiment"] != experiment:
            raise ConfigError(f"config is for {values['experiment']!r}, not {experiment!r}",
                              lines.get("experiment"), source)
        values["experiment"] = experiment
    if "experiment" not in values:
        raise ConfigError("missing required key 'experiment'", None, source)
    exp = values["experiment"]
    if exp not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {exp!r}", lines.get("experiment"), source)
    overrides = {k: v for k, v in overrides.items() if v is not None}
    mode = overrides.get("mode", values.get("mode", "desk"))
    merged = {**EXPERIMENT_DEFAULTS.get(exp, {}), **MODE_DEFAULTS[exp].get(mode, {}), **values, **overrides}
    for key, val in overrides.items():
        lines.pop(key, None)
    return ExperimentConfig(**merged).validate(lines, source)


def parse_config(path, experiment: str | None = None, **overrides) -> ExperimentConfig:
    path = Path(path)
    values, lines = parse_text(path.read_text(), str(path))
    return build_config(experiment, values, lines, str(path), **overrides)


def to_text(cfg: ExperimentConfig) -> str:
    """Serialise back to the config format (round-trips through ``parse_text``)."""
    out = []
    for key, val in asdict(cfg).items():
        out.append(f"{key} = {val!r}")
    return "\n".join(out) + "\n"
