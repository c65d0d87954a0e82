"""Hardware-efficient layered ansatz and its entangling topologies."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import simulator as sim

CNOT_CHAIN = "cnot_chain"
CZ_TOPOLOGY = "cz_topology"
TOPOLOGIES = ("chain", "ladder", "lattice")
ROTATIONS = ("rz", "ry")
AXES = ("rx", "ry", "rz")


def _grid_edges(coords: dict[int, tuple[int, int]]) -> list[tuple[int, int]]:
    """Nearest-neighbour edges of qubits placed on grid cells.

    Horizontal edges come first, then vertical; within each group edges that
    start on an even column (row) precede those starting on an odd one.
    """
    at = {rc: q for q, rc in coords.items()}
    horiz, vert = [], []
    for (r, c), q in at.items():
        if (r, c + 1) in at:
            horiz.append((c % 2, r, c, q, at[r, c + 1]))
        if (r + 1, c) in at:
            vert.append((r % 2, r, c, q, at[r + 1, c]))
    return [(a, b) for *_, a, b in sorted(horiz)] + [(a, b) for *_, a, b in sorted(vert)]


def edges_chain(n: int) -> list[tuple[int, int]]:
    if n < 2:
        raise ValueError("a chain needs at least 2 qubits")
    return _grid_edges({q: (0, q) for q in range(n)})


def edges_ladder(n: int) -> list[tuple[int, int]]:
    """Two rows: the first ceil(n/2) qubits on top, the rest underneath, left-aligned."""
    if n < 4:
        raise ValueError("a ladder needs at least 4 qubits")
    top = math.ceil(n / 2)
    return _grid_edges({q: (0, q) if q < top else (1, q - top) for q in range(n)})


def edges_lattice(rows: int, cols: int, n: int | None = None) -> list[tuple[int, int]]:
    if rows < 1 or cols < 1:
        raise ValueError("lattice dimensions must be positive")
    if n is not None and rows * cols != n:
        raise ValueError(f"lattice {rows}x{cols} does not hold {n} qubits")
    return _grid_edges({r * cols + c: (r, c) for r in range(rows) for c in range(cols)})


def lattice_shape(n: int) -> tuple[int, int]:
    """Most square rows x cols factorisation of ``n`` with rows <= cols."""
    rows = max(r for r in range(1, math.isqrt(n) + 1) if n % r == 0)
    return rows, n // rows


def topology_edges(topology: str, n: int) -> list[tuple[int, int]]:
    if topology == "chain":
        return edges_chain(n)
    if topology == "ladder":
        return edges_ladder(n)
    if topology == "lattice":
        return edges_lattice(*lattice_shape(n), n=n)
    raise ValueError(f"unknown topology {topology!r}")


@dataclass(frozen=True)
class AnsatzSpec:
    """``d`` layers of per-qubit rotations (Rz then Ry), each followed by an entangling layer.

    ``CNOT_CHAIN`` entangles with CNOT(i -> i+1) realised as H(t) CZ(i, t) H(t);
    ``CZ_TOPOLOGY`` places one bare CZ on every edge of ``topology``.
    """

    n: int
    d: int
    entangler: str = CNOT_CHAIN
    topology: str = "chain"
    rotations: tuple[str, ...] = ROTATIONS
    edges: tuple[tuple[int, int], ...] = field(init=False)

    def __post_init__(self):
        if self.n < 1 or self.d < 0:
            raise ValueError("need n >= 1 and d >= 0")
        if self.entangler not in (CNOT_CHAIN, CZ_TOPOLOGY):
            raise ValueError(f"unknown entangler {self.entangler!r}")
        if not self.rotations or any(r not in AXES for r in self.rotations):
            raise ValueError(f"rotations must be drawn from {AXES}")
        if self.n == 1:
            edges = []
        elif self.entangler == CNOT_CHAIN:
            edges = edges_chain(self.n)
        else:
            edges = topology_edges(self.topology, self.n)
        for a, b in edges:
            if not (0 <= a < self.n and 0 <= b < self.n) or a == b:
                raise ValueError(f"invalid edge {(a, b)}")
        object.__setattr__(self, "edges", tuple(edges))

    @property
    def n_params(self) -> int:
        return self.d * self.n * len(self.rotations)

    def to_dict(self) -> dict:
        return {"n": self.n, "d": self.d, "entangler": self.entangler,
                "topology": self.topology, "rotations": list(self.rotations)}

    @classmethod
    def from_dict(cls, data: dict) -> "AnsatzSpec":
        data = dict(data)
        if "rotations" in data:
            data["rotations"] = tuple(data["rotations"])
        return cls(**data)


class GateOp(NamedTuple):
    """One circuit instruction; ``param`` indexes the flat parameter vector."""

    name: str
    sites: tuple[int, ...]
    param: int | None = None
    angle: float | None = None


def build_circuit(spec: AnsatzSpec, theta=None) -> list[GateOp]:
    """Gate sequence of ``spec``; with ``theta`` the rotation angles are bound."""
    if theta is not None:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (spec.n_params,):
            raise ValueError(f"expected {spec.n_params} parameters, got {theta.shape}")
    ops = []
    k = 0
    for _ in range(spec.d):
        for q in range(spec.n):
            for rot in spec.rotations:
                ops.append(GateOp(rot, (q,), k, None if theta is None else float(theta[k])))
                k += 1
        for a, b in spec.edges:
            if spec.entangler == CNOT_CHAIN:
                ops += [GateOp("h", (b,)), GateOp("cz", (a, b)), GateOp("h", (b,))]
            else:
                ops.append(GateOp("cz", (a, b)))
    return ops


_ROT = {"rx": sim.rx, "ry": sim.ry, "rz": sim.rz}


def _fused_rotation(ops: list[GateOp], theta: np.ndarray) -> np.ndarray:
    u = None
    for op in ops:
        g = _ROT[op.name](theta[:, op.param])
        u = g if u is None else g @ u
    return u


def initial_amplitudes(n: int, initial, batch: int) -> np.ndarray:
    """(batch, 3**n) starting amplitudes from "zero", "plus", or explicit vectors.

    Explicit vectors may be qubit (2**n) or qutrit (3**n) amplitudes, single or
    batched. "plus" is returned as |0..0>; the caller prepends Hadamards.
    """
    if isinstance(initial, str):
        if initial not in ("zero", "plus"):
            raise ValueError(f"unknown initial state {initial!r}")
        return sim.QutritState.zeros(n, batch).amplitudes
    if isinstance(initial, sim.QutritState):
        amps = initial.amplitudes
    else:
        vec = np.asarray(initial, dtype=complex)
        if vec.shape[-1] == 2**n and 2**n != 3**n:
            amps = sim.QutritState.from_qubits(vec).amplitudes
        elif vec.shape[-1] == 3**n:
            amps = vec
        else:
            raise ValueError("initial vector has the wrong length")
    norms = np.sqrt(np.sum(np.abs(amps) ** 2, axis=-1))
    if np.any(np.abs(norms - 1) > 1e-10):
        raise ValueError("initial state is not normalised")
    return np.array(np.broadcast_to(amps, (batch, 3**n)), dtype=complex)


def run(spec: AnsatzSpec, theta, leak: float = 0.0, initial="plus", phi: float = 0.0) -> sim.QutritState:
    """Evolve ``initial`` through the ansatz with leaky CZs of probability ``leak``.

    ``theta`` may be one parameter vector or a ``(B, P)`` stack; the returned
    state is batched accordingly.
    """
    theta = np.asarray(theta, dtype=float)
    single = theta.ndim == 1
    theta = np.atleast_2d(theta)
    if theta.shape[1] != spec.n_params:
        raise ValueError(f"expected {spec.n_params} parameters, got {theta.shape[1]}")
    n, batch = spec.n, theta.shape[0]
    amps = initial_amplitudes(n, initial, batch)
    if isinstance(initial, str) and initial == "plus":
        for q in range(n):
            sim._apply_1q_inplace(amps, n, sim.H, q)

    cz = sim.build_leaky_cz(sim.LeakyCZParams(leak, phi))
    cz_support = sim._support(cz)
    ops = build_circuit(spec)
    i = 0
    while i < len(ops):
        op = ops[i]
        if op.name in AXES:
            j = i
            while j < len(ops) and ops[j].name in AXES and ops[j].sites == op.sites:
                j += 1
            sim._apply_1q_inplace(amps, n, _fused_rotation(ops[i:j], theta), op.sites[0])
            i = j
            continue
        if op.name == "h":
            sim._apply_1q_inplace(amps, n, sim.H, op.sites[0])
        else:
            sim._apply_2q_inplace(amps, n, cz, *op.sites, support=cz_support)
        i += 1
    return sim.QutritState(n, amps[0] if single else amps)


def output_distribution(spec: AnsatzSpec, theta, leak: float = 0.0, beta: float = 0.0,
                        initial="plus", phi: float = 0.0, chunk: int | None = None) -> np.ndarray:
    """Misread bitstring distribution(s) of the ansatz output.

    Large batches are simulated ``chunk`` rows at a time to bound memory; the
    chunking does not change the numbers.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.ndim == 1:
        return sim.misread(sim.qutrit_populations(run(spec, theta, leak, initial, phi)), beta)
    if chunk is None:
        chunk = max(1, (1 << 21) // 3**spec.n)
    explicit = not isinstance(initial, str)
    parts = []
    for start in range(0, theta.shape[0], chunk):
        init = initial
        if explicit:
            init_arr = initial.amplitudes if isinstance(initial, sim.QutritState) else np.asarray(initial)
            if init_arr.ndim == 2:
                init = init_arr[start:start + chunk]
        state = run(spec, theta[start:start + chunk], leak, init, phi)
        parts.append(sim.misread(sim.qutrit_populations(state), beta))
    return np.concatenate(parts, axis=0)
