"""Pure-state qutrit simulator for qubit circuits with leaky two-qubit gates.

Every site carries the computational levels |0>, |1> and one leak level |2>.
Amplitude vectors have length 3**n with site 0 as the most significant trit.
Functions accept a single state of shape ``(3**n,)`` or a batch of shape
``(B, 3**n)``; a batch lets one gate call evolve many parameter settings at once.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

UNITARY_ATOL = 1e-10

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
SDG = np.array([[1, 0], [0, -1j]], dtype=complex)


def rx(angle):
    """Rx rotation; ``angle`` may be a scalar or an array (returns ``(..., 2, 2)``)."""
    a = np.asarray(angle, dtype=float) / 2
    c, s = np.cos(a), np.sin(a)
    out = np.empty(a.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = c
    out[..., 0, 1] = -1j * s
    out[..., 1, 0] = -1j * s
    out[..., 1, 1] = c
    return out


def ry(angle):
    a = np.asarray(angle, dtype=float) / 2
    c, s = np.cos(a), np.sin(a)
    out = np.empty(a.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = c
    out[..., 0, 1] = -s
    out[..., 1, 0] = s
    out[..., 1, 1] = c
    return out


def rz(angle):
    a = np.asarray(angle, dtype=float) / 2
    out = np.zeros(a.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = np.exp(-1j * a)
    out[..., 1, 1] = np.exp(1j * a)
    return out


@dataclass(frozen=True)
class LeakyCZParams:
    """Leakage probability ``L`` and transition phase ``phi`` of a leaky CZ."""

    L: float
    phi: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.L) or self.L < 0 or 4 * self.L > 1:
            raise ValueError(f"leakage probability must satisfy 0 <= 4L <= 1, got L={self.L}")


@dataclass(frozen=True)
class ReadoutModel:
    """Probability ``beta`` that a leaked site is reported as 0 (else as 1)."""

    beta: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")


class PauliObservable(NamedTuple):
    """Single-qubit observable h0*I + h1*X + h2*Y + h3*Z."""

    h0: float
    h1: float
    h2: float
    h3: float

    def matrix(self) -> np.ndarray:
        return self.h0 * I2 + self.h1 * X + self.h2 * Y + self.h3 * Z


class QutritState:
    """Amplitudes of ``n`` qutrits, optionally with a leading batch axis."""

    def __init__(self, n: int, amplitudes):
        amplitudes = np.asarray(amplitudes, dtype=complex)
        if amplitudes.shape[-1] != 3**n or amplitudes.ndim not in (1, 2):
            raise ValueError(f"expected shape (3**{n},) or (B, 3**{n}), got {amplitudes.shape}")
        self.n = n
        self.amplitudes = amplitudes

    @classmethod
    def zeros(cls, n: int, batch: int | None = None) -> "QutritState":
        shape = (3**n,) if batch is None else (batch, 3**n)
        amps = np.zeros(shape, dtype=complex)
        amps[..., 0] = 1.0
        return cls(n, amps)

    @classmethod
    def from_qubits(cls, qubit_amplitudes) -> "QutritState":
        """Lift a qubit state vector (length 2**n, or batch) into the qutrit space."""
        q = np.asarray(qubit_amplitudes, dtype=complex)
        n = int(round(np.log2(q.shape[-1])))
        if 2**n != q.shape[-1]:
            raise ValueError("qubit vector length must be a power of two")
        amps = np.zeros(q.shape[:-1] + (3**n,), dtype=complex)
        amps[..., qubit_indices(n)] = q
        return cls(n, amps)

    @property
    def batched(self) -> bool:
        return self.amplitudes.ndim == 2

    def norm(self):
        return np.sqrt(np.sum(np.abs(self.amplitudes) ** 2, axis=-1))

    def copy(self) -> "QutritState":
        return QutritState(self.n, self.amplitudes.copy())

    def __repr__(self):
        batch = f", batch={self.amplitudes.shape[0]}" if self.batched else ""
        return f"QutritState(n={self.n}{batch})"


def qubit_indices(n: int) -> np.ndarray:
    """Positions in the 3**n vector of the 2**n leak-free basis states, bitstring order."""
    idx = np.zeros(1, dtype=np.int64)
    for _ in range(n):
        idx = (3 * idx[:, None] + np.array([0, 1])).ravel()
    return idx


def _check_unitary(u: np.ndarray, atol: float = UNITARY_ATOL) -> None:
    u = np.asarray(u)
    eye = np.eye(u.shape[-1])
    err = np.abs(np.conj(np.swapaxes(u, -1, -2)) @ u - eye).max()
    if err > atol:
        raise ValueError(f"gate is not unitary (max deviation {err:.3g})")


def _apply_1q_inplace(amps: np.ndarray, n: int, gate: np.ndarray, site: int) -> None:
    """Act with ``gate`` on levels {0, 1} of ``site``; ``amps`` has shape (B, 3**n)."""
    view = amps.reshape(amps.shape[0], 3**site, 3, 3 ** (n - site - 1))
    s0 = view[:, :, 0, :].copy()
    s1 = view[:, :, 1, :]
    if gate.ndim == 3:
        g = gate[:, :, :, None, None]
        view[:, :, 0, :] = g[:, 0, 0] * s0 + g[:, 0, 1] * s1
        view[:, :, 1, :] = g[:, 1, 0] * s0 + g[:, 1, 1] * s1
    else:
        view[:, :, 0, :] = gate[0, 0] * s0 + gate[0, 1] * s1
        view[:, :, 1, :] = gate[1, 0] * s0 + gate[1, 1] * s1


def _support(u: np.ndarray) -> np.ndarray:
    """Basis indices of a 9x9 gate that are not left alone by the identity part."""
    off = np.abs(u - np.eye(9)) > 0
    return np.flatnonzero(off.any(axis=0) | off.any(axis=1))


def _apply_2q_inplace(amps: np.ndarray, n: int, u: np.ndarray, i: int, j: int,
                      support: np.ndarray | None = None) -> None:
    if support is None:
        support = _support(u)
    if support.size == 0:
        return
    view = amps.reshape((amps.shape[0],) + (3,) * n)
    slots = []
    for k in support:
        idx = [slice(None)] * (n + 1)
        idx[1 + i], idx[1 + j] = divmod(int(k), 3)
        slots.append(tuple(idx))
    comps = [view[s].copy() for s in slots]
    sub = u[np.ix_(support, support)]
    for r, s in enumerate(slots):
        acc = sub[r, 0] * comps[0]
        for c in range(1, len(comps)):
            if sub[r, c] != 0:
                acc = acc + sub[r, c] * comps[c]
        view[s] = acc


def _as_batch(state: QutritState) -> np.ndarray:
    return state.amplitudes.copy() if state.batched else state.amplitudes[None].copy()


def _wrap(state: QutritState, amps: np.ndarray) -> QutritState:
    return QutritState(state.n, amps if state.batched else amps[0])


def embed_1q(gate, site: int, state: QutritState) -> QutritState:
    """Apply a 2x2 unitary to the qubit levels of ``site``; the leak level is untouched.

    ``gate`` may also be a stack ``(B, 2, 2)`` matching a batched state.
    """
    gate = np.asarray(gate, dtype=complex)
    if gate.shape[-2:] != (2, 2):
        raise ValueError("single-qubit gate must be 2x2")
    if not 0 <= site < state.n:
        raise IndexError(f"site {site} out of range for {state.n} qutrits")
    _check_unitary(gate)
    amps = _as_batch(state)
    _apply_1q_inplace(amps, state.n, gate, site)
    return _wrap(state, amps)


def ideal_cz() -> np.ndarray:
    """CZ on two qutrits: phase -1 on |11>, identity on every other basis state."""
    u = np.eye(9, dtype=complex)
    u[4, 4] = -1
    return u


def build_leaky_cz(params: LeakyCZParams) -> np.ndarray:
    """9x9 unitary of a CZ followed by the |11> <-> |02> exchange.

    Exchange: |11> -> c|11> + e^{i phi} s|02>, |02> -> c|02> - e^{-i phi} s|11>
    with c = sqrt(1 - 4L), s = sqrt(4L).
    """
    if not isinstance(params, LeakyCZParams):
        params = LeakyCZParams(*params)
    c = np.sqrt(1 - 4 * params.L)
    s = np.sqrt(4 * params.L)
    exchange = np.eye(9, dtype=complex)
    i11, i02 = 4, 2
    exchange[i11, i11] = c
    exchange[i02, i11] = np.exp(1j * params.phi) * s
    exchange[i02, i02] = c
    exchange[i11, i02] = -np.exp(-1j * params.phi) * s
    return exchange @ ideal_cz()


def apply_2q(u, sites: Sequence[int], state: QutritState) -> QutritState:
    """Apply a 9x9 unitary to sites ``(i, j)``; basis index is 3*trit_i + trit_j."""
    u = np.asarray(u, dtype=complex)
    if u.shape != (9, 9):
        raise ValueError("two-qutrit gate must be 9x9")
    i, j = sites
    if i == j:
        raise ValueError("two-qutrit gate needs distinct sites")
    if not (0 <= i < state.n and 0 <= j < state.n):
        raise IndexError(f"sites {sites} out of range for {state.n} qutrits")
    _check_unitary(u)
    amps = _as_batch(state)
    _apply_2q_inplace(amps, state.n, u, i, j)
    return _wrap(state, amps)


def qutrit_populations(state: QutritState) -> np.ndarray:
    return np.abs(state.amplitudes) ** 2


def misread(populations, model: ReadoutModel | float = 0.0) -> np.ndarray:
    """Map trit-string populations to reported bitstring probabilities.

    Each site found in |2> is reported as 0 with probability beta and as 1
    otherwise, independently per site.
    """
    if not isinstance(model, ReadoutModel):
        model = ReadoutModel(float(model))
    beta = model.beta
    p = np.asarray(populations, dtype=float)
    n = int(round(np.log(p.shape[-1]) / np.log(3)))
    if 3**n != p.shape[-1]:
        raise ValueError("population vector length must be a power of three")
    lead = p.shape[:-1]
    t = p.reshape(lead + (3,) * n)
    off = len(lead)
    for k in range(n):
        ax = off + k
        p0 = np.take(t, 0, axis=ax)
        p1 = np.take(t, 1, axis=ax)
        p2 = np.take(t, 2, axis=ax)
        t = np.stack([p0 + beta * p2, p1 + (1 - beta) * p2], axis=ax)
    return t.reshape(lead + (2**n,))


def z_eigenvalues(n: int, sites: Sequence[int] | None = None) -> np.ndarray:
    """Eigenvalues of a product of Z on ``sites`` (default all) per bitstring."""
    sites = range(n) if sites is None else sites
    bits = (np.arange(2**n)[:, None] >> (n - 1 - np.arange(n))) & 1
    return (-1.0) ** bits[:, list(sites)].sum(axis=1)


def expect_diagonal(state: QutritState, eigenvalues, model: ReadoutModel | float = 0.0):
    """Expectation of a computational-basis-diagonal observable after misreading."""
    lam = np.asarray(eigenvalues, dtype=float)
    if lam.shape != (2**state.n,):
        raise ValueError(f"observable needs {2**state.n} eigenvalues, got {lam.shape}")
    return misread(qutrit_populations(state), model) @ lam


def _descending_rotation(h: np.ndarray):
    """Return (eigenvalues descending, V) with V h V^dagger diagonal."""
    w, vecs = np.linalg.eigh(h)
    order = np.argsort(w)[::-1]
    return w[order], vecs[:, order].conj().T


def _require_single(state: QutritState):
    if state.n != 1:
        raise ValueError("this measurement procedure is defined for a single qutrit")


def expect_diagonalized(state: QutritState, h, model: ReadoutModel | float = 0.0,
                        rotation=None):
    """Measure a 2x2 Hermitian ``h`` by rotating to its eigenbasis, then misreading.

    Eigenvalues are taken in descending order unless ``rotation`` is supplied,
    in which case ``rotation @ h @ rotation^dagger`` must already be diagonal.
    """
    _require_single(state)
    h = np.asarray(h, dtype=complex)
    if h.shape != (2, 2) or not np.allclose(h, h.conj().T, atol=1e-12):
        raise ValueError("observable must be a 2x2 Hermitian matrix")
    if rotation is None:
        lam, v = _descending_rotation(h)
    else:
        v = np.asarray(rotation, dtype=complex)
        d = v @ h @ v.conj().T
        if np.abs(d - np.diag(np.diag(d))).max() > 1e-10:
            raise ValueError("rotation does not diagonalize the observable")
        lam = np.real(np.diag(d))
    rotated = embed_1q(v, 0, state)
    return expect_diagonal(rotated, lam, model)


# Basis changes taking each Pauli's +1 eigenvector to |0>.
_PAULI_ROTATIONS = {1: H, 2: H @ SDG, 3: I2}


def expect_pauli(state: QutritState, obs: PauliObservable | Sequence[float],
                 model: ReadoutModel | float = 0.0):
    """Sum of separately measured Pauli terms, each rotated to Z then misread."""
    _require_single(state)
    h = PauliObservable(*obs)
    total = h.h0
    for k, coeff in ((1, h.h1), (2, h.h2), (3, h.h3)):
        if coeff != 0:
            rotated = embed_1q(_PAULI_ROTATIONS[k], 0, state)
            total = total + coeff * expect_diagonal(rotated, [1.0, -1.0], model)
    return total
