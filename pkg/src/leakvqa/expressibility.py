"""Expressibility estimators for the leaky ansatz.

``expr2`` is the negated kernel MMD between misread output distributions
under uniformly random parameters and uniform samples from the probability
simplex. ``expr1_kl`` is the fidelity-histogram KL divergence to the Haar
distribution, defined only for noiseless circuits.
"""
from __future__ import annotations

import csv

import numpy as np

from .ansatz import AnsatzSpec, output_distribution, run

DEFAULT_SIGMA = 0.01


def sample_uniform_simplex(dim: int, size: int, rng) -> np.ndarray:
    """``size`` flat-Dirichlet points in ``dim`` coordinates (normalised exponentials)."""
    if dim < 2 or size < 1:
        raise ValueError("need dim >= 2 and size >= 1")
    e = rng.standard_exponential((size, dim))
    return e / e.sum(axis=1, keepdims=True)


def sample_circuit_outputs(spec: AnsatzSpec, leak: float, beta: float, size: int, rng,
                           initial="plus", theta=None, phi: float = 0.0) -> np.ndarray:
    """Misread output distributions for ``size`` parameter draws uniform in [0, 2pi)."""
    if theta is None:
        theta = rng.uniform(0, 2 * np.pi, (size, spec.n_params))
    return output_distribution(spec, theta, leak, beta, initial=initial, phi=phi)


def gaussian_kernel(x, y, sigma: float = DEFAULT_SIGMA):
    """exp(-||x - y||^2 / (4 sigma)), broadcasting over leading axes."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    diff = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    return np.exp(-np.sum(diff * diff, axis=-1) / (4 * sigma))


def _kernel_sum(a: np.ndarray, b: np.ndarray, sigma: float) -> float:
    sq = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2 * (a @ b.T)
    np.maximum(sq, 0, out=sq)
    return float(np.exp(-sq / (4 * sigma)).sum())


def mmd_biased(x, y, sigma: float = DEFAULT_SIGMA) -> float:
    """(1/N^2) |sum_ij k(x_i,x_j) + k(y_i,y_j) - 2 k(x_i,y_j)|, diagonal terms kept."""
    x = np.ascontiguousarray(x, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    if x.ndim != 2 or y.ndim != 2 or x.shape[1] != y.shape[1]:
        raise ValueError("sample sets must be 2-D with matching dimension")
    if len(x) == 0 or len(y) == 0:
        raise ValueError("sample sets must be non-empty")
    if len(x) != len(y):
        raise ValueError(f"sample sets differ in size ({len(x)} vs {len(y)})")
    # fixed argument order keeps the estimate exactly symmetric in (x, y)
    if x.tobytes() > y.tobytes():
        x, y = y, x
    n = len(x)
    kxx = _kernel_sum(x, x, sigma)
    kyy = _kernel_sum(y, y, sigma)
    kxy = _kernel_sum(x, y, sigma)
    return abs(kxx + kyy - 2 * kxy) / n**2


def expr2_from_samples(samples, uniform, sigma: float = DEFAULT_SIGMA) -> float:
    return -mmd_biased(samples, uniform, sigma)


def expr2_paired(spec: AnsatzSpec, leaks, beta: float, size: int, rng,
                 sigma: float = DEFAULT_SIGMA, initial="plus", phi: float = 0.0) -> np.ndarray:
    """Expr2 for each leak value with shared parameter draws and uniform reference set."""
    theta = rng.uniform(0, 2 * np.pi, (size, spec.n_params))
    uniform = sample_uniform_simplex(2**spec.n, size, rng)
    return np.array([
        expr2_from_samples(sample_circuit_outputs(spec, L, beta, size, rng, initial, theta, phi),
                           uniform, sigma)
        for L in leaks
    ])


def expr2(spec: AnsatzSpec, leak: float, beta: float, size: int, reps: int, seed=0,
          sigma: float = DEFAULT_SIGMA) -> tuple[float, float]:
    """Mean and standard error of Expr2 over ``reps`` independently seeded estimates."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    vals = np.array([
        expr2_paired(spec, [leak], beta, size, np.random.default_rng(child), sigma)[0]
        for child in np.random.SeedSequence(seed).spawn(reps)
    ])
    se = float(vals.std(ddof=1) / np.sqrt(reps)) if reps > 1 else 0.0
    return float(vals.mean()), se


def haar_bin_masses(dim: int, edges) -> np.ndarray:
    """Probability of each fidelity bin under the Haar law, density (dim-1)(1-F)^(dim-2)."""
    cdf = 1.0 - (1.0 - np.asarray(edges, dtype=float)) ** (dim - 1)
    return np.diff(cdf)


def kl_to_haar(fidelities, dim: int, bins: int = 75) -> float:
    """Histogram KL(empirical || Haar) over [0, 1]; empty empirical bins get one pseudo-count."""
    edges = np.linspace(0.0, 1.0, bins + 1)
    counts, _ = np.histogram(np.clip(fidelities, 0.0, 1.0), bins=edges)
    counts = np.where(counts == 0, 1, counts).astype(float)
    p = counts / counts.sum()
    q = np.maximum(haar_bin_masses(dim, edges), np.finfo(float).tiny)
    return float(np.sum(p * np.log(p / q)))


def expr1_kl(spec: AnsatzSpec, n_pairs: int, rng, bins: int = 75, leak: float = 0.0) -> float:
    """KL divergence of the pairwise output-fidelity histogram from Haar, input |0...0>."""
    if leak != 0:
        raise ValueError("Expr1 assumes pure qubit outputs and is undefined with leakage")
    theta = rng.uniform(0, 2 * np.pi, (2, n_pairs, spec.n_params))
    a = run(spec, theta[0], 0.0, initial="zero").amplitudes
    b = run(spec, theta[1], 0.0, initial="zero").amplitudes
    if a.ndim == 1:
        a, b = a[None], b[None]
    fid = np.abs(np.sum(a.conj() * b, axis=-1)) ** 2
    return kl_to_haar(fid, 2**spec.n, bins)


def haar_states(dim: int, size: int, rng) -> np.ndarray:
    z = rng.standard_normal((size, dim)) + 1j * rng.standard_normal((size, dim))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def write_samples_csv(samples, path) -> None:
    """One row per sample, columns p_<bitstring>."""
    samples = np.asarray(samples, dtype=float)
    n = int(round(np.log2(samples.shape[1])))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"p_{k:0{n}b}" for k in range(samples.shape[1])])
        for row in samples:
            w.writerow([repr(float(v)) for v in row])


def read_samples_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return np.array([[float(v) for v in r] for r in rows[1:]])
