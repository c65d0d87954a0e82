"""Training harness: distribution fitting and Iris classification."""
from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from . import simulator as sim
from .ansatz import AnsatzSpec, output_distribution
from .expressibility import sample_uniform_simplex

LOSS_FLOOR = 1e-12


def fidelity_loss(p, q):
    """1 - (sum_i sqrt(p_i q_i))**2; ``p`` may carry a leading batch axis."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape[-1] != q.shape[-1]:
        raise ValueError("distributions have different lengths")
    overlap = np.sum(np.sqrt(np.clip(p, 0, None) * np.clip(q, 0, None)), axis=-1)
    return np.clip(1.0 - overlap**2, 0.0, 1.0)


def gradient(loss_fn, theta, eps: float = 1e-4, batched: bool = False):
    """Central finite-difference gradient.

    With ``batched=True`` the loss is called once on the stacked ``(2P, P)``
    perturbations and must return one value per row.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    theta = np.asarray(theta, dtype=float)
    p = theta.size
    shifts = np.eye(p) * eps
    if batched:
        vals = np.asarray(loss_fn(np.concatenate([theta + shifts, theta - shifts])))
        return (vals[:p] - vals[p:]) / (2 * eps)
    g = np.empty(p)
    for k in range(p):
        g[k] = (loss_fn(theta + shifts[k]) - loss_fn(theta - shifts[k])) / (2 * eps)
    return g


@dataclass
class AdamState:
    m: np.ndarray | None = None
    v: np.ndarray | None = None
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_step(theta, grad, state: AdamState, lr: float = 0.05):
    """One Adam update; moments in ``state`` are advanced in place."""
    theta = np.asarray(theta, dtype=float)
    g = np.asarray(grad, dtype=float)
    if state.m is None:
        state.m = np.zeros_like(theta)
        state.v = np.zeros_like(theta)
    state.t += 1
    state.m = state.beta1 * state.m + (1 - state.beta1) * g
    state.v = state.beta2 * state.v + (1 - state.beta2) * g * g
    m_hat = state.m / (1 - state.beta1**state.t)
    v_hat = state.v / (1 - state.beta2**state.t)
    return theta - lr * m_hat / (np.sqrt(v_hat) + state.eps)


@dataclass
class TrainRecord:
    losses: np.ndarray
    theta: np.ndarray
    seed: object = None


def _train(batch_loss, theta0, epochs: int, lr: float, eps: float, seed=None) -> TrainRecord:
    """Full-batch Adam on finite-difference gradients.

    ``losses[e]`` is the loss after update ``e``; the unperturbed point rides
    along in each gradient batch, so only the last entry costs an extra call.
    """
    theta = np.array(theta0, dtype=float)
    p = theta.size
    shifts = np.eye(p) * eps
    state = AdamState()
    losses = np.empty(epochs)
    for e in range(epochs):
        vals = batch_loss(np.concatenate([theta[None], theta + shifts, theta - shifts]))
        if e > 0:
            losses[e - 1] = vals[0]
        g = (vals[1:p + 1] - vals[p + 1:]) / (2 * eps)
        theta = adam_step(theta, g, state, lr)
    if epochs:
        losses[-1] = batch_loss(theta[None])[0]
    return TrainRecord(losses, theta, seed)


def _train_lm(batch_residual, theta0, epochs: int, eps: float, seed=None,
              damping: float = 1e-2, max_trials: int = 12) -> TrainRecord:
    """Levenberg-Marquardt on a least-squares residual.

    ``batch_residual`` maps a ``(B, P)`` stack to ``(residuals (B, R), losses (B,))``
    where each loss is a monotone function of the residual norm. The Jacobian
    comes from the same central-difference batch a gradient step would use.
    A step is taken only if it lowers the loss, so traces never increase.
    """
    theta = np.array(theta0, dtype=float)
    p = theta.size
    shifts = np.eye(p) * eps
    eye = np.eye(p)
    losses = np.empty(epochs)
    mu = damping
    for e in range(epochs):
        res, vals = batch_residual(np.concatenate([theta[None], theta + shifts, theta - shifts]))
        r, current = res[0], vals[0]
        jac = (res[1:p + 1] - res[p + 1:]).T / (2 * eps)
        jtj, jtr = jac.T @ jac, jac.T @ r
        for _ in range(max_trials):
            try:
                step = -np.linalg.solve(jtj + mu * eye, jtr)
            except np.linalg.LinAlgError:
                mu *= 4
                continue
            trial = batch_residual((theta + step)[None])[1][0]
            if trial < current:
                theta, current = theta + step, trial
                mu = max(mu / 3, 1e-12)
                break
            mu = min(mu * 4, 1e12)
        losses[e] = current
    return TrainRecord(losses, theta, seed)


OPTIMIZERS = ("adam", "lm")


@dataclass
class FittingTask:
    """Fit the misread output distribution of an ansatz to ``target``."""

    n: int
    d: int
    target: np.ndarray
    theta0: np.ndarray
    L: float = 0.0
    beta: float = 0.0
    epochs: int = 200
    lr: float = 0.05
    eps: float = 1e-4
    optimizer: str = "lm"
    phi: float = 0.0

    @classmethod
    def random(cls, n: int, d: int, rng, **kwargs) -> "FittingTask":
        """Target drawn uniformly from the simplex, then theta0 uniform in [0, 2pi)."""
        target = sample_uniform_simplex(2**n, 1, rng)[0]
        theta0 = rng.uniform(0, 2 * np.pi, AnsatzSpec(n, d).n_params)
        return cls(n, d, target, theta0, **kwargs)

    def with_leak(self, L: float) -> "FittingTask":
        return dataclasses.replace(self, L=L)

    def distribution(self, thetas):
        return output_distribution(AnsatzSpec(self.n, self.d), thetas, self.L, self.beta,
                                   initial="plus", phi=self.phi)

    def loss(self, thetas):
        return fidelity_loss(self.distribution(thetas), self.target)

    def residual(self, thetas):
        """Hellinger residual sqrt(p) - sqrt(q); the loss equals 1 - (1 - |r|^2 / 2)^2."""
        p = self.distribution(thetas)
        return np.sqrt(np.clip(p, 0, None)) - np.sqrt(self.target), fidelity_loss(p, self.target)


def train_fit(task: FittingTask, seed=None) -> TrainRecord:
    """Train from ``task.theta0`` starting at |+>^n; ``seed`` is stored for provenance."""
    if task.optimizer == "adam":
        return _train(task.loss, task.theta0, task.epochs, task.lr, task.eps, seed)
    if task.optimizer == "lm":
        return _train_lm(task.residual, task.theta0, task.epochs, task.eps, seed)
    raise ValueError(f"optimizer must be one of {OPTIMIZERS}")


def log_loss_ratio(leaky_loss: float, ideal_loss: float) -> tuple[float, bool]:
    """log10(leaky / ideal) with both losses floored at 1e-12; flag set when floored."""
    floored = ideal_loss < LOSS_FLOOR or leaky_loss < LOSS_FLOOR
    return float(np.log10(max(leaky_loss, LOSS_FLOOR) / max(ideal_loss, LOSS_FLOOR))), floored


def fit_paired(n: int, d: int, leaks, rng, *, beta=0.0, epochs=200, lr=0.05, eps=1e-4,
               optimizer="lm", phi=0.0) -> dict:
    """Train the ideal arm and one leaky arm per ``leaks`` from a shared target and theta0."""
    base = FittingTask.random(n, d, rng, beta=beta, epochs=epochs, lr=lr, eps=eps,
                              optimizer=optimizer, phi=phi)
    ideal = train_fit(base)
    arms = {float(L): (ideal if L == 0 else train_fit(base.with_leak(L))) for L in leaks}
    return {"ideal": ideal, "leaky": arms, "target": base.target}


def loss_ratio_log10(n: int, d: int, L: float, reps: int, seed: int = 0, **kwargs):
    """Mean and standard error over ``reps`` paired runs of log10(leaky / ideal final loss)."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    children = np.random.SeedSequence(seed).spawn(reps)
    vals = []
    floored = 0
    for child in children:
        out = fit_paired(n, d, [L], np.random.default_rng(child), **kwargs)
        r, f = log_loss_ratio(out["leaky"][float(L)].losses[-1], out["ideal"].losses[-1])
        vals.append(r)
        floored += f
    vals = np.asarray(vals)
    return vals.mean(), standard_error(vals), floored


def standard_error(values) -> float:
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return 0.0
    return float(values.std(ddof=1) / np.sqrt(values.size))


# ---- Iris ---------------------------------------------------------------

IRIS_CLASSES = ("Iris-versicolor", "Iris-virginica")


def load_iris_binary(path=None):
    """Versicolor (+1) and virginica (-1) rows of the bundled Iris table."""
    if path is None:
        path = resources.files("leakvqa") / "data" / "iris.csv"
    with open(path, newline="") as fh:
        rows = [r for r in csv.DictReader(fh) if r["species"] in IRIS_CLASSES]
    x = np.array([[float(r[k]) for k in ("sepal_length", "sepal_width", "petal_length", "petal_width")]
                  for r in rows])
    y = np.array([1.0 if r["species"] == IRIS_CLASSES[0] else -1.0 for r in rows])
    return x, y


def amplitude_encode(features) -> np.ndarray:
    x = np.asarray(features, dtype=float)
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("cannot amplitude-encode a zero feature vector")
    return x / norms


@dataclass
class ClassificationTask:
    """Binary classifier reading sign<Z x Z> from a 2-qubit ansatz on encoded inputs."""

    states: np.ndarray
    labels: np.ndarray
    d: int
    L: float = 0.0
    beta: float = 0.0
    n: int = 2
    folds: int = 4
    epochs: int = 100
    lr: float = 0.05
    eps: float = 1e-4
    optimizer: str = "adam"
    phi: float = 0.0
    spec: AnsatzSpec = field(init=False)

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        self.labels = np.asarray(self.labels, dtype=float)
        if self.states.shape[-1] != 2**self.n:
            raise ValueError("encoded states must have 2**n amplitudes")
        if np.any(np.abs(np.linalg.norm(self.states, axis=1) - 1) > 1e-10):
            raise ValueError("encoded states must be normalised")
        self.spec = AnsatzSpec(self.n, self.d)

    @classmethod
    def iris(cls, d: int, **kwargs) -> "ClassificationTask":
        x, y = load_iris_binary()
        return cls(amplitude_encode(x), y, d, **kwargs)

    def with_leak(self, L: float) -> "ClassificationTask":
        return dataclasses.replace(self, L=L)

    def predict(self, thetas, idx=None):
        """<Z x Z> per (theta row, sample); shape (B, M)."""
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        states = self.states if idx is None else self.states[idx]
        b, m = thetas.shape[0], states.shape[0]
        probs = output_distribution(self.spec, np.repeat(thetas, m, axis=0), self.L, self.beta,
                                    initial=np.tile(states, (b, 1)), phi=self.phi)
        return (probs @ sim.z_eigenvalues(self.n)).reshape(b, m)


def mse_cost(theta, task: ClassificationTask, idx=None):
    """Sum over samples of (<Z x Z> - y)^2; vectorised over stacked ``theta`` rows."""
    labels = task.labels if idx is None else task.labels[idx]
    out = np.sum((task.predict(theta, idx) - labels) ** 2, axis=-1)
    return out[0] if np.asarray(theta).ndim == 1 else out


def _mse_residual(thetas, task, idx):
    r = task.predict(thetas, idx) - task.labels[idx]
    return r, np.sum(r * r, axis=-1)


def kfold_indices(m: int, folds: int, rng) -> list[np.ndarray]:
    perm = rng.permutation(m)
    return np.array_split(perm, folds)


def accuracy(predictions, labels) -> float:
    return float(np.mean(np.where(np.asarray(predictions) >= 0, 1.0, -1.0) == labels))


def iris_cv(task: ClassificationTask, seed=None, rng=None, folds=None, theta0=None) -> dict:
    """K-fold cross validation; returns per-fold accuracies and their mean ("score").

    ``folds`` and ``theta0`` (one initial vector per fold) let paired runs share
    the data split and starting point; otherwise both come from ``rng``/``seed``.
    """
    if rng is None:
        rng = np.random.default_rng(seed)
    m = task.labels.size
    if folds is None:
        folds = kfold_indices(m, task.folds, rng)
    if theta0 is None:
        theta0 = rng.uniform(0, 2 * np.pi, (len(folds), task.spec.n_params))
    accs = []
    for k, test in enumerate(folds):
        train = np.setdiff1d(np.arange(m), test)
        if task.optimizer == "adam":
            rec = _train(lambda th: mse_cost(th, task, train), theta0[k], task.epochs, task.lr, task.eps)
        elif task.optimizer == "lm":
            rec = _train_lm(lambda th: _mse_residual(th, task, train), theta0[k], task.epochs, task.eps)
        else:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")
        accs.append(accuracy(task.predict(rec.theta, test)[0], task.labels[test]))
    return {"fold_accuracies": np.array(accs), "score": float(np.mean(accs))}


def iris_paired(d: int, leaks, rng, *, beta=0.0, epochs=100, lr=0.05, eps=1e-4,
                optimizer="adam", phi=0.0) -> dict:
    """CV scores of the ideal arm and each leaky arm on shared folds and initial parameters."""
    base = ClassificationTask.iris(d, beta=beta, epochs=epochs, lr=lr, eps=eps,
                                   optimizer=optimizer, phi=phi)
    folds = kfold_indices(base.labels.size, base.folds, rng)
    theta0 = rng.uniform(0, 2 * np.pi, (len(folds), base.spec.n_params))
    ideal = iris_cv(base, folds=folds, theta0=theta0)["score"]
    leaky = {float(L): (ideal if L == 0 else iris_cv(base.with_leak(L), folds=folds, theta0=theta0)["score"])
             for L in leaks}
    return {"ideal": ideal, "leaky": leaky}
