import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from leakvqa import learn


def test_fidelity_loss_examples():
    assert learn.fidelity_loss([0.5, 0.5], [0.5, 0.5]) == pytest.approx(0.0, abs=1e-15)
    assert learn.fidelity_loss([1, 0], [0, 1]) == 1.0
    assert learn.fidelity_loss([0.25, 0.75], [0.75, 0.25]) == pytest.approx(0.25, abs=1e-12)
    with pytest.raises(ValueError):
        learn.fidelity_loss([1, 0], [1, 0, 0])


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 16), st.integers(0, 2**32 - 1))
def test_fidelity_loss_bounds_and_residual_identity(dim, seed):
    rng = np.random.default_rng(seed)
    p, q = rng.dirichlet(np.ones(dim)), rng.dirichlet(np.ones(dim))
    loss = learn.fidelity_loss(p, q)
    assert 0 <= loss <= 1
    assert loss == pytest.approx(learn.fidelity_loss(q, p), abs=1e-15)
    r = np.sqrt(p) - np.sqrt(q)
    assert loss == pytest.approx(1 - (1 - r @ r / 2) ** 2, abs=1e-12)


def test_gradient_quadratic():
    a = np.array([1.0, -2.0, 0.5])
    f = lambda th: float(np.sum(a * th**2))  # noqa: E731
    th = np.array([0.3, 0.1, -1.0])
    np.testing.assert_allclose(learn.gradient(f, th), 2 * a * th, atol=1e-8)
    fb = lambda ths: np.sum(a * ths**2, axis=1)  # noqa: E731
    np.testing.assert_allclose(learn.gradient(fb, th, batched=True), 2 * a * th, atol=1e-8)
    with pytest.raises(ValueError):
        learn.gradient(f, th, eps=0)


def test_adam_first_step_moves_by_lr():
    state = learn.AdamState()
    out = learn.adam_step(np.zeros(2), np.array([3.0, -0.1]), state, lr=0.05)
    np.testing.assert_allclose(out, [-0.05, 0.05], atol=1e-8)
    assert state.t == 1


def test_adam_minimises_quadratic():
    rec = learn._train(lambda ths: np.sum((ths - 1.0) ** 2, axis=1), np.zeros(3), 400, 0.05, 1e-4)
    assert rec.losses[-1] < 1e-6
    assert rec.losses.shape == (400,)


def test_lm_trace_never_increases():
    task = learn.FittingTask.random(3, 2, np.random.default_rng(0), epochs=30)
    rec = learn.train_fit(task)
    assert np.all(np.diff(rec.losses) <= 0)
    assert rec.losses[-1] == pytest.approx(task.loss(rec.theta[None])[0], abs=1e-15)


def test_adam_fit_improves():
    task = learn.FittingTask.random(2, 2, np.random.default_rng(1), epochs=60, optimizer="adam")
    rec = learn.train_fit(task)
    assert rec.losses[-1] < task.loss(task.theta0[None])[0]


def test_unknown_optimizer():
    task = learn.FittingTask.random(2, 1, np.random.default_rng(1), optimizer="sgd")
    with pytest.raises(ValueError):
        learn.train_fit(task)


def test_log_loss_ratio_floor():
    assert learn.log_loss_ratio(1e-3, 1e-6) == (pytest.approx(3.0), False)
    r, floored = learn.log_loss_ratio(1e-3, 0.0)
    assert floored and r == pytest.approx(9.0)


def test_fit_paired_shares_start():
    out = learn.fit_paired(2, 1, [0.0, 0.01], np.random.default_rng(2), epochs=5)
    assert out["leaky"][0.0] is out["ideal"]
    assert out["target"].shape == (4,)


def test_loss_ratio_reproducible():
    a = learn.loss_ratio_log10(2, 1, 0.01, reps=2, seed=3, epochs=5)
    assert a == learn.loss_ratio_log10(2, 1, 0.01, reps=2, seed=3, epochs=5)


def test_iris_data():
    x, y = learn.load_iris_binary()
    assert x.shape == (100, 4)
    assert (y == 1).sum() == 50 and (y == -1).sum() == 50
    enc = learn.amplitude_encode(x)
    np.testing.assert_allclose(np.linalg.norm(enc, axis=1), 1)
    with pytest.raises(ValueError):
        learn.amplitude_encode([[0, 0, 0, 0]])


def test_kfold_partitions():
    folds = learn.kfold_indices(100, 4, np.random.default_rng(0))
    assert [len(f) for f in folds] == [25] * 4
    assert sorted(np.concatenate(folds)) == list(range(100))


def test_accuracy_sign_rule():
    assert learn.accuracy([0.3, -0.2, 0.0], np.array([1, -1, -1])) == pytest.approx(2 / 3)


def test_predict_matches_single_rows():
    task = learn.ClassificationTask.iris(2, L=0.01)
    thetas = np.random.default_rng(1).uniform(0, 6, (3, task.spec.n_params))
    idx = np.arange(5)
    batch = task.predict(thetas, idx)
    assert batch.shape == (3, 5)
    np.testing.assert_allclose(batch[1], task.predict(thetas[1], idx)[0], atol=1e-14)
    assert np.all(np.abs(batch) <= 1 + 1e-12)
    assert learn.mse_cost(thetas[0], task, idx) == pytest.approx(np.sum((batch[0] - task.labels[idx]) ** 2))


def test_iris_cv_learns_something():
    task = learn.ClassificationTask.iris(2, epochs=40)
    out = learn.iris_cv(task, seed=0)
    assert out["fold_accuracies"].shape == (4,)
    assert out["score"] > 0.6


def test_iris_cv_lm_runs():
    task = learn.ClassificationTask.iris(1, epochs=5, optimizer="lm")
    assert 0 <= learn.iris_cv(task, seed=0)["score"] <= 1


def test_classification_task_validation():
    with pytest.raises(ValueError):
        learn.ClassificationTask(np.ones((3, 4)), np.ones(3), 1)


def test_gradient_documented_examples():
    assert np.all(learn.gradient(lambda th: 3.0, np.ones(3)) == 0)
    np.testing.assert_allclose(learn.gradient(lambda th: float(th @ th), np.array([1.0, 2.0])), [2, 4], atol=1e-6)


def test_gradient_step_halving_consistency():
    task = learn.FittingTask.random(2, 1, np.random.default_rng(5))
    f = lambda th: task.loss(th[None])[0]  # noqa: E731
    np.testing.assert_allclose(learn.gradient(f, task.theta0, 1e-4), learn.gradient(f, task.theta0, 1e-6), atol=1e-4)


def test_adam_documented_examples():
    state = learn.AdamState()
    np.testing.assert_array_equal(learn.adam_step(np.ones(2), np.zeros(2), state), np.ones(2))
    state, th = learn.AdamState(), np.zeros(1)
    for _ in range(100):
        new = learn.adam_step(th, np.array([2.0]), state, lr=0.05)
        step, th = th - new, new
    assert step[0] == pytest.approx(0.05, rel=1e-6)
    state, th = learn.AdamState(), np.array([2.0])
    for _ in range(200):
        th = learn.adam_step(th, 2 * (th - 0.5), state, lr=0.05)
    assert abs(th[0] - 0.5) < 1e-3


def test_mse_cost_examples(monkeypatch):
    task = learn.ClassificationTask(np.eye(4)[:2], np.array([1.0, -1.0]), 1)
    monkeypatch.setattr(learn.ClassificationTask, "predict", lambda self, th, idx=None: np.array([[1.0, -1.0]]))
    assert learn.mse_cost(np.zeros(4), task) == 0
    monkeypatch.setattr(learn.ClassificationTask, "predict", lambda self, th, idx=None: np.zeros((1, 2)))
    assert learn.mse_cost(np.zeros(4), task) == 2
    monkeypatch.setattr(learn.ClassificationTask, "predict", lambda self, th, idx=None: np.array([[0.3]]))
    assert learn.mse_cost(np.zeros(4), task, idx=[0]) == pytest.approx(0.49)


def test_constant_classifier_scores_half():
    _, y = learn.load_iris_binary()
    assert learn.accuracy(np.ones_like(y), y) == 0.5


def test_small_fits_converge():
    finals = [learn.train_fit(learn.FittingTask.random(2, 2, np.random.default_rng(s))).losses[-1] for s in range(20)]
    assert np.mean(np.array(finals) < 1e-3) >= 0.9


def test_training_is_deterministic_and_descends():
    for opt in learn.OPTIMIZERS:
        task = learn.FittingTask.random(3, 2, np.random.default_rng(6), epochs=20, optimizer=opt)
        a, b = learn.train_fit(task), learn.train_fit(task)
        np.testing.assert_array_equal(a.losses, b.losses)
        assert a.losses[-1] < task.loss(task.theta0[None])[0]


def test_zero_leak_ratio_is_exactly_zero():
    mean, se, _ = learn.loss_ratio_log10(2, 2, 0.0, reps=3, seed=0, epochs=5)
    assert mean == 0.0 and se == 0.0
