"""Trainer tests: Adam arithmetic, convergence, determinism, risk accounting."""

import numpy as np
import pytest

from tsadv import data as D
from tsadv.attacks import AttackConfig
from tsadv.autodiff import Tape, backward, forward_loss
from tsadv.constraints import ConstraintSet, DecaySpec, unit_scales
from tsadv.errors import ConfigError, EmptyDatasetError
from tsadv.models import Arch, LinearModel, init_model
from tsadv.training import (
    AdamState,
    TrainConfig,
    adam_step,
    dataset_loss,
    train_asat,
    train_plain,
    write_train_report,
)

RNG = np.random.default_rng(20240816)


def instance(x, y):
    x = np.asarray(x, dtype=np.float64)
    return D.TimeSeriesInstance(
        features=x, ranks=np.ones(x.size, dtype=np.int64), target=float(y), x_last=0.0
    )


def linear_dataset(theta_star, n, rng):
    k = theta_star.size
    out = []
    for _ in range(n):
        x = rng.standard_normal(k)
        out.append(instance(x, float(theta_star @ x)))
    return out


# -- adam ---------------------------------------------------------------------


def test_adam_zero_gradient_leaves_theta():
    state = AdamState.fresh(3)
    theta = np.array([0.1, -0.2, 0.3])
    new_state, new_theta = adam_step(state, theta, np.zeros(3), 0.001)
    assert np.array_equal(new_theta, theta)
    assert new_state.step == 1


def test_adam_first_step_bias_correction():
    state = AdamState.fresh(1)
    _, theta = adam_step(state, np.zeros(1), np.ones(1), 0.001)
    # m_hat/sqrt(v_hat) = 1 on the first step, so the move is ~lr
    assert theta[0] == pytest.approx(-0.001, rel=1e-6)


def test_adam_deterministic():
    state = AdamState.fresh(4)
    theta = RNG.standard_normal(4)
    grad = RNG.standard_normal(4)
    a = adam_step(state, theta, grad, 0.01)
    b = adam_step(state, theta, grad, 0.01)
    assert np.array_equal(a[1], b[1])
    assert np.array_equal(a[0].m, b[0].m)


def test_adam_nonfinite_gradient_skipped_and_flagged():
    state = AdamState.fresh(2)
    theta = np.array([1.0, 2.0])
    new_state, new_theta = adam_step(state, theta, np.array([np.nan, 0.0]), 0.01)
    assert np.array_equal(new_theta, theta)
    assert new_state.skipped == 1
    assert new_state.step == 0


# -- plain training -------------------------------------------------------------


def test_train_plain_reaches_least_squares_fit():
    theta_star = np.array([0.15, -0.1, 0.05, 0.2])
    train = linear_dataset(theta_star, 2000, np.random.default_rng(1))
    dev = linear_dataset(theta_star, 500, np.random.default_rng(2))
    model = init_model("linear", Arch(4), seed=0)
    fitted, report = train_plain(model, train, dev, TrainConfig(mode="plain", seed=3))
    assert min(report.dev_losses) < 1e-3
    # closed-form least squares solves the same problem exactly
    X = np.array([list(i.features) + [1.0] for i in train])
    y = np.array([i.target for i in train])
    ls_theta, *_ = np.linalg.lstsq(X, y, rcond=None)
    ls_dev = dataset_loss(LinearModel(Arch(4), ls_theta), dev)
    assert ls_dev < 1e-20
    assert dataset_loss(fitted, dev) < 1e-3


def test_epochs_zero_rejected():
    with pytest.raises(ConfigError):
        TrainConfig(epochs=0)


def test_empty_split_rejected():
    model = init_model("linear", Arch(2), seed=0)
    ds = linear_dataset(np.array([0.1, 0.1]), 4, RNG)
    with pytest.raises(EmptyDatasetError):
        train_plain(model, [], ds, TrainConfig(seed=0, mode="plain"))
    with pytest.raises(EmptyDatasetError):
        train_plain(model, ds, [], TrainConfig(seed=0, mode="plain"))


def test_train_plain_deterministic():
    theta_star = np.array([0.1, -0.2])
    train = linear_dataset(theta_star, 50, np.random.default_rng(4))
    dev = linear_dataset(theta_star, 20, np.random.default_rng(5))
    model = init_model("linear", Arch(2), seed=0)
    cfg = TrainConfig(mode="plain", epochs=3, seed=9)
    m1, r1 = train_plain(model, train, dev, cfg)
    m2, r2 = train_plain(model, train, dev, cfg)
    assert np.array_equal(m1.theta, m2.theta)
    assert r1.train_losses == r2.train_losses
    assert r1.dev_losses == r2.dev_losses
    assert r1.selected_epoch == r2.selected_epoch


def test_checkpoint_is_argmin_dev_earliest_tie():
    theta_star = np.array([0.3, -0.3, 0.1])
    train = linear_dataset(theta_star, 120, np.random.default_rng(6))
    dev = linear_dataset(theta_star, 40, np.random.default_rng(7))
    model = init_model("linear", Arch(3), seed=0)
    fitted, report = train_plain(model, train, dev, TrainConfig(mode="plain", epochs=6, seed=1))
    dev_losses = np.array(report.dev_losses)
    assert report.selected_epoch == int(np.argmin(dev_losses)) + 1
    assert dataset_loss(fitted, dev) == dev_losses.min()


# -- adversarial training ---------------------------------------------------------


def asat_config(seed, epsilon, p="linf", K=3, gamma=0.7, epochs=2, tau=None):
    return TrainConfig(
        mode="asat",
        epochs=epochs,
        seed=seed,
        attack=AttackConfig(
            ConstraintSet(p, epsilon, unit_scales(160)), steps_K=K, step_size_tau=tau
        ),
        decay=DecaySpec("exp", gamma, 20),
    )


def market_splits(seed=5, n_days=28):
    raw = D.generate_synthetic(n_days, 13, seed=seed)
    instances, _ = D.build_instances(raw)
    return D.split(instances, seed=seed)


def test_asat_zero_strength_matches_plain_bitwise():
    ds = market_splits()
    model = init_model("linear", Arch(ds.k), seed=5)
    plain, _ = train_plain(model, ds.train, ds.dev, TrainConfig(mode="plain", epochs=2, seed=5))
    zero, _ = train_asat(model, ds.train, ds.dev, asat_config(seed=5, epsilon=0.0, tau=0.0))
    assert np.array_equal(plain.theta, zero.theta)


def test_asat_risk_accounting_four_terms_per_instance():
    ds = market_splits()
    train, dev = ds.train[:7], ds.dev[:3]
    model = init_model("linear", Arch(ds.k), seed=1)
    cfg = asat_config(seed=1, epsilon=0.01, epochs=2)
    _, report = train_asat(model, train, dev, cfg)
    assert report.forward_passes == len(train) * (cfg.attack.steps_K + 1) * cfg.epochs


def test_asat_feasibility_counter_zero():
    ds = market_splits()
    model = init_model("linear", Arch(ds.k), seed=2)
    _, report = train_asat(model, ds.train[:40], ds.dev[:10], asat_config(seed=2, epsilon=0.05))
    assert report.constraint_violations == 0


def test_asat_deterministic():
    ds = market_splits()
    model = init_model("linear", Arch(ds.k), seed=3)
    cfg = asat_config(seed=3, epsilon=0.02)
    m1, r1 = train_asat(model, ds.train[:30], ds.dev[:10], cfg)
    m2, r2 = train_asat(model, ds.train[:30], ds.dev[:10], cfg)
    assert np.array_equal(m1.theta, m2.theta)
    assert r1.dev_losses == r2.dev_losses


def test_asat_requires_attack_and_decay():
    ds = market_splits()
    model = init_model("linear", Arch(ds.k), seed=0)
    with pytest.raises(ConfigError):
        train_asat(model, ds.train, ds.dev, TrainConfig(mode="asat", seed=0))
    with pytest.raises(ConfigError):
        train_asat(model, ds.train, ds.dev, TrainConfig(mode="plain", seed=0))


def test_accumulated_gradient_equals_combined_tape():
    # mean of per-step parameter gradients == gradient of the mean risk
    # computed on a single tape with shared parameter leaves
    ds = market_splits()
    inst = ds.train[0]
    model = init_model("mlp", Arch(ds.k, hidden=(6,)), seed=8)
    model = model.clone_with(model.theta + np.random.default_rng(8).standard_normal(model.n_params()) * 0.1)
    deltas = [np.zeros(ds.k)]
    rng = np.random.default_rng(9)
    for _ in range(3):
        deltas.append(rng.uniform(-0.02, 0.02, size=ds.k))

    grads = []
    for d in deltas:
        _, tape = forward_loss(model, inst.features + d, inst.target)
        grads.append(backward(tape).grad_params)
    accumulated = sum(grads[1:], grads[0]) / len(deltas)

    tape = Tape()
    x0 = tape.input_leaf(inst.features)  # placeholder input leaf
    params = model.register_params(tape)
    total = None
    for d in deltas:
        xk = tape.constant(inst.features + d)
        yhat = model.traced_predict(tape, xk, params)
        resid = tape.sub(yhat, tape.constant(np.float64(inst.target)))
        term = tape.square(resid)
        total = term if total is None else tape.add(total, term)
    mean = tape.mul(total, tape.constant(1.0 / len(deltas)))
    tape.mark_output(mean)
    combined = backward(tape).grad_params

    np.testing.assert_allclose(accumulated, combined, atol=1e-10)


def test_grid_best_cell_dev_close_to_plain():
    # At desk scale the adversarial trainer buys robustness at a small
    # clean cost: every strength's dev MSE sits slightly above plain's and
    # approaches it as epsilon -> 0, staying within the 1e-3 allowance the
    # end-to-end benchmark grants on clean error.
    ds = market_splits(seed=7, n_days=120)
    model = init_model("linear", Arch(ds.k), seed=7)
    plain, prep = train_plain(model, ds.train, ds.dev, TrainConfig(mode="plain", seed=7))
    plain_dev = min(prep.dev_losses)
    best = np.inf
    for eps in (0.001, 0.02):
        cfg = TrainConfig(
            mode="asat",
            seed=7,
            attack=AttackConfig(ConstraintSet("linf", eps, unit_scales(ds.k)), steps_K=3),
            decay=DecaySpec("exp", 0.7, 20),
        )
        _, rep = train_asat(model, ds.train, ds.dev, cfg)
        best = min(best, min(rep.dev_losses))
    assert best <= plain_dev + 1e-3


def test_train_report_serialization(tmp_path):
    ds = market_splits()
    model = init_model("linear", Arch(ds.k), seed=4)
    _, report = train_plain(model, ds.train[:20], ds.dev[:8], TrainConfig(mode="plain", epochs=2, seed=4))
    path = tmp_path / "report.txt"
    write_train_report(report, path, comment="seed=4")
    lines = path.read_text().splitlines()
    assert lines[0] == "# seed=4"
    assert lines[1] == "epoch,train_loss,dev_loss"
    assert lines[2].startswith("1,")
    assert any(line.startswith("selected_epoch,") for line in lines)
