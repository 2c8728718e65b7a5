"""PGD attack and robustness evaluation tests."""

import numpy as np
import pytest

from tsadv import data as D
from tsadv.attacks import (
    AttackConfig,
    AttackStats,
    evaluate_robustness,
    pgd_attack,
    robustness_sweep_rows,
    write_sweep_csv,
)
from tsadv.constraints import ConstraintSet, fgsm_direction, project, unit_scales
from tsadv.errors import EmptyDatasetError
from tsadv.models import Arch, LinearModel, init_model

RNG = np.random.default_rng(20240815)


def linear(theta):
    theta = np.asarray(theta, dtype=np.float64)
    return LinearModel(Arch(theta.size - 1), theta)


def instance(x, y):
    x = np.asarray(x, dtype=np.float64)
    return D.TimeSeriesInstance(
        features=x, ranks=np.ones(x.size, dtype=np.int64), target=float(y), x_last=0.0
    )


def test_attack_config_default_step_size():
    cfg = AttackConfig(ConstraintSet("l2", 0.3, unit_scales(2)), steps_K=3)
    assert cfg.tau == pytest.approx(1.5 * 0.3 / 3)
    assert AttackConfig(ConstraintSet("l2", 0.3, unit_scales(2)), steps_K=3, step_size_tau=0.05).tau == 0.05
    with pytest.raises(ValueError):
        AttackConfig(ConstraintSet("l2", 0.3, unit_scales(2)), steps_K=0)


def test_single_step_pgd_is_projected_fgsm():
    m = linear([1.0, -2.0, 0.0])
    x, y = np.array([0.5, 0.25]), 2.0
    S = ConstraintSet("l2", 0.1, np.array([1.0, 0.4]))
    cfg = AttackConfig(S, steps_K=1, step_size_tau=0.07)
    deltas = pgd_attack(m, x, y, cfg)
    assert len(deltas) == 2
    assert np.array_equal(deltas[0], np.zeros(2))
    r = m.predict(x) - y
    g = 2.0 * r * m.theta[:2]
    want = project(fgsm_direction(g, S.with_radius(0.07)), S)
    np.testing.assert_allclose(deltas[1], want, atol=1e-15)


def test_zero_gradient_model_stays_at_zero():
    m = linear([0.0, 0.0, 1.5])  # constant prediction
    cfg = AttackConfig(ConstraintSet("linf", 0.5, unit_scales(2)), steps_K=3)
    for delta in pgd_attack(m, np.array([1.0, -1.0]), 0.0, cfg):
        assert np.array_equal(delta, np.zeros(2))


def test_pgd_loss_monotone_for_linear_l2():
    m = linear(np.concatenate([RNG.standard_normal(6), [0.1]]))
    x = RNG.standard_normal(6)
    y = float(m.predict(x) + 0.8)
    cfg = AttackConfig(ConstraintSet("l2", 0.3, unit_scales(6)), steps_K=4)
    losses = [(m.predict(x + d) - y) ** 2 for d in pgd_attack(m, x, y, cfg)]
    for a, b in zip(losses, losses[1:]):
        assert b >= a - 1e-12


def test_pgd_matches_classical_reference_with_unit_scales():
    # independent reference: textbook PGD with the classical projection forms
    for p in ("l2", "linf"):
        m = linear(np.concatenate([RNG.standard_normal(4), [0.0]]))
        x = RNG.standard_normal(4)
        y = float(RNG.standard_normal())
        eps, K = 0.25, 3
        tau = 1.5 * eps / K
        cfg = AttackConfig(ConstraintSet(p, eps, unit_scales(4)), steps_K=K)
        got = pgd_attack(m, x, y, cfg)

        def grad(xv):
            return 2.0 * (m.predict(xv) - y) * m.theta[:4]

        delta = np.zeros(4)
        want = [delta.copy()]
        for _ in range(K):
            g = grad(x + delta)
            gn = np.linalg.norm(g)
            if p == "l2":
                u = tau * g / gn if gn > 0 else np.zeros(4)
                v = delta + u
                n = np.linalg.norm(v)
                delta = v if n <= eps else eps * v / n
            else:
                u = tau * np.sign(g)
                delta = np.clip(delta + u, -eps, eps)
            want.append(delta.copy())
        for a, b in zip(got, want):
            np.testing.assert_allclose(a, b, atol=1e-12)


def test_every_intermediate_delta_feasible():
    stats = AttackStats()
    for _ in range(50):
        k = int(RNG.integers(1, 7))
        theta = np.concatenate([RNG.standard_normal(k), RNG.standard_normal(1)])
        m = linear(theta)
        alpha = RNG.uniform(0.1, 1.0, size=k)
        p = "l2" if RNG.uniform() < 0.5 else "linf"
        S = ConstraintSet(p, float(RNG.uniform(0.05, 1.0)), alpha)
        cfg = AttackConfig(S, steps_K=3)
        x = RNG.standard_normal(k)
        deltas = pgd_attack(m, x, float(RNG.standard_normal()), cfg, stats)
        for d in deltas:
            assert S.contains(d)
    assert stats.membership_violations == 0
    assert stats.forward_passes == 50 * 4


def test_robustness_report_1d_closed_form():
    # residual 1 at the clean point: PGD climbs to the boundary and the
    # attacked loss reaches the exact maximum (|r| + eps)^2 = 4
    m = linear([1.0, 0.0])
    ds = [instance([0.0], -1.0)]
    cfg = AttackConfig(ConstraintSet("l2", 1.0, unit_scales(1)), steps_K=3)
    rep = evaluate_robustness(m, ds, cfg)
    assert rep.clean_loss == pytest.approx(1.0, abs=1e-12)
    assert rep.attacked_loss == pytest.approx(4.0, abs=1e-12)
    assert rep.robustness_gap == pytest.approx(3.0, abs=1e-12)


def test_robustness_zero_residual_stalls_at_zero():
    # with a zero clean gradient the ascent has no direction and the
    # trajectory never leaves the origin, so the measured gap is zero even
    # though the constraint set would allow a loss of 1
    m = linear([1.0, 0.0])
    ds = [instance([0.0], 0.0)]
    cfg = AttackConfig(ConstraintSet("l2", 1.0, unit_scales(1)), steps_K=3)
    rep = evaluate_robustness(m, ds, cfg)
    assert rep.clean_loss == 0.0
    assert rep.attacked_loss == 0.0


def test_robustness_gap_vanishes_as_epsilon_to_zero():
    m = linear([0.5, -0.25, 0.1])
    ds = [instance(RNG.standard_normal(2), RNG.standard_normal()) for _ in range(5)]
    cfg = AttackConfig(ConstraintSet("l2", 0.0, unit_scales(2)), steps_K=3, step_size_tau=0.0)
    rep = evaluate_robustness(m, ds, cfg)
    assert rep.robustness_gap == 0.0


def test_attacked_mse_never_below_clean():
    for _ in range(10):
        k = 4
        m = linear(np.concatenate([RNG.standard_normal(k), [0.0]]))
        ds = [instance(RNG.standard_normal(k), RNG.standard_normal()) for _ in range(8)]
        p = "l2" if RNG.uniform() < 0.5 else "linf"
        cfg = AttackConfig(ConstraintSet(p, 0.2, unit_scales(k)), steps_K=3)
        rep = evaluate_robustness(m, ds, cfg)
        assert rep.attacked.mse >= rep.clean.mse - 1e-9
        assert rep.robustness_gap >= -1e-9


def test_robustness_deterministic():
    m = linear(np.concatenate([RNG.standard_normal(3), [0.2]]))
    ds = [instance(RNG.standard_normal(3), RNG.standard_normal()) for _ in range(6)]
    cfg = AttackConfig(ConstraintSet("linf", 0.1, unit_scales(3)), steps_K=3)
    a = evaluate_robustness(m, ds, cfg)
    b = evaluate_robustness(m, ds, cfg)
    assert a.attacked_loss == b.attacked_loss
    assert a.clean_loss == b.clean_loss


def test_monotone_attack_strength_on_linear():
    m = linear(np.concatenate([RNG.standard_normal(5), [0.0]]))
    ds = [instance(RNG.standard_normal(5), RNG.standard_normal()) for _ in range(10)]
    prev = -np.inf
    for eps in (0.05, 0.1, 0.2, 0.4):
        cfg = AttackConfig(ConstraintSet("l2", eps, unit_scales(5)), steps_K=3)
        rep = evaluate_robustness(m, ds, cfg)
        assert rep.attacked_loss >= prev - 1e-9
        prev = rep.attacked_loss


def test_empty_dataset_rejected():
    m = linear([1.0, 0.0])
    cfg = AttackConfig(ConstraintSet("l2", 0.1, unit_scales(1)), steps_K=1)
    with pytest.raises(EmptyDatasetError):
        evaluate_robustness(m, [], cfg)


def test_sweep_rows_and_csv(tmp_path):
    m = init_model("linear", Arch(160), seed=1)
    raw = D.generate_synthetic(26, 13, seed=3)
    instances, _ = D.build_instances(raw)
    rows = robustness_sweep_rows(m, instances[:10], [0.0, 0.1], ["l2", "linf"], steps_K=2)
    assert len(rows) == 4
    for eps, p, gamma, cm, am, ca, aa, gap in rows:
        if eps == 0.0:
            assert abs(gap) < 1e-12
        assert gamma == 1.0
    path = tmp_path / "sweep.csv"
    write_sweep_csv(rows, path, comment="x")
    lines = path.read_text().splitlines()
    assert lines[0].startswith("#")
    assert lines[1] == "epsilon,p,gamma,clean_mse,attacked_mse,clean_acc,attacked_acc,gap"
    assert len(lines) == 2 + 4
