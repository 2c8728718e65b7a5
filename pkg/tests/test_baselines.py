"""Baselines and metrics against independently coded brute-force oracles."""

import math

import numpy as np
import pytest

from tsadv import data as D
from tsadv.baselines import (
    BaselineSpec,
    baseline_predict,
    compute_metrics,
    ema,
)
from tsadv.errors import EmptyDatasetError

RNG = np.random.default_rng(20240814)


def make_instance(slot_vols, day_vols):
    feats = np.zeros(160)
    feats[D.SLOT_VOL_IDX] = slot_vols
    feats[D.DAY_VOL_IDX] = day_vols
    return D.TimeSeriesInstance(
        features=feats,
        ranks=D.default_ranks(),
        target=0.0,
        x_last=float(slot_vols[0]),
    )


def test_constant_series_baselines():
    inst = make_instance(np.full(12, 3.5), np.full(20, 3.5))
    for kind in ("sma_20day", "ema_20day", "sma_12slot", "ema_12slot", "combined"):
        assert baseline_predict(BaselineSpec(kind), inst) == pytest.approx(3.5, abs=1e-14)


def test_naive_baselines_pick_rank_one():
    inst = make_instance(np.arange(1.0, 13.0), np.arange(101.0, 121.0))
    assert baseline_predict(BaselineSpec("naive_last_slot"), inst) == 1.0
    assert baseline_predict(BaselineSpec("naive_yesterday"), inst) == 101.0


def test_ema_two_element_toy_block():
    assert ema([0.0, 10.0], rho=0.04) == pytest.approx(0.4, abs=1e-15)


def test_ema_rho_one_returns_newest():
    values = RNG.standard_normal(20)
    assert ema(values, rho=1.0) == values[-1]
    with pytest.raises(ValueError):
        BaselineSpec("ema_20day", rho=1.0)  # spec objects keep rho in (0, 1)


def test_ema_weights_newest_most():
    # oldest -> newest iteration: the newest value carries weight rho,
    # previous ones decay by (1-rho) per step
    vals = np.zeros(20)
    vals[-1] = 1.0
    assert ema(vals, 0.04) == pytest.approx(0.04, abs=1e-15)
    vals2 = np.zeros(20)
    vals2[0] = 1.0
    assert ema(vals2, 0.04) == pytest.approx((1 - 0.04) ** 19, abs=1e-15)


def test_baseline_oracles_random_sweep():
    spec20 = BaselineSpec("ema_20day")
    for _ in range(1000):
        slot_vols = RNG.standard_normal(12)
        day_vols = RNG.standard_normal(20)
        inst = make_instance(slot_vols, day_vols)

        assert baseline_predict(BaselineSpec("sma_20day"), inst) == pytest.approx(
            sum(day_vols) / 20.0, abs=1e-12
        )
        assert baseline_predict(BaselineSpec("sma_12slot"), inst) == pytest.approx(
            sum(slot_vols) / 12.0, abs=1e-12
        )
        # EMA oracle: explicit weight expansion instead of the recurrence
        rho = spec20.rho
        oldest_first = day_vols[::-1]
        weights = [(1 - rho) ** 19] + [rho * (1 - rho) ** (19 - t) for t in range(1, 20)]
        want = float(np.dot(weights, oldest_first))
        assert baseline_predict(spec20, inst) == pytest.approx(want, abs=1e-12)
        combined = baseline_predict(BaselineSpec("combined"), inst)
        assert combined == pytest.approx(
            0.5 * (sum(day_vols) / 20.0 + sum(slot_vols) / 12.0), abs=1e-12
        )


def test_metrics_worked_examples():
    m = compute_metrics([(2.0, 3.0, 1.0)])
    assert m.acc == 1.0  # (2-1)(3-1) = 2 > 0
    m = compute_metrics([(1.0, 1.0, 1.0)])
    assert m.acc == 0.0  # tie counts as incorrect
    m = compute_metrics([(0.5, 0.5, 0.0), (1.5, 1.5, 2.0)])
    assert m.mse == 0.0 and m.rmse == 0.0 and m.mae == 0.0


def test_metrics_empty_input():
    with pytest.raises(EmptyDatasetError):
        compute_metrics([])


def test_metrics_oracle_random_sweep():
    for _ in range(1000):
        n = int(RNG.integers(1, 30))
        pairs = [
            (float(RNG.standard_normal()), float(RNG.standard_normal()), float(RNG.standard_normal()))
            for _ in range(n)
        ]
        m = compute_metrics(pairs)
        mse = sum((a - b) ** 2 for a, b, _ in pairs) / n
        mae = sum(abs(a - b) for a, b, _ in pairs) / n
        acc = sum(1 for a, b, c in pairs if (a - c) * (b - c) > 0) / n
        assert m.mse == pytest.approx(mse, abs=1e-12)
        assert m.rmse == pytest.approx(math.sqrt(mse), abs=1e-12)
        assert m.mae == pytest.approx(mae, abs=1e-12)
        assert m.acc == pytest.approx(acc, abs=1e-12)
        assert m.rmse**2 == pytest.approx(m.mse, abs=1e-12)
        assert 0.0 <= m.acc <= 1.0
