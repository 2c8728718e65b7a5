"""Moving-average predictors and the four evaluation metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import DAY_VOL_IDX, SLOT_VOL_IDX, TimeSeriesInstance
from .errors import EmptyDatasetError

NAIVE_YESTERDAY = "naive_yesterday"
NAIVE_LAST_SLOT = "naive_last_slot"
SMA_20DAY = "sma_20day"
SMA_12SLOT = "sma_12slot"
EMA_20DAY = "ema_20day"
EMA_12SLOT = "ema_12slot"
COMBINED = "combined"
BASELINE_KINDS = (
    NAIVE_YESTERDAY,
    NAIVE_LAST_SLOT,
    SMA_20DAY,
    SMA_12SLOT,
    EMA_20DAY,
    EMA_12SLOT,
    COMBINED,
)


@dataclass(frozen=True)
class BaselineSpec:
    kind: str
    rho: float = 0.04

    def __post_init__(self):
        if self.kind not in BASELINE_KINDS:
            raise ValueError(f"unknown baseline {self.kind!r}")
        if not 0.0 < self.rho < 1.0:
            raise ValueError(f"rho must be in (0, 1), got {self.rho}")


def ema(values_oldest_first, rho: float) -> float:
    """y_1 = x_1, y_t = (1-rho) y_{t-1} + rho x_t; returns y_T.

    Iterating oldest to newest puts the greatest weight on the newest value.
    """
    values = np.asarray(values_oldest_first, dtype=np.float64)
    y = float(values[0])
    for x in values[1:]:
        y = (1.0 - rho) * y + rho * float(x)
    return y


def baseline_predict(spec: BaselineSpec, inst: TimeSeriesInstance) -> float:
    # volume blocks are stored rank 1 (nearest) first
    slot_vols = inst.features[SLOT_VOL_IDX]
    day_vols = inst.features[DAY_VOL_IDX]
    if spec.kind == NAIVE_YESTERDAY:
        return float(day_vols[0])
    if spec.kind == NAIVE_LAST_SLOT:
        return float(slot_vols[0])
    if spec.kind == SMA_20DAY:
        return float(np.mean(day_vols))
    if spec.kind == SMA_12SLOT:
        return float(np.mean(slot_vols))
    if spec.kind == EMA_20DAY:
        return ema(day_vols[::-1], spec.rho)
    if spec.kind == EMA_12SLOT:
        return ema(slot_vols[::-1], spec.rho)
    # combined: mean of the two simple moving averages
    return 0.5 * (float(np.mean(day_vols)) + float(np.mean(slot_vols)))


@dataclass(frozen=True)
class MetricsReport:
    mse: float
    rmse: float
    mae: float
    acc: float


def compute_metrics(pairs) -> MetricsReport:
    """Metrics over (prediction, truth, last-slot volume) triples.

    ACC is directional accuracy relative to the last slot's volume; ties
    (either side exactly equal to x_last) count as incorrect since the
    comparison is strict.
    """
    pairs = list(pairs)
    if not pairs:
        raise EmptyDatasetError("compute_metrics needs at least one pair")
    yhat = np.array([p[0] for p in pairs], dtype=np.float64)
    y = np.array([p[1] for p in pairs], dtype=np.float64)
    x_last = np.array([p[2] for p in pairs], dtype=np.float64)
    err = yhat - y
    mse = float(np.mean(err * err))
    return MetricsReport(
        mse=mse,
        rmse=float(np.sqrt(mse)),
        mae=float(np.mean(np.abs(err))),
        acc=float(np.mean((yhat - x_last) * (y - x_last) > 0.0)),
    )
