"""Synthetic volume series, instance construction, splits, and CSV I/O.

Feature layout (k = 160): dims 0..59 hold the 12 nearest time slots, rank 1
first, each contributing [log_open, log_close, log_high, log_low,
log_volume]; dims 60..159 hold the same slot of the 20 nearest previous
days, rank 1 first, in the same field order. Timestamp ranks repeat across
the two blocks (both contain a rank 1) and the decay scale is applied to
each dimension's own rank; the maximum rank T is 20.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, EmptyDatasetError, ParseError, SchemaError
from .rng import SplitMix64

N_SLOTS = 12
N_DAYS = 20
FIELDS = ("open", "close", "high", "low", "vol")
N_FIELDS = len(FIELDS)
K = (N_SLOTS + N_DAYS) * N_FIELDS  # 160
HORIZON_T = N_DAYS

SLOT_VOL_IDX = np.arange(N_FIELDS - 1, N_SLOTS * N_FIELDS, N_FIELDS)
DAY_VOL_IDX = np.arange(N_SLOTS * N_FIELDS + N_FIELDS - 1, K, N_FIELDS)


def feature_names() -> list[str]:
    names = []
    for i in range(1, N_SLOTS + 1):
        names += [f"slot{i}_{f}" for f in FIELDS]
    for j in range(1, N_DAYS + 1):
        names += [f"day{j}_{f}" for f in FIELDS]
    return names


def default_ranks() -> np.ndarray:
    """Rank vector of the fixed layout: slot dims 1..12, day dims 1..20."""
    ranks = np.empty(K, dtype=np.int64)
    for i in range(N_SLOTS):
        ranks[i * N_FIELDS : (i + 1) * N_FIELDS] = i + 1
    base = N_SLOTS * N_FIELDS
    for j in range(N_DAYS):
        ranks[base + j * N_FIELDS : base + (j + 1) * N_FIELDS] = j + 1
    return ranks


def layout_labels(k: int = K) -> list[tuple[str, int, str]]:
    """(block, rank, field) per dimension; generic labels off-layout."""
    if k != K:
        return [("dim", i + 1, "") for i in range(k)]
    labels = []
    for i in range(1, N_SLOTS + 1):
        labels += [("slot", i, f) for f in FIELDS]
    for j in range(1, N_DAYS + 1):
        labels += [("day", j, f) for f in FIELDS]
    return labels


@dataclass
class TimeSeriesInstance:
    features: np.ndarray  # (k,)
    ranks: np.ndarray     # (k,) positive ints
    target: float         # log volume of the target slot
    x_last: float         # log volume of slot rank 1 (for directional accuracy)
    day: int = 0          # chronological tags of the target slot
    slot: int = 0


def validate_instance(inst: TimeSeriesInstance) -> None:
    """Check the layout invariants of a standard 160-dim instance."""
    if inst.features.shape != (K,):
        raise ValueError(f"features shape {inst.features.shape} != ({K},)")
    if not np.array_equal(inst.ranks, default_ranks()):
        raise ValueError("ranks do not match the fixed slot/day layout")
    f = inst.features
    for pos in range(N_SLOTS + N_DAYS):
        o, c, h, low = f[pos * N_FIELDS : pos * N_FIELDS + 4]
        if not (h >= max(o, c) and min(o, c) >= low):
            raise ValueError(f"price ordering violated at position {pos}")
    if inst.x_last != f[4]:
        raise ValueError("x_last does not equal the rank-1 slot volume")


@dataclass
class RawSeries:
    """Per-(day, slot) log prices and log volumes, shape (n_days, slots)."""

    log_open: np.ndarray
    log_close: np.ndarray
    log_high: np.ndarray
    log_low: np.ndarray
    log_volume: np.ndarray
    n_days: int
    slots_per_day: int


def generate_synthetic(
    n_days: int,
    slots_per_day: int,
    seed: int,
    *,
    base_volume: float = 0.25,
    season_amp: float = 0.1,
    day_phi: float = 0.4,
    day_sigma: float = 0.075,
    slot_phi: float = 0.4,
    slot_sigma: float = 0.0375,
    price_start: float = 7.0,
    price_sigma: float = 0.01,
    envelope_sigma: float = 0.005,
) -> RawSeries:
    """Synthetic intraday series with learnable day-level structure.

    Log volume is base + a U-shaped intraday seasonal term + AR(1) noise at
    the day level + AR(1) noise at the slot level, floored at 0 (the log of
    a volume floored at 1). Log prices follow a random walk whose high/low
    envelopes respect high >= max(open, close) >= min(open, close) >= low.
    """
    if n_days < 25:
        raise ConfigError(f"n_days must be >= 25, got {n_days}")
    if slots_per_day < 13:
        raise ConfigError(f"slots_per_day must be >= 13, got {slots_per_day}")
    root = SplitMix64(seed)
    r_day = root.child("day-noise")
    r_slot = root.child("slot-noise")
    r_price = root.child("price-walk")
    r_env = root.child("price-envelope")

    D, S = n_days, slots_per_day
    mid = (S - 1) / 2.0
    season = season_amp * ((np.arange(S) - mid) / mid) ** 2

    day_ar = np.zeros(D)
    level = 0.0
    for d in range(D):
        level = day_phi * level + day_sigma * r_day.normal()
        day_ar[d] = level

    vol = np.zeros((D, S))
    e = 0.0
    for d in range(D):
        for s in range(S):
            e = slot_phi * e + slot_sigma * r_slot.normal()
            vol[d, s] = max(base_volume + season[s] + day_ar[d] + e, 0.0)

    log_open = np.zeros((D, S))
    log_close = np.zeros((D, S))
    log_high = np.zeros((D, S))
    log_low = np.zeros((D, S))
    close_prev = price_start
    for d in range(D):
        for s in range(S):
            o = close_prev
            c = o + price_sigma * r_price.normal()
            hi = max(o, c) + abs(r_env.normal()) * envelope_sigma
            lo = min(o, c) - abs(r_env.normal()) * envelope_sigma
            log_open[d, s], log_close[d, s] = o, c
            log_high[d, s], log_low[d, s] = hi, lo
            close_prev = c

    return RawSeries(log_open, log_close, log_high, log_low, vol, D, S)


def build_instances(
    raw: RawSeries, *, same_day_slots: bool = False
) -> tuple[list[TimeSeriesInstance], int]:
    """Flatten the series into instances; returns (instances, n_skipped).

    The slot block holds the 12 slots immediately preceding the target in
    chronological order, crossing day boundaries unless ``same_day_slots``
    restricts it to the target's own day. The day block holds the target's
    slot on each of the previous 20 days. Positions containing non-finite
    values are skipped and counted.
    """
    D, S = raw.n_days, raw.slots_per_day
    grids = (raw.log_open, raw.log_close, raw.log_high, raw.log_low, raw.log_volume)
    ranks = default_ranks()
    instances: list[TimeSeriesInstance] = []
    skipped = 0

    for d in range(D):
        if d < N_DAYS:
            continue
        for s in range(S):
            if same_day_slots:
                if s < N_SLOTS:
                    skipped += 1
                    continue
                slot_positions = [(d, s - r) for r in range(1, N_SLOTS + 1)]
            else:
                t = d * S + s
                if t < N_SLOTS:
                    skipped += 1
                    continue
                slot_positions = [divmod(t - r, S) for r in range(1, N_SLOTS + 1)]
            day_positions = [(d - r, s) for r in range(1, N_DAYS + 1)]

            feats = np.empty(K)
            pos = 0
            for dd, ss in slot_positions + day_positions:
                for g in grids:
                    feats[pos] = g[dd, ss]
                    pos += 1
            target = float(raw.log_volume[d, s])
            if not (np.all(np.isfinite(feats)) and math.isfinite(target)):
                skipped += 1
                continue
            instances.append(
                TimeSeriesInstance(
                    features=feats,
                    ranks=ranks.copy(),
                    target=target,
                    x_last=float(feats[4]),
                    day=d + 1,
                    slot=s + 1,
                )
            )
    return instances, skipped


@dataclass
class SplitDataset:
    train: list[TimeSeriesInstance]
    dev: list[TimeSeriesInstance]
    test: list[TimeSeriesInstance]
    k: int = K
    horizon_T: int = HORIZON_T


def split(
    instances: list[TimeSeriesInstance], seed: int, *, test_fraction: float = 1.0 / 7.0
) -> SplitDataset:
    """Chronological tail as test, remainder shuffled into train:dev = 3:1."""
    if not instances:
        raise EmptyDatasetError("no instances to split")
    ordered = sorted(instances, key=lambda it: (it.day, it.slot))
    n_test = int(round(len(ordered) * test_fraction))
    pool = ordered[: len(ordered) - n_test]
    test = ordered[len(ordered) - n_test :]
    n_dev = len(pool) // 4
    if n_test < 1 or n_dev < 1 or len(pool) - n_dev < 1:
        raise ConfigError(
            f"{len(ordered)} instances are too few for a "
            f"train/dev/test split at test_fraction={test_fraction}"
        )
    SplitMix64(seed).child("split").shuffle(pool)
    return SplitDataset(train=pool[n_dev:], dev=pool[:n_dev], test=test)


_EXTRA_COLS = ["target", "x_last", "day", "slot"]


def save_csv(instances: list[TimeSeriesInstance], path, *, comment: str | None = None) -> None:
    """One row per instance; floats written with repr for exact round-trips."""
    header = feature_names() + _EXTRA_COLS
    with open(path, "w", encoding="utf-8") as f:
        if comment:
            f.write(f"# {comment}\n")
        f.write(",".join(header) + "\n")
        for inst in instances:
            cells = [repr(float(v)) for v in inst.features]
            cells += [repr(float(inst.target)), repr(float(inst.x_last))]
            cells += [str(inst.day), str(inst.slot)]
            f.write(",".join(cells) + "\n")


def load_csv(path) -> list[TimeSeriesInstance]:
    expected = feature_names() + _EXTRA_COLS
    ranks = default_ranks()
    instances = []
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    rows = [(i + 1, line) for i, line in enumerate(lines) if not line.startswith("#")]
    if not rows:
        raise SchemaError(f"{path}: no header row")
    header_no, header = rows[0]
    if header.split(",") != expected:
        raise SchemaError(f"{path}: line {header_no}: header does not match the instance schema")
    for line_no, line in rows[1:]:
        if not line:
            continue
        cells = line.split(",")
        if len(cells) != len(expected):
            raise ParseError(
                f"{path}: line {line_no}: expected {len(expected)} columns, got {len(cells)}"
            )
        try:
            feats = np.array([float(c) for c in cells[:K]])
            target, x_last = float(cells[K]), float(cells[K + 1])
            day, slot = int(cells[K + 2]), int(cells[K + 3])
        except ValueError as exc:
            raise ParseError(f"{path}: line {line_no}: {exc}") from exc
        instances.append(
            TimeSeriesInstance(feats, ranks.copy(), target, x_last, day, slot)
        )
    return instances
