"""Rescaled norm-ball geometry for time-series perturbations.

Perturbation budgets shrink with timestamp age: dimension i gets radius
``alpha_i * epsilon`` where ``alpha_i`` comes from a decay function of the
dimension's timestamp rank (rank 1 = most recent, ``alpha(1) = 1``). The
feasible set is ``S = {delta : ||delta / alpha||_p <= epsilon}`` -- an
axis-aligned ellipsoid for p = 2, a box for p = inf. With all scales equal
to one both the steepest-ascent direction and the projection reduce to the
classical norm-ball forms.
"""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass

import numpy as np

L2 = "l2"
LINF = "linf"
NORMS = (L2, LINF)

CONST = "const"
EXP = "exp"
LINEAR = "linear"
DECAY_KINDS = (CONST, EXP, LINEAR)

#: Absolute slack on the norm inequality; covers double-precision rounding
#: introduced by the projection itself.
MEMBERSHIP_TOL = 1e-9


class ZeroGradientWarning(RuntimeWarning):
    """The ascent direction was requested for an exactly-zero gradient."""


@dataclass(frozen=True)
class DecaySpec:
    """Rank-to-scale decay: const, exponential gamma**(t-1), or linear."""

    kind: str = EXP
    gamma: float = 0.7
    horizon_T: int = 20

    def __post_init__(self):
        if self.kind not in DECAY_KINDS:
            raise ValueError(f"unknown decay kind {self.kind!r}")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma}")
        if self.horizon_T < 1:
            raise ValueError(f"horizon_T must be >= 1, got {self.horizon_T}")


def decay_value(spec: DecaySpec, t: int) -> float:
    """Scale for rank t; equals 1 at t = 1 and is non-increasing in t."""
    if not 1 <= t <= spec.horizon_T:
        raise ValueError(f"rank {t} outside [1, {spec.horizon_T}]")
    if spec.kind == CONST:
        return 1.0
    if spec.kind == EXP:
        return float(spec.gamma ** (t - 1))
    # linear; a single-rank horizon degenerates to the constant function
    if spec.horizon_T == 1:
        return 1.0
    return 1.0 - (1.0 - spec.gamma) * (t - 1) / (spec.horizon_T - 1)


def build_scales(spec: DecaySpec, ranks) -> np.ndarray:
    """Per-dimension scale vector alpha with alpha_i = decay(rank_i)."""
    ranks = np.asarray(ranks, dtype=np.int64)
    return np.array([decay_value(spec, int(t)) for t in ranks], dtype=np.float64)


def unit_scales(k: int) -> np.ndarray:
    return np.ones(k, dtype=np.float64)


def lp_norm(v, p: str) -> float:
    v = np.asarray(v, dtype=np.float64)
    if p == L2:
        return float(np.sqrt(np.sum(v * v)))
    if p == LINF:
        return float(np.max(np.abs(v))) if v.size else 0.0
    raise ValueError(f"unsupported norm {p!r}")


@dataclass(frozen=True, eq=False)
class ConstraintSet:
    """The feasible region ``{delta : ||delta / scales||_p <= epsilon}``.

    ``epsilon == 0`` is allowed and denotes the degenerate set ``{0}``; the
    zero-strength training and evaluation paths rely on it.
    """

    p: str
    epsilon: float
    scales: np.ndarray

    def __post_init__(self):
        if self.p not in NORMS:
            raise ValueError(f"unsupported norm {self.p!r}")
        if not self.epsilon >= 0.0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        scales = np.asarray(self.scales, dtype=np.float64)
        if scales.ndim != 1 or scales.size == 0:
            raise ValueError("scales must be a non-empty vector")
        if np.any(scales <= 0.0) or np.any(scales > 1.0):
            raise ValueError("scale entries must lie in (0, 1]")
        object.__setattr__(self, "scales", scales)

    @property
    def dim(self) -> int:
        return self.scales.size

    def with_radius(self, epsilon: float) -> "ConstraintSet":
        return dataclasses.replace(self, epsilon=epsilon)

    def with_scales(self, scales) -> "ConstraintSet":
        return dataclasses.replace(self, scales=np.asarray(scales, dtype=np.float64))

    def contains(self, delta, tol: float = MEMBERSHIP_TOL) -> bool:
        delta = np.asarray(delta, dtype=np.float64)
        return lp_norm(delta / self.scales, self.p) <= self.epsilon + tol


def fgsm_direction(g, S: ConstraintSet, *, warn_on_zero: bool = True) -> np.ndarray:
    """Maximizer of ``delta . g`` over S (one-shot steepest ascent).

    For p = 2 the solution is ``eps * a * (a*g) / ||a*g||_2``; for p = inf it
    is ``eps * a * sign(g)`` with sign(0) = 0. A zero gradient has no unique
    maximizer: the zero perturbation is returned and the degenerate case is
    flagged with :class:`ZeroGradientWarning`.
    """
    g = np.asarray(g, dtype=np.float64)
    if g.shape != (S.dim,):
        raise ValueError(f"gradient shape {g.shape} does not match dim {S.dim}")
    if not np.all(np.isfinite(g)):
        raise ValueError("gradient must be finite")
    if not np.any(g):
        if warn_on_zero:
            warnings.warn(
                "zero gradient: ascent direction undefined, returning zero",
                ZeroGradientWarning,
                stacklevel=2,
            )
        return np.zeros_like(g)
    a = S.scales
    if S.p == L2:
        ag = a * g
        return S.epsilon * a * ag / np.sqrt(np.sum(ag * ag))
    return S.epsilon * a * np.sign(g)


def project(v, S: ConstraintSet) -> np.ndarray:
    """Projection of v onto S; idempotent, returns members unchanged.

    p = 2 shrinks radially by ``min(||v/a||_2, eps) / ||v/a||_2``; p = inf
    clips coordinate-wise in the rescaled frame: ``a * clip(v/a, -eps, eps)``.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (S.dim,):
        raise ValueError(f"vector shape {v.shape} does not match dim {S.dim}")
    a = S.scales
    if S.p == L2:
        n = float(np.sqrt(np.sum((v / a) ** 2)))
        if n <= S.epsilon or n == 0.0:
            return v.copy()
        return (S.epsilon / n) * v
    return a * np.clip(v / a, -S.epsilon, S.epsilon)
