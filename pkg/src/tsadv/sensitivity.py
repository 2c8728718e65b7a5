"""Dimension-wise adversarial sensitivity probing.

For each input dimension the probe maximizes the loss increase over
single-coordinate perturbations of magnitude at most epsilon, then averages
over the dataset (or reports a single instance). The candidate set is a
symmetric odd grid over [-eps, +eps] -- which always contains 0 and both
endpoints -- plus the gradient-sign endpoint. For squared error composed
with a linear model the maximizer is provably an endpoint, so the grid
search is exact there, and the estimate is proportional to |theta_i| up to
a second-order term: the factor-loading analogue for nonlinear models.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import backward, forward_loss
from .data import layout_labels

DATASET = "dataset"
SINGLE_INSTANCE = "instance"


@dataclass
class SensitivityReport:
    epsilon: float
    per_dim: np.ndarray
    scope: str
    grid_points: int


def _candidate_offsets(epsilon: float, grid_points: int) -> np.ndarray:
    return np.linspace(-epsilon, epsilon, grid_points)


def _check_grid(grid_points: int) -> None:
    if grid_points < 3 or grid_points % 2 == 0:
        raise ValueError(f"grid_points must be odd and >= 3, got {grid_points}")


def _instance_sensitivity(model, inst, i: int, epsilon: float, offsets, grad_i: float) -> float:
    x = inst.features
    y = inst.target
    r0 = model.predict(x) - y
    base_loss = r0 * r0
    candidates = list(offsets)
    candidates.append(epsilon * np.sign(grad_i))
    best = -np.inf
    x_pert = x.copy()
    for d in candidates:
        x_pert[i] = x[i] + d
        r = model.predict(x_pert) - y
        best = max(best, r * r - base_loss)
    return best


def _input_gradient(model, inst) -> np.ndarray:
    _, tape = forward_loss(model, inst.features, inst.target)
    return backward(tape).grad_input


def dim_sensitivity(model, data, i: int, epsilon: float, grid_points: int = 9) -> float:
    """Sensitivity of dimension i; `data` is one instance or a sequence."""
    instances = [data] if hasattr(data, "features") else list(data)
    if not 0 <= i < instances[0].features.size:
        raise IndexError(f"dimension {i} out of range")
    if not epsilon > 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    _check_grid(grid_points)
    offsets = _candidate_offsets(epsilon, grid_points)
    total = 0.0
    for inst in instances:
        g = _input_gradient(model, inst)
        total += _instance_sensitivity(model, inst, i, epsilon, offsets, g[i])
    return total / len(instances)


def full_report(model, data, epsilon: float = 1.0, grid_points: int = 9) -> SensitivityReport:
    """Per-dimension sensitivities over a dataset or a single instance."""
    single = hasattr(data, "features")
    instances = [data] if single else list(data)
    if not epsilon > 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    _check_grid(grid_points)
    k = instances[0].features.size
    offsets = _candidate_offsets(epsilon, grid_points)
    per_dim = np.zeros(k)
    for inst in instances:
        g = _input_gradient(model, inst)
        for i in range(k):
            per_dim[i] += _instance_sensitivity(model, inst, i, epsilon, offsets, g[i])
    per_dim /= len(instances)
    return SensitivityReport(
        epsilon=epsilon,
        per_dim=per_dim,
        scope=SINGLE_INSTANCE if single else DATASET,
        grid_points=grid_points,
    )


SENSITIVITY_COLUMNS = "dim_index,block,rank,feature,sensitivity"


def write_sensitivity_csv(report: SensitivityReport, path, *, comment: str | None = None) -> None:
    labels = layout_labels(report.per_dim.size)
    with open(path, "w", encoding="utf-8") as f:
        if comment:
            f.write(f"# {comment}\n")
        f.write(SENSITIVITY_COLUMNS + "\n")
        for i, ((block, rank, feat), value) in enumerate(zip(labels, report.per_dim)):
            f.write(f"{i},{block},{rank},{feat},{repr(float(value))}\n")
