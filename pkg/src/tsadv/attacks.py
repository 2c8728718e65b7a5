"""Projected-gradient attacks on the rescaled constraint set.

The attack starts from the zero perturbation and alternates a steepest
ascent step of radius tau (same norm and scale vector as the outer set)
with a projection back onto the epsilon set. All K+1 perturbations,
including the zero start, are kept: adversarial training averages their
risks and the robustness evaluation uses the final one as the inner
maximizer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import backward, forward_loss
from .baselines import MetricsReport, compute_metrics
from .constraints import ConstraintSet, fgsm_direction, project
from .errors import EmptyDatasetError


@dataclass(frozen=True)
class AttackConfig:
    constraint: ConstraintSet
    steps_K: int = 3
    step_size_tau: float | None = None  # None -> 1.5 * epsilon / K

    def __post_init__(self):
        if self.steps_K < 1:
            raise ValueError(f"steps_K must be >= 1, got {self.steps_K}")
        if self.step_size_tau is not None:
            if self.step_size_tau < 0 or (self.step_size_tau == 0 and self.constraint.epsilon > 0):
                raise ValueError(f"step_size_tau must be > 0, got {self.step_size_tau}")

    @property
    def tau(self) -> float:
        if self.step_size_tau is not None:
            return self.step_size_tau
        return 1.5 * self.constraint.epsilon / self.steps_K


@dataclass
class AttackStats:
    """Bookkeeping for feasibility auditing and risk accounting."""

    forward_passes: int = 0
    membership_violations: int = 0


def pgd_trajectory(model, x, y: float, cfg: AttackConfig, stats: AttackStats | None = None):
    """Yield (delta_k, yhat_k, loss_k, grad_theta_k) for k = 0..K.

    Each step costs exactly one forward/backward: the input gradient that
    drives step k+1 and the parameter gradient of risk k come from the same
    tape. Deltas are constants with respect to the model parameters.
    """
    x = np.asarray(x, dtype=np.float64)
    S = cfg.constraint
    step_set = S.with_radius(cfg.tau)
    delta = np.zeros_like(x)
    for k in range(cfg.steps_K + 1):
        loss, tape = forward_loss(model, x + delta, y)
        if stats is not None:
            stats.forward_passes += 1
            if not S.contains(delta):
                stats.membership_violations += 1
        grads = backward(tape)
        yhat = float(tape.value(tape.prediction_index))
        yield delta, yhat, loss, grads.grad_params
        if k < cfg.steps_K:
            g = grads.grad_input
            if np.any(g):
                u = fgsm_direction(g, step_set, warn_on_zero=False)
            else:
                u = np.zeros_like(g)  # no ascent direction; stay put
            delta = project(delta + u, S)


def pgd_attack(model, x, y: float, cfg: AttackConfig, stats: AttackStats | None = None):
    """All K+1 perturbations of the PGD trajectory, delta_0 = 0 first."""
    return [delta for delta, _, _, _ in pgd_trajectory(model, x, y, cfg, stats)]


@dataclass
class RobustnessReport:
    clean_loss: float
    attacked_loss: float
    robustness_gap: float
    clean: MetricsReport
    attacked: MetricsReport
    stats: AttackStats = field(default_factory=AttackStats)


def evaluate_robustness(model, dataset, cfg: AttackConfig) -> RobustnessReport:
    """Mean loss increase under the final PGD perturbation, plus metrics.

    Deterministic given (model, dataset, cfg); instances are reduced in
    index order.
    """
    dataset = list(dataset)
    if not dataset:
        raise EmptyDatasetError("evaluate_robustness needs a non-empty dataset")
    stats = AttackStats()
    clean_pairs, attacked_pairs = [], []
    clean_sum = 0.0
    attacked_sum = 0.0
    for inst in dataset:
        steps = list(pgd_trajectory(model, inst.features, inst.target, cfg, stats))
        _, yhat0, loss0, _ = steps[0]
        _, yhatK, lossK, _ = steps[-1]
        clean_sum += loss0
        attacked_sum += lossK
        clean_pairs.append((yhat0, inst.target, inst.x_last))
        attacked_pairs.append((yhatK, inst.target, inst.x_last))
    n = len(dataset)
    clean_loss = clean_sum / n
    attacked_loss = attacked_sum / n
    return RobustnessReport(
        clean_loss=clean_loss,
        attacked_loss=attacked_loss,
        robustness_gap=attacked_loss - clean_loss,
        clean=compute_metrics(clean_pairs),
        attacked=compute_metrics(attacked_pairs),
        stats=stats,
    )


SWEEP_COLUMNS = "epsilon,p,gamma,clean_mse,attacked_mse,clean_acc,attacked_acc,gap"


def robustness_sweep_rows(model, dataset, epsilons, norms, *, steps_K=3, scales_by_norm=None, gamma=1.0):
    """Rows for the sweep CSV over epsilon x norm, in grid order.

    ``scales_by_norm`` maps a norm to the scale vector used at evaluation;
    the default is all-ones (attack strength comparable across models).
    """
    dataset = list(dataset)
    if not dataset:
        raise EmptyDatasetError("robustness sweep needs a non-empty dataset")
    k = dataset[0].features.size
    rows = []
    for eps in epsilons:
        for p in norms:
            scales = None if scales_by_norm is None else scales_by_norm.get(p)
            if scales is None:
                scales = np.ones(k)
            cfg = AttackConfig(ConstraintSet(p, float(eps), scales), steps_K=steps_K)
            rep = evaluate_robustness(model, dataset, cfg)
            rows.append(
                (
                    float(eps),
                    p,
                    float(gamma),
                    rep.clean.mse,
                    rep.attacked.mse,
                    rep.clean.acc,
                    rep.attacked.acc,
                    rep.robustness_gap,
                )
            )
    return rows


def write_sweep_csv(rows, path, *, comment: str | None = None) -> None:
    with open(path, "w", encoding="utf-8") as f:
        if comment:
            f.write(f"# {comment}\n")
        f.write(SWEEP_COLUMNS + "\n")
        for eps, p, gamma, cm, am, ca, aa, gap in rows:
            f.write(
                f"{repr(eps)},{p},{repr(gamma)},{repr(cm)},{repr(am)},"
                f"{repr(ca)},{repr(aa)},{repr(gap)}\n"
            )
