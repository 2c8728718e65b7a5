"""Plain and adversarial training with Adam and best-dev checkpointing.

Both trainers are deterministic functions of (model, data, config): batch
order comes from a seeded shuffle, per-instance gradients are reduced in
index order, and one Adam update happens per batch. Adversarial training
averages the K+1 per-step risks of the PGD trajectory; perturbations are
constants with respect to the parameters (no differentiation through the
attack's inner loop).

The per-instance sum over the K+1 risk gradients uses pairwise folding.
When the attack strength is zero all K+1 gradients coincide, and for K+1 a
power of two (the default K = 3) the fold and the final division are exact
scalings, so the zero-strength adversarial trainer reproduces the plain
trainer bit for bit.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .attacks import AttackConfig, AttackStats, pgd_trajectory
from .autodiff import backward, forward_loss
from .baselines import MetricsReport
from .constraints import DecaySpec, build_scales
from .errors import ConfigError, EmptyDatasetError, NumericError
from .rng import SplitMix64

PLAIN = "plain"
ASAT = "asat"


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 5
    batch_size: int = 32
    learning_rate: float = 0.001
    seed: int = 0
    mode: str = PLAIN
    attack: AttackConfig | None = None
    decay: DecaySpec | None = None

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.mode not in (PLAIN, ASAT):
            raise ConfigError(f"unknown training mode {self.mode!r}")


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    skipped: int = 0

    beta1 = 0.9
    beta2 = 0.999
    eps = 1e-8

    @classmethod
    def fresh(cls, n: int) -> "AdamState":
        return cls(m=np.zeros(n), v=np.zeros(n))


def adam_step(state: AdamState, theta: np.ndarray, grad: np.ndarray, lr: float):
    """One bias-corrected Adam update; returns (new_state, new_theta).

    A non-finite gradient skips the update and bumps the skip counter
    instead of corrupting the parameters.
    """
    if theta.shape != grad.shape:
        raise ValueError(f"theta shape {theta.shape} != grad shape {grad.shape}")
    if not np.all(np.isfinite(grad)):
        return dataclasses.replace(state, skipped=state.skipped + 1), theta.copy()
    t = state.step + 1
    m = AdamState.beta1 * state.m + (1.0 - AdamState.beta1) * grad
    v = AdamState.beta2 * state.v + (1.0 - AdamState.beta2) * grad * grad
    m_hat = m / (1.0 - AdamState.beta1**t)
    v_hat = v / (1.0 - AdamState.beta2**t)
    new_theta = theta - lr * m_hat / (np.sqrt(v_hat) + AdamState.eps)
    return AdamState(m=m, v=v, step=t, skipped=state.skipped), new_theta


@dataclass
class TrainReport:
    train_losses: list[float] = field(default_factory=list)
    dev_losses: list[float] = field(default_factory=list)
    selected_epoch: int = 0  # 1-based; minimizes dev loss, earliest on ties
    forward_passes: int = 0
    constraint_violations: int = 0
    adam_skipped: int = 0
    test_metrics: MetricsReport | None = None


def _pairwise_sum(arrays: list[np.ndarray]) -> np.ndarray:
    items = list(arrays)
    while len(items) > 1:
        nxt = [items[i] + items[i + 1] for i in range(0, len(items) - 1, 2)]
        if len(items) % 2:
            nxt.append(items[-1])
        items = nxt
    return items[0]


def dataset_loss(model, dataset) -> float:
    """Mean squared error of the model over the dataset, index order."""
    total = 0.0
    for inst in dataset:
        r = model.predict(inst.features) - inst.target
        total += r * r
    return total / len(dataset)


def _batches(n: int, batch_size: int, stream: SplitMix64):
    order = list(range(n))
    stream.shuffle(order)
    return [order[i : i + batch_size] for i in range(0, n, batch_size)]


def _run_training(model, train_set, dev_set, cfg: TrainConfig, batch_grad_fn):
    train_set, dev_set = list(train_set), list(dev_set)
    if not train_set or not dev_set:
        raise EmptyDatasetError("training needs non-empty train and dev splits")
    report = TrainReport()
    theta = model.theta.copy()
    state = AdamState.fresh(theta.size)
    shuffle_stream = SplitMix64(cfg.seed).child("batches")
    best_dev = np.inf
    best_theta = theta.copy()

    for epoch in range(1, cfg.epochs + 1):
        loss_sum, loss_terms = 0.0, 0
        for batch in _batches(len(train_set), cfg.batch_size, shuffle_stream):
            work = model.clone_with(theta)
            gsum, bl_sum, bl_terms = batch_grad_fn(work, [train_set[i] for i in batch], report)
            loss_sum += bl_sum
            loss_terms += bl_terms
            state, theta = adam_step(state, theta, gsum / bl_terms, cfg.learning_rate)
        report.train_losses.append(loss_sum / loss_terms)
        dev_loss = dataset_loss(model.clone_with(theta), dev_set)
        report.dev_losses.append(dev_loss)
        if dev_loss < best_dev:
            best_dev = dev_loss
            best_theta = theta.copy()
            report.selected_epoch = epoch

    report.adam_skipped = state.skipped
    if not np.all(np.isfinite(best_theta)):
        raise NumericError("training produced non-finite parameters")
    return model.clone_with(best_theta), report


def train_plain(model, train_set, dev_set, cfg: TrainConfig):
    """Minimize batch-mean squared error; returns (best model, report)."""

    def batch_grad(work, batch, report):
        gsum = None
        loss_sum = 0.0
        for inst in batch:
            loss, tape = forward_loss(work, inst.features, inst.target)
            report.forward_passes += 1
            g = backward(tape).grad_params
            gsum = g if gsum is None else gsum + g
            loss_sum += loss
        return gsum, loss_sum, len(batch)

    return _run_training(model, train_set, dev_set, cfg, batch_grad)


def train_asat(model, train_set, dev_set, cfg: TrainConfig):
    """Adversarial training on the decayed-scale constraint set.

    Per batch and instance, a K-step PGD trajectory produces K+1 risks
    whose mean is the training objective; the parameters are updated once
    per batch on the gradient of that mean.
    """
    if cfg.mode != ASAT:
        raise ConfigError(f"train_asat requires mode={ASAT!r}, got {cfg.mode!r}")
    if cfg.attack is None or cfg.decay is None:
        raise ConfigError("ASAT training needs both an attack config and a decay spec")
    train_list = list(train_set)
    if not train_list:
        raise EmptyDatasetError("training needs a non-empty train split")
    scales = build_scales(cfg.decay, train_list[0].ranks)
    attack = dataclasses.replace(
        cfg.attack, constraint=cfg.attack.constraint.with_scales(scales)
    )
    n_risks = attack.steps_K + 1

    def batch_grad(work, batch, report):
        stats = AttackStats()
        gsum = None
        loss_sum = 0.0
        for inst in batch:
            grads_k, losses_k = [], []
            for _, _, loss, gtheta in pgd_trajectory(
                work, inst.features, inst.target, attack, stats
            ):
                grads_k.append(gtheta)
                losses_k.append(loss)
            inner = _pairwise_sum(grads_k)
            gsum = inner if gsum is None else gsum + inner
            loss_sum += _pairwise_sum(losses_k)
        report.forward_passes += stats.forward_passes
        report.constraint_violations += stats.membership_violations
        return gsum, loss_sum, len(batch) * n_risks

    return _run_training(model, train_list, dev_set, cfg, batch_grad)


def write_train_report(report: TrainReport, path, *, comment: str | None = None) -> None:
    """Structured text: one epoch record per line, then summary records."""
    with open(path, "w", encoding="utf-8") as f:
        if comment:
            f.write(f"# {comment}\n")
        f.write("epoch,train_loss,dev_loss\n")
        for i, (tr, dv) in enumerate(zip(report.train_losses, report.dev_losses), start=1):
            f.write(f"{i},{repr(tr)},{repr(dv)}\n")
        f.write(f"selected_epoch,{report.selected_epoch}\n")
        f.write(f"forward_passes,{report.forward_passes}\n")
        f.write(f"constraint_violations,{report.constraint_violations}\n")
        f.write(f"adam_skipped,{report.adam_skipped}\n")
        if report.test_metrics is not None:
            m = report.test_metrics
            f.write(f"test_mse,{repr(m.mse)}\n")
            f.write(f"test_rmse,{repr(m.rmse)}\n")
            f.write(f"test_mae,{repr(m.mae)}\n")
            f.write(f"test_acc,{repr(m.acc)}\n")
