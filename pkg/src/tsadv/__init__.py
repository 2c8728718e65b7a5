"""Adaptively scaled adversarial training for time-series regression.

The package covers the full experimental loop: rescaled norm-ball geometry
(decayed per-dimension radii), gradient attacks and projections on that
geometry, reverse-mode differentiation for three regressor families,
plain and adversarial trainers, a dimension-wise sensitivity probe,
moving-average baselines with the four standard metrics, and a synthetic
volume-prediction benchmark. See the ``tsadv`` CLI for the experiment
runner.
"""

from .attacks import (
    AttackConfig,
    AttackStats,
    RobustnessReport,
    evaluate_robustness,
    pgd_attack,
    robustness_sweep_rows,
)
from .autodiff import GradientPair, Tape, backward, forward_loss
from .baselines import BaselineSpec, MetricsReport, baseline_predict, compute_metrics, ema
from .constraints import (
    CONST,
    EXP,
    L2,
    LINEAR,
    LINF,
    ConstraintSet,
    DecaySpec,
    ZeroGradientWarning,
    build_scales,
    decay_value,
    fgsm_direction,
    lp_norm,
    project,
    unit_scales,
)
from .data import (
    RawSeries,
    SplitDataset,
    TimeSeriesInstance,
    build_instances,
    generate_synthetic,
    load_csv,
    save_csv,
    split,
)
from .models import Arch, Model, init_model, load_model, save_model
from .sensitivity import SensitivityReport, dim_sensitivity, full_report
from .training import (
    ASAT,
    PLAIN,
    AdamState,
    TrainConfig,
    TrainReport,
    adam_step,
    dataset_loss,
    train_asat,
    train_plain,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
