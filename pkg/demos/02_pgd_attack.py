"""PGD on the rescaled set: the loss climbs step by step, feasibly.

A small linear regressor is attacked with a 3-step projected gradient
ascent. Every intermediate perturbation stays inside the constraint set,
and for a convex loss the trajectory's loss is non-decreasing.
"""

import numpy as np

from tsadv import (
    Arch,
    AttackConfig,
    AttackStats,
    ConstraintSet,
    DecaySpec,
    build_scales,
    pgd_attack,
)
from tsadv.models import LinearModel

rng = np.random.default_rng(11)
k = 8
theta = np.concatenate([rng.uniform(-0.8, 0.8, k), [0.1]])
model = LinearModel(Arch(k), theta)

x = rng.standard_normal(k)
y = float(model.predict(x) + 0.5)  # half a unit of residual to amplify

ranks = np.array([1, 1, 2, 2, 3, 3, 4, 4])
alpha = build_scales(DecaySpec("exp", 0.6, 4), ranks)
print("per-dimension scales from ranks", ranks.tolist())
print("alpha =", np.round(alpha, 3))

for p in ("l2", "linf"):
    S = ConstraintSet(p, 0.25, alpha)
    cfg = AttackConfig(S, steps_K=3)  # step size defaults to 1.5*eps/K
    stats = AttackStats()
    deltas = pgd_attack(model, x, y, cfg, stats)
    print(f"\n== {p} attack, eps = {S.epsilon}, tau = {cfg.tau:.4f} ==")
    for kk, d in enumerate(deltas):
        loss = (model.predict(x + d) - y) ** 2
        inside = S.contains(d)
        print(f"  k={kk}: loss = {loss:.6f}  ||d/alpha||_{p} = "
              f"{np.max(np.abs(d / alpha)) if p == 'linf' else np.linalg.norm(d / alpha):.6f}"
              f"  feasible = {inside}")
    print(f"  forward passes: {stats.forward_passes}, membership violations: {stats.membership_violations}")

print("\nzero-gradient corner case: a constant model gives PGD nothing to climb")
flat = LinearModel(Arch(k), np.concatenate([np.zeros(k), [2.0]]))
cfg = AttackConfig(ConstraintSet("l2", 0.25, alpha), steps_K=3)
deltas = pgd_attack(flat, x, 0.0, cfg)
print("all perturbations stay at zero:", all(not d.any() for d in deltas))
