"""Tour of the rescaled perturbation geometry in two dimensions.

Older timestamps get smaller perturbation budgets: a decay function maps a
dimension's timestamp rank to a scale in (0, 1], and the usual norm ball
turns into an ellipse (L2) or a rectangle (Linf). The closed-form steepest
ascent direction and the projection both live on that rescaled set.
"""

import numpy as np

from tsadv import (
    ConstraintSet,
    DecaySpec,
    build_scales,
    decay_value,
    fgsm_direction,
    lp_norm,
    project,
)

print("== decay functions (gamma = 0.7, horizon T = 8) ==")
for kind in ("const", "exp", "linear"):
    spec = DecaySpec(kind, 0.7, 8)
    row = "  ".join(f"{decay_value(spec, t):.3f}" for t in range(1, 9))
    print(f"{kind:7s} alpha(1..8) = {row}")

print()
print("== a two-dimensional constraint: recent dim at full scale, old dim at 0.5 ==")
alpha = build_scales(DecaySpec("exp", 0.5, 2), ranks=[1, 2])
print("scales:", alpha)

g = np.array([3.0, 4.0])
for p in ("l2", "linf"):
    S = ConstraintSet(p, 1.0, alpha)
    d = fgsm_direction(g, S)
    print(f"\n{p}: steepest ascent for gradient {g} -> {np.round(d, 5)}")
    print(f"   value  <d, g> = {d @ g:.6f}")
    print(f"   rescaled norm ||d/alpha||_{p} = {lp_norm(d / alpha, p):.12f} (on the boundary)")

    # the closed form should dominate a dense boundary sample
    rng = np.random.default_rng(0)
    if p == "l2":
        u = rng.standard_normal((100_000, 2))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
    else:
        u = rng.uniform(-1, 1, (100_000, 2))
        u[np.arange(100_000), rng.integers(0, 2, 100_000)] = np.where(
            rng.uniform(size=100_000) < 0.5, -1.0, 1.0
        )
    best_sampled = ((S.epsilon * alpha * u) @ g).max()
    print(f"   best of 100k sampled boundary points = {best_sampled:.6f} (never above)")

print()
print("== projection pulls an infeasible point back onto the set ==")
v = np.array([3.0, 4.0])
S = ConstraintSet("l2", 1.0, alpha)
pv = project(v, S)
print(f"project {v} -> {np.round(pv, 5)}; ||pv/alpha||_2 = {lp_norm(pv / alpha, 'l2'):.12f}")
print("idempotent:", np.allclose(project(pv, S), pv, atol=1e-12))
print("points already inside come back unchanged:",
      np.array_equal(project(np.array([0.1, 0.1]), S), np.array([0.1, 0.1])))

print()
print("== with all scales at 1 everything reduces to the classical forms ==")
ones = ConstraintSet("l2", 1.0, np.ones(2))
print("fgsm:", fgsm_direction(g, ones), "vs g/||g|| =", g / np.linalg.norm(g))
