#!/usr/bin/env python3
"""The smoothed full-ball problems that define the singular solution.

For a decreasing sequence of smoothing parameters, solves on [0, r_max]
with an origin symmetry condition and tabulates the values at fixed
probes: successive differences contract linearly in epsilon wherever
eps << r^2, which is the Cauchy property standing behind the limit
construction.
"""
import numpy as np

from fdlab import (FlowParams, RegularizationConfig, SolverConfig,
                   build_ball_grid, regularized_initial, solve_regularized)

p = FlowParams(n=5, m=3 / 7, lam=4.0, c1=1.0, c2=1.0)
grid = build_ball_grid(1e-3, 1e3, 1025)
probes = [1e-2, 1e-1, 1.0, 10.0]
idx = [int(np.argmin(np.abs(grid.nodes - rp))) for rp in probes]
eps_family = (0.1, 0.05, 0.025)

print("smoothed initial data at the origin:")
for eps in eps_family:
    rc = RegularizationConfig(eps)
    print(f"  eps={eps:5.3f}: u(0,0) = "
          f"{float(regularized_initial(p, rc, 0.0)):10.2f}")

vals = {}
for eps in eps_family:
    cfg = SolverConfig(dt0=1e-5, t_end=1.0, newton_tol=1e-10)
    tr = solve_regularized(p, RegularizationConfig(eps), grid, cfg,
                           out_times=[1.0])
    vals[eps] = tr.fields[-1].values[idx]
    print(f"solved eps={eps:5.3f}: {len(tr.times) - 1} steps")

print(f"\nvalues at t=1 and probe radii {probes}:")
for eps in eps_family:
    print(f"  eps={eps:5.3f}: " + "  ".join(f"{v:12.6e}" for v in vals[eps]))

da = np.abs(vals[0.1] - vals[0.05])
db = np.abs(vals[0.05] - vals[0.025])
print("\nsuccessive differences and their contraction ratios:")
print("  |u(0.1) - u(0.05)|  : " + "  ".join(f"{v:12.4e}" for v in da))
print("  |u(0.05) - u(0.025)|: " + "  ".join(f"{v:12.4e}" for v in db))
print("  ratios              : " + "  ".join(f"{v:12.2f}" for v in da / db))
print("\nratios ~2 mark the linear-in-eps regime (eps << r^2); at the")
print("smallest probe the smoothing still dominates at these eps values")
print("and the contraction has not set in yet.")
