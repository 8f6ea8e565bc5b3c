#!/usr/bin/env python3
"""Portrait of the singular flow: monotone decay, pinned singularity,
and the slow collapse to the truncated steady state.

Solves the n=5 reference problem on a reduced grid and prints, per
stored decade of time, the five qualitative solution metrics plus the
blow-down window diagnostics.
"""
import numpy as np

from fdlab import (FlowParams, SolverConfig, build_grid, solve,
                   steady_profile, steady_state_reference,
                   verify_theorem_clauses)
from fdlab.geometry import blowdown_diagnostics

p = FlowParams(n=5, m=3 / 7, lam=4.0, c1=1.0, c2=1.0)
grid = build_grid(1e-3, 1e3, 768)
cfg = SolverConfig(dt0=1e-4, t_end=10.0)

print(f"solving on [{grid.r_min:g}, {grid.r_max:g}] with N={grid.size} "
      f"to t={cfg.t_end:g} ...")
tr = solve(p, grid, cfg, out_times=np.geomspace(0.01, 10.0, 13))

rows = verify_theorem_clauses(tr)
by_time = {}
for row in rows:
    by_time.setdefault(row["t"], {})[row["clause"]] = row["metric"]

blow = {r["t"]: r for r in blowdown_diagnostics(tr, (0.5, 2.0))}

print(f"\n{'t':>8}  {'radial+':>9}  {'time+':>9}  {'inner dev':>9}  "
      f"{'grad dev':>9}  {'outer dev':>9}  {'|u-c2| win':>10}  "
      f"{'steady gap':>10}")
picks = [t for t in tr.times if t in blow][::8] + [tr.times[-1]]
for t in dict.fromkeys(picks):
    c = by_time[t]
    b = blow[t]
    print(f"{t:8.3f}  {c['i']:9.1e}  {c.get('ii', 0.0):9.1e}  "
          f"{c['iii']:9.3f}  {c['iv']:9.3f}  {c['v']:9.1e}  "
          f"{b['max_dev']:10.3e}  {b['steady_dev']:10.3e}")

alpha, beta = steady_state_reference(p, grid)
w1 = steady_profile(p, alpha, beta, 1.0)
print(f"\ntruncated steady state at r=1: {w1:.6f} "
      f"(u0(1) = {tr.fields[0].values[grid.index_of_unit]:.4f})")
print("the singular end is pinned; every interior node decays toward the")
print("harmonic-in-u^m profile, so the inner power-law window erodes on an")
print("O(1) time scale while the compact window flattens monotonically.")
