"""Implicit time integration of du/dt = Lap(u^m) in radial form.

Two problem setups share one core:

* truncated annulus with both ends pinned at the initial profile
  (``solve``), the discrete stand-in for the singular punctured-space
  problem;
* full ball with a zero-slope symmetry condition at the origin and the
  smoothed initial datum (``solve_regularized``).

Each step solves the theta-weighted implicit system with a damped Newton
iteration on a tridiagonal Jacobian.  Residuals are measured relative to
the step-start field, which spans many decades; the damping halves the
update until it is positive and the residual norm drops.  Step sizes grow
geometrically after easy steps and halve after Newton failures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .comparison import (SubsolutionConfig, pick_admissible_config,
                         sandwich_margins)
from .grid import RadialField, RadialGrid, RadialOperator
from .params import FlowParams, RegularizationConfig, initial_profile, \
    regularized_initial

__all__ = [
    "NewtonDivergence",
    "PositivityLoss",
    "SolverConfig",
    "Trajectory",
    "step",
    "solve",
    "solve_regularized",
    "verify_theorem_clauses",
    "steady_state_reference",
    "steady_profile",
    "clause_windows",
    "export_trajectory",
    "import_trajectory",
    "MONO_TOL",
]

# relative tolerance granted to discrete radial monotonicity of solver
# output; Newton rounding can produce violations at this level
MONO_TOL = 1e-10

MIN_DT_SHRINK = 2.0 ** -20


class NewtonDivergence(RuntimeError):
    """Residual would not drop below tolerance within the iteration cap."""


class PositivityLoss(RuntimeError):
    """No positive iterate found along the Newton direction."""


class _LineSearchStall(Exception):
    """Internal: no damping factor reduced the residual."""

    def __init__(self, u, res):
        super().__init__(f"stalled at {res:.3e}")
        self.u = u
        self.res = res


@dataclass(frozen=True)
class SolverConfig:
    """Time-stepping parameters.

    theta = 1 is backward Euler (default; unconditionally damping for
    this stiff problem), theta = 1/2 the trapezoidal variant for
    accuracy studies.  dt grows by ``step_growth`` after steps that
    converge in at most eight Newton iterations and halves after
    failures; ``dt_cap`` defaults to t_end/64.  ``step_growth = 1``
    gives a fixed step for convergence studies.
    """

    dt0: float
    t_end: float
    theta: float = 1.0
    newton_tol: float = 1e-12
    newton_max: int = 30
    step_growth: float = 1.2
    dt_cap: float | None = None

    def __post_init__(self):
        if self.dt0 <= 0 or self.t_end <= 0 or self.newton_tol <= 0:
            raise ValueError("dt0, t_end, newton_tol must be positive")
        if not (0.5 <= self.theta <= 1.0):
            raise ValueError("theta must lie in [1/2, 1]")
        if self.step_growth < 1.0:
            raise ValueError("step_growth must be >= 1")

    @property
    def effective_dt_cap(self) -> float:
        return self.dt_cap if self.dt_cap is not None else self.t_end / 64.0


@dataclass
class Trajectory:
    """Time-stamped sequence of fields produced by one run."""

    params: FlowParams
    grid: RadialGrid
    times: list[float]
    fields: list[RadialField]
    bc_kind: str  # "pinned-initial" | "origin-neumann"
    sub_cfg: SubsolutionConfig | None = None
    sandwich: list[tuple[float, float, float]] = field(default_factory=list)

    def values_at(self, i: int) -> np.ndarray:
        return self.fields[i].values


class _ImplicitScheme:
    """Newton machinery for one grid/params pair."""

    def __init__(self, p: FlowParams, grid: RadialGrid, cfg: SolverConfig):
        self.p, self.grid, self.cfg = p, grid, cfg
        self.op = RadialOperator(grid, p.n)
        self.origin = grid.has_origin
        if self.origin:
            self.c0 = 2.0 * p.n / grid.nodes[1] ** 2
        self.newton_iters: list[int] = []

    def _lap(self, phi: np.ndarray) -> np.ndarray:
        """Laplacian at unknown rows (origin row first on ball grids)."""
        interior = self.op.apply(phi)
        if self.origin:
            l0 = self.c0 * (phi[1] - phi[0])
            return np.concatenate([[l0], interior])
        return interior

    def _unknowns(self, u: np.ndarray) -> slice:
        return slice(0, -1) if self.origin else slice(1, -1)

    def _rounding_floor(self, phi: np.ndarray, scale: np.ndarray,
                        dt: float) -> float:
        """Estimated rounding floor of the relative residual: evaluating
        dt * L(phi) cancels terms of this magnitude."""
        cancel = self.op.cancellation_scale(phi)
        if self.origin:
            origin_row = self.c0 * (abs(phi[0]) + abs(phi[1]))
            cancel = np.concatenate([[origin_row], cancel])
        return float(8.0 * 2.3e-16 * dt * self.cfg.theta
                     * np.max(cancel / scale))

    def step(self, u_old: np.ndarray, dt: float) -> np.ndarray:
        p, cfg = self.p, self.cfg
        sl = self._unknowns(u_old)
        scale = np.abs(u_old[sl])
        explicit = (1.0 - cfg.theta) * self._lap(u_old ** p.m)
        # no iteration can push the residual below the rounding floor
        # of its own evaluation, so the floor caps the tolerance
        tol_eff = max(cfg.newton_tol,
                      self._rounding_floor(u_old ** p.m, scale, dt))

        def residual(u_full):
            lap = cfg.theta * self._lap(u_full ** p.m) + explicit
            F = u_full[sl] - u_old[sl] - dt * lap
            return F, float(np.max(np.abs(F) / scale))

        u_new = u_old.copy()
        F, res = residual(u_new)
        for it in range(cfg.newton_max):
            if res < tol_eff:
                self.newton_iters.append(it)
                return u_new
            delta = self._newton_update(u_new, dt, F)
            try:
                u_new, F, res = self._damped_accept(u_new, sl, delta,
                                                    res, residual, tol_eff)
            except _LineSearchStall as stall:
                # no damping factor made progress: noise asymmetry right
                # at the floor, or true divergence
                if stall.res <= 10.0 * tol_eff:
                    self.newton_iters.append(it + 1)
                    return stall.u
                raise NewtonDivergence(
                    f"line search stalled at residual {stall.res:.3e} "
                    f"above floor {tol_eff:.3e} (dt={dt:.3e})") from None
        raise NewtonDivergence(f"residual {res:.3e} after "
                               f"{cfg.newton_max} iterations (dt={dt:.3e})")

    def _newton_update(self, u_new, dt, F):
        p, cfg = self.p, self.cfg
        dphi = p.m * u_new ** (p.m - 1.0)
        w = dt * cfg.theta
        nn = len(F)
        ab = np.zeros((3, nn))
        op = self.op
        if self.origin:
            ab[1, 0] = 1.0 + w * self.c0 * dphi[0]
            ab[0, 1] = -w * self.c0 * dphi[1]
            ab[1, 1:] = 1.0 - w * op.di * dphi[1:-1]
            ab[0, 2:] = -w * op.up[:-1] * dphi[2:-1]
            ab[2, 0] = -w * op.lo[0] * dphi[0]
            ab[2, 1:-1] = -w * op.lo[1:] * dphi[1:-2]
        else:
            ab[1, :] = 1.0 - w * op.di * dphi[1:-1]
            ab[0, 1:] = -w * op.up[:-1] * dphi[2:-1]
            ab[2, :-1] = -w * op.lo[1:] * dphi[1:-2]
        return solve_banded((1, 1), ab, -F)

    def _damped_accept(self, u_new, sl, delta, res, residual, tol_eff):
        """Halve the update until it keeps positivity and shrinks the
        residual.  Raises _LineSearchStall (carrying the best tie) when
        no damping gives progress, PositivityLoss when no damping gives
        a positive iterate."""
        base = u_new[sl].copy()
        lam = 1.0
        best = None
        found_positive = False
        for _ in range(50):
            trial = base + lam * delta
            if np.all(trial > 0.0):
                found_positive = True
                u_try = u_new.copy()
                u_try[sl] = trial
                F_try, res_try = residual(u_try)
                if best is None or res_try < best[2]:
                    best = (u_try, F_try, res_try)
                if (res_try <= res * (1.0 - 1e-4 * lam)
                        or res_try < tol_eff):
                    return u_try, F_try, res_try
            lam *= 0.5
        if not found_positive:
            raise PositivityLoss("no positive iterate along the update")
        raise _LineSearchStall(best[0], best[2])


def _run(scheme: _ImplicitScheme, u0: np.ndarray,
         out_times) -> tuple[list[float], list[np.ndarray]]:
    cfg = scheme.cfg
    requested = [] if out_times is None else list(out_times)
    targets = sorted({float(t) for t in requested
                      if 0.0 < t <= cfg.t_end} | {cfg.t_end})
    times = [0.0]
    states = [u0.copy()]
    t, dt = 0.0, cfg.dt0
    shrink_floor = cfg.dt0 * MIN_DT_SHRINK
    nxt = 0
    while nxt < len(targets):
        target = targets[nxt]
        dt_use = min(dt, cfg.effective_dt_cap)
        hits_target = dt_use >= (target - t) * (1.0 - 1e-12)
        if hits_target:
            dt_use = target - t
        try:
            u_new = scheme.step(states[-1], dt_use)
        except (NewtonDivergence, PositivityLoss) as exc:
            dt *= 0.5
            if dt < shrink_floor:
                raise type(exc)(f"{exc} [t={t:.6g}]") from exc
            continue
        t = target if hits_target else t + dt_use
        if hits_target:
            nxt += 1
        times.append(t)
        states.append(u_new)
        if scheme.newton_iters[-1] <= 8:
            dt = min(dt * cfg.step_growth, cfg.effective_dt_cap)
    return times, states


def step(u: RadialField, dt: float, cfg: SolverConfig,
         p: FlowParams) -> RadialField:
    """Advance one implicit step with both ends held at u's boundary
    values.  Raises NewtonDivergence / PositivityLoss on failure; the
    caller is expected to halve dt and retry."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    scheme = _ImplicitScheme(p, u.grid, cfg)
    values = scheme.step(u.values, dt)
    return RadialField(u.grid, values, time=u.time + dt, mono_tol=None)


def solve(p: FlowParams, grid: RadialGrid, cfg: SolverConfig,
          out_times=None, sub_cfg: SubsolutionConfig | None = None,
          check_sandwich: bool = True) -> Trajectory:
    """Integrate the pinned-annulus problem from the initial profile.

    Both boundary values stay at their initial-profile values for all
    times.  Every stored field is checked against the closed-form
    comparison pair when ``check_sandwich`` is set (skipped for c1 = 0,
    where the trajectory is constant and the subsolution degenerates).
    """
    if grid.has_origin:
        raise ValueError("solve expects an annulus grid; "
                         "use solve_regularized for ball grids")
    if grid.size < 16:
        raise ValueError("production solves need N >= 16")
    u0 = initial_profile(p, grid.nodes)
    if p.c1 == 0.0:
        # constant initial data is an exact steady state
        requested = [] if out_times is None else list(out_times)
        times = [0.0] + sorted({float(t) for t in requested
                                if 0 < t <= cfg.t_end} | {cfg.t_end})
        fields = [RadialField(grid, u0, time=t, mono_tol=MONO_TOL)
                  for t in times]
        return Trajectory(p, grid, times, fields, "pinned-initial")
    scheme = _ImplicitScheme(p, grid, cfg)
    times, states = _run(scheme, u0, out_times)
    fields = [RadialField(grid, v, time=t, mono_tol=MONO_TOL)
              for t, v in zip(times, states)]
    tr = Trajectory(p, grid, times, fields, "pinned-initial")
    if check_sandwich:
        tr.sub_cfg = sub_cfg or pick_admissible_config(p)
        tr.sandwich = [
            (t, *sandwich_margins(p, tr.sub_cfg, grid.nodes, f.values, t))
            for t, f in zip(times, fields)]
    return tr


def solve_regularized(p: FlowParams, rc: RegularizationConfig,
                      grid: RadialGrid, cfg: SolverConfig,
                      out_times=None) -> Trajectory:
    """Integrate the smoothed full-ball problem: zero-slope symmetry at
    the origin, outer end pinned at the smoothed initial value."""
    if not grid.has_origin:
        raise ValueError("solve_regularized expects a ball grid")
    u0 = regularized_initial(p, rc, grid.nodes)
    scheme = _ImplicitScheme(p, grid, cfg)
    times, states = _run(scheme, u0, out_times)
    fields = [RadialField(grid, v, time=t, mono_tol=MONO_TOL)
              for t, v in zip(times, states)]
    return Trajectory(p, grid, times, fields, "origin-neumann")


# --- steady-state oracle -----------------------------------------------------

def steady_state_reference(p: FlowParams, grid: RadialGrid):
    """(alpha, beta) with w^m = alpha + beta r^(2-n) matching the pinned
    boundary values; the exact steady state of the truncated problem."""
    r0, r1 = grid.r_min, grid.r_max
    b0 = initial_profile(p, r0) ** p.m
    b1 = initial_profile(p, r1) ** p.m
    mat = np.array([[1.0, r0 ** (2.0 - p.n)], [1.0, r1 ** (2.0 - p.n)]])
    alpha, beta = np.linalg.solve(mat, [b0, b1])
    return float(alpha), float(beta)


def steady_profile(p: FlowParams, alpha: float, beta: float, r):
    return (alpha + beta * np.asarray(r, dtype=float) ** (2.0 - p.n)) \
        ** (1.0 / p.m)


# --- theorem-clause verification ---------------------------------------------

DEFAULT_CLAUSE_TOLS = {"i": 1e-8, "ii": 1e-8, "iii": 0.02,
                       "iv": 0.05, "v": 0.02}
BOUNDARY_EXCLUDE = 5


def clause_windows(grid: RadialGrid, exclude: int = BOUNDARY_EXCLUDE):
    """(inner, outer) node masks: innermost / outermost decade minus the
    ``exclude`` boundary-adjacent nodes (pinned ends are trivially
    exact, so they are not evidence)."""
    r = grid.nodes
    inner = (r >= grid.r_min) & (r <= 10.0 * grid.r_min)
    inner[:exclude + 1] = False
    outer = (r >= grid.r_max / 10.0) & (r <= grid.r_max)
    outer[len(r) - exclude - 1:] = False
    return inner, outer


def verify_theorem_clauses(tr: Trajectory, tolerances: dict | None = None,
                           exclude: int = BOUNDARY_EXCLUDE) -> list[dict]:
    """Per-time metrics for the five qualitative solution properties.

    i   largest positive radial log-slope (r u'/u); must vanish
    ii  largest positive relative decay rate between stored times
    iii relative deviation of r^lam u from c1 on the inner window
    iv  relative deviation of r^(lam+1) u' from -c1 lam on the window
    v   relative deviation of u from c2 on the outer window

    Rows: {t, clause, metric, tolerance, pass}.
    """
    p = tr.params
    if p.c1 <= 0 or p.c2 <= 0:
        raise ValueError("clause metrics need c1 > 0 and c2 > 0")
    tols = dict(DEFAULT_CLAUSE_TOLS)
    if tolerances:
        tols.update(tolerances)
    grid = tr.grid
    op = RadialOperator(grid, p.n)
    inner, outer = clause_windows(grid, exclude)
    inner_i = inner[1:-1]
    r = grid.nodes
    ri = r[1:-1]
    rows = []

    def add(t, clause, metric):
        rows.append({"t": t, "clause": clause, "metric": metric,
                     "tolerance": tols[clause], "pass": metric <= tols[clause]})

    for idx, (t, f) in enumerate(zip(tr.times, tr.fields)):
        u = f.values
        du = op.gradient(u)
        add(t, "i", float(np.max(du * ri / u[1:-1], initial=0.0)
                          if len(ri) else 0.0))
        if idx > 0:
            dt = t - tr.times[idx - 1]
            rate = (u - tr.fields[idx - 1].values) / dt
            add(t, "ii", float(np.max(rate / np.abs(u), initial=0.0)))
        add(t, "iii", float(np.max(
            np.abs(r[inner] ** p.lam * u[inner] - p.c1) / p.c1)))
        add(t, "iv", float(np.max(
            np.abs(ri[inner_i] ** (p.lam + 1.0) * du[inner_i] + p.c1 * p.lam)
            / (p.c1 * p.lam))))
        add(t, "v", float(np.max(np.abs(u[outer] - p.c2) / p.c2)))
    return rows


# --- CSV interchange ---------------------------------------------------------

def _fmt(x: float) -> str:
    return f"{x:.17g}"


def export_trajectory(tr: Trajectory, path, stride: int = 1):
    """Write ``t,r,u`` rows, times thinned to every ``stride``-th stored
    stamp but always keeping the first and last."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    keep = sorted(set(range(0, len(tr.times), stride))
                  | {0, len(tr.times) - 1})
    r = tr.grid.nodes
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,r,u\n")
        for i in keep:
            t = tr.times[i]
            u = tr.fields[i].values
            for rj, uj in zip(r, u):
                fh.write(f"{_fmt(t)},{_fmt(rj)},{_fmt(uj)}\n")


def import_trajectory(path, p: FlowParams, grid: RadialGrid,
                      bc_kind: str = "pinned-initial") -> Trajectory:
    """Rebuild a trajectory from a ``t,r,u`` file against a known grid.

    The radii of every time block must match the grid nodes exactly
    (as printed with 17 significant digits)."""
    times: list[float] = []
    blocks: list[list[float]] = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "t,r,u":
            raise ValueError(f"unexpected trajectory header {header!r}")
        for line in fh:
            st, sr, su = line.rstrip("\n").split(",")
            t, rv, uv = float(st), float(sr), float(su)
            if not times or t != times[-1]:
                times.append(t)
                blocks.append([])
            expected = grid.nodes[len(blocks[-1])]
            if not math.isclose(rv, expected, rel_tol=1e-12, abs_tol=1e-300):
                raise ValueError(
                    f"radius {rv!r} at t={t!r} does not match grid node "
                    f"{expected!r}")
            blocks[-1].append(uv)
    fields = [RadialField(grid, np.asarray(b), time=t, mono_tol=None)
              for t, b in zip(times, blocks)]
    return Trajectory(p, grid, times, fields, bc_kind)


def export_clause_report(rows, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,clause,metric,tolerance,pass\n")
        for row in rows:
            fh.write(f"{_fmt(row['t'])},{row['clause']},"
                     f"{_fmt(row['metric'])},{_fmt(row['tolerance'])},"
                     f"{str(row['pass']).lower()}\n")
