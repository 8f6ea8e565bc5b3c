"""Conformal end geometry of a radial profile: g = u^(4/(n+2)) g_flat.

Reconstructs, per time slice, the signed arc length rho(r) from the unit
sphere, the warped-product profile F = r^2 u^(4/(n+2)), the scalar
curvature, volume-density limits, and power-law fits of both ends:

* outer end: sqrt(F) approaches rho + shift, with F - rho1^2 decaying at
  a rate set by the conformal decay of u;
* inner end: sqrt(F) approaches a cone of slope sqrt(B),
  B = (2 lam/(n+2) - 1)^2, with decay order tau from the same exponents.

End fits avoid a free shift search (a constant offset is itself a perfect
power law, which makes the naive least-squares objective degenerate).
Instead the slope is fitted over a deep anchor window, the shift is read
off at the deepest anchor node where the decaying correction is far below
everything else, and the decay order is then fitted over a shallower
window where the correction is well above rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad

from .grid import RadialField, RadialGrid, RadialOperator
from .params import FlowParams, initial_profile, initial_profile_gradient
from .solver import Trajectory, steady_profile, steady_state_reference

__all__ = [
    "FitUnstable",
    "GeometryProfile",
    "EndFit",
    "flow_time_from_pde",
    "pde_time_from_flow",
    "arc_length_profile",
    "arc_length_from_callable",
    "geometry_profile",
    "completeness_indicator",
    "warping_profile",
    "fit_end_asymptotics",
    "scalar_curvature",
    "yamabe_flow_residual",
    "volume_form_limits",
    "yamabe_constant_sphere",
    "sphere_volume",
    "blowdown_diagnostics",
    "cone_slope_squared",
    "conical_order",
    "euclidean_order",
    "euclidean_shift_reference",
    "conical_shift_reference",
]


class FitUnstable(RuntimeError):
    """Local power-law exponent drifts too much across the fit window."""


def _time_slope(n: int) -> float:
    return (n - 2.0) / ((n - 1.0) * (n + 2.0))


def flow_time_from_pde(t, n: int):
    """Geometric-flow clock given the diffusion clock (slope
    (n-2)/((n-1)(n+2)))."""
    return _time_slope(n) * np.asarray(t, dtype=float)


def pde_time_from_flow(t, n: int):
    """Inverse of ``flow_time_from_pde``."""
    return np.asarray(t, dtype=float) / _time_slope(n)


def cone_slope_squared(n: int, lam: float) -> float:
    """B = ((2/(n+2)) lam - 1)^2, the squared slope of the inner cone."""
    return (2.0 * lam / (n + 2.0) - 1.0) ** 2


def conical_order(n: int, lam: float) -> float:
    """tau = ((n-6) lam/(n+2) + 2) / ((2/(n+2)) lam - 1); negative for
    some admissible (n, lam) with n < 6, in which case the measured
    order is reported and the sign disagreement flagged by the caller."""
    return (((n - 6.0) * lam / (n + 2.0) + 2.0)
            / (2.0 * lam / (n + 2.0) - 1.0))


def euclidean_order(n: int, lam: float) -> float:
    """Decay order of F - rho1^2 at the outer end: (n-2) lam/(n+2) - 2."""
    return (n - 2.0) * lam / (n + 2.0) - 2.0


@dataclass
class GeometryProfile:
    """Arc length, warping, curvature and volume density at one time."""

    time: float
    r: np.ndarray
    rho: np.ndarray
    warping: np.ndarray            # F = r^2 u^(4/(n+2))
    conformal_factor: np.ndarray   # u^(4/(n+2))
    scal: np.ndarray               # interior nodes
    vol_density: np.ndarray        # u^(2n/(n+2))
    inner_length: float            # rho(r_min), negative
    outer_length: float            # rho(r_max)

    def __post_init__(self):
        if np.any(np.diff(self.rho) <= 0):
            raise ValueError("arc length must be strictly increasing")
        if np.any(self.warping <= 0):
            raise ValueError("warping must be positive")


@dataclass
class EndFit:
    """Power-law fit of one end of the warped-product profile."""

    end_id: str                 # "E1" outer | "E2" inner
    fitted_slope: float         # sqrt(B) estimate (1.0 by definition for E1)
    fitted_order: float         # decay order of F - slope^2 rho^2
    fit_residual: float         # rms of the log-log order fit
    shift: float                # rho offset aligning the end coordinate
    ref_slope: float
    ref_order: float
    sign_disagreement: bool = False


def arc_length_profile(field: RadialField, n: int) -> np.ndarray:
    """Signed arc length rho(r) = int_1^r u^(2/(n+2)), trapezoidal on
    the grid nodes, zero at the node r = 1."""
    grid = field.grid
    w = field.values ** (2.0 / (n + 2.0))
    cells = 0.5 * (w[:-1] + w[1:]) * np.diff(grid.nodes)
    rho = np.concatenate([[0.0], np.cumsum(cells)])
    return rho - rho[grid.index_of_unit]


def arc_length_from_callable(fn, grid: RadialGrid, n: int,
                             npts: int = 12) -> np.ndarray:
    """Arc length with per-cell Gauss-Legendre quadrature of fn(r)^(2/(n+2));
    quadrature-exact for smooth closed-form fields, used where trapezoid
    error would contaminate end fits."""
    xg, wg = leggauss(npts)
    a, b = grid.nodes[:-1], grid.nodes[1:]
    mid = 0.5 * (a + b)[:, None]
    half = 0.5 * (b - a)[:, None]
    vals = np.asarray(fn(mid + half * xg[None, :])) ** (2.0 / (n + 2.0))
    cells = (half[:, 0]) * (vals @ wg)
    rho = np.concatenate([[0.0], np.cumsum(cells)])
    return rho - rho[grid.index_of_unit]


def scalar_curvature(field: RadialField, p: FlowParams) -> np.ndarray:
    """Scalar curvature at interior nodes from the conformal potential
    v = u^((n-2)/(n+2)):

        scal = -(4(n-1)/(n-2)) v^(-(n+2)/(n-2)) (v'' + v'/r).
    """
    p.require_geometry_admissible()
    n = p.n
    v = field.values ** ((n - 2.0) / (n + 2.0))
    meridional = RadialOperator(field.grid, 2).apply(v)
    coef = -4.0 * (n - 1.0) / (n - 2.0)
    return coef * v[1:-1] ** (-(n + 2.0) / (n - 2.0)) * meridional


def geometry_profile(field: RadialField, p: FlowParams,
                     rho: np.ndarray | None = None) -> GeometryProfile:
    """Assemble the full geometric description of one time slice."""
    p.require_geometry_admissible()
    n = p.n
    if rho is None:
        rho = arc_length_profile(field, n)
    conf = field.values ** (4.0 / (n + 2.0))
    warping = field.grid.nodes ** 2 * conf
    return GeometryProfile(
        time=field.time, r=field.grid.nodes, rho=rho, warping=warping,
        conformal_factor=conf, scal=scalar_curvature(field, p),
        vol_density=field.values ** (2.0 * n / (n + 2.0)),
        inner_length=float(rho[0]), outer_length=float(rho[-1]))


def warping_profile(field: RadialField, p: FlowParams, shift: float = 0.0):
    """(rho + shift, F) samples of the warped-product representation."""
    rho = arc_length_profile(field, p.n)
    F = field.grid.nodes ** 2 * field.values ** (4.0 / (p.n + 2.0))
    return rho + shift, F


def _linfit(x: np.ndarray, y: np.ndarray):
    mat = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(mat, y, rcond=None)
    rms = float(np.sqrt(np.mean((y - mat @ coef) ** 2)))
    return float(coef[0]), float(coef[1]), rms


def _local_exponent(r: np.ndarray, w: np.ndarray, drift_tol: float = 0.1):
    """Log-log slope over a window plus stability check across halves."""
    x, y = np.log(r), np.log(w)
    slope, _, _ = _linfit(x, y)
    half = len(x) // 2
    s_lo, _, _ = _linfit(x[:half], y[:half])
    s_hi, _, _ = _linfit(x[half:], y[half:])
    if abs(s_lo - s_hi) > drift_tol:
        raise FitUnstable(
            f"local exponent drifts from {s_lo:.3f} to {s_hi:.3f}")
    return slope


def completeness_indicator(field: RadialField, p: FlowParams,
                           boundary_tol: float = 0.01) -> dict:
    """Classify both ends by the local exponent e of the arc-length
    integrand u^(2/(n+2)) ~ r^e.

    The inner length integral diverges (complete end) iff e <= -1; the
    outer iff e >= -1.  Exponents within ``boundary_tol`` of -1 are
    flagged borderline.  Also reports the finite truncated lengths.
    """
    n = p.n
    grid = field.grid
    if grid.has_origin:
        raise ValueError("completeness applies to annulus fields")
    w = field.values ** (2.0 / (n + 2.0))
    rho = arc_length_profile(field, n)
    r = grid.nodes
    out = {}
    for end, mask in (("inner", r <= 10.0 * grid.r_min),
                      ("outer", r >= grid.r_max / 10.0)):
        e = _local_exponent(r[mask], w[mask])
        divergent = e <= -1.0 if end == "inner" else e >= -1.0
        out[end] = {
            "exponent": e,
            "complete": bool(divergent),
            "borderline": abs(e + 1.0) <= boundary_tol,
            "truncated_length": float(rho[0] if end == "inner" else rho[-1]),
        }
    return out


def fit_end_asymptotics(profile: GeometryProfile, end_id: str,
                        p: FlowParams, anchor_window=None,
                        order_window=None, min_anchor_nodes: int = 8,
                        drift_tol: float = 0.15) -> EndFit:
    """Fit slope and decay order of one end of sqrt(F) against the end
    coordinate (rho shifted into [R, inf)).

    E1 (outer): slope fixed at 1; order of F - rho1^2, reference
    (n-2) lam/(n+2) - 2.  E2 (inner): slope -> sqrt(B); order of
    sqrt(F) - slope * rho2 minus one -> tau.

    ``anchor_window``/``order_window`` are (lo, hi) radius intervals;
    defaults: anchor = the boundary decade minus 5 nodes, order window
    two decades further in, where the decaying correction is far above
    float rounding yet still asymptotic.
    """
    p.require_geometry_admissible()
    r, rho, F = profile.r, profile.rho, profile.warping
    sqF = np.sqrt(F)
    r_min, r_max = r[0], r[-1]
    if end_id == "E2":
        anchor_window = anchor_window or (r_min, 10.0 * r_min)
        order_window = order_window or (100.0 * r_min, 1000.0 * r_min)
        ref_slope = math.sqrt(cone_slope_squared(p.n, p.lam))
        ref_order = conical_order(p.n, p.lam)
    elif end_id == "E1":
        anchor_window = anchor_window or (r_max / 10.0, r_max)
        order_window = order_window or (r_max / 10.0 ** 2.5,
                                        r_max / 10.0 ** 1.5)
        ref_slope = 1.0
        ref_order = euclidean_order(p.n, p.lam)
    else:
        raise ValueError(f"unknown end {end_id!r}")

    anchor = (r >= anchor_window[0]) & (r <= anchor_window[1])
    anchor[:6] = False
    anchor[-6:] = False
    order_mask = (r >= order_window[0]) & (r <= order_window[1])
    if anchor.sum() < min_anchor_nodes:
        raise FitUnstable(f"anchor window has {int(anchor.sum())} nodes, "
                          f"need >= {min_anchor_nodes}")
    if order_mask.sum() < min_anchor_nodes:
        raise FitUnstable("order window too small")

    if end_id == "E2":
        slope, _, _ = _linfit(-rho[anchor], sqF[anchor])
        # shift anchored where the correction is deepest
        deep = np.argmin(r[anchor])
        bias = sqF + slope * rho            # slope * shift + correction
        shift = float(bias[anchor][deep] / slope)
        coord = -rho + shift
        dev = sqF - slope * coord
    else:
        slope = 1.0
        deep = np.argmax(r[anchor])
        bias = sqF - rho
        shift = float(bias[anchor][deep])
        coord = rho + shift
        dev = F - coord ** 2

    ow = order_mask & (np.abs(dev) > 0) & (coord > 0)
    x, y = np.log(coord[ow]), np.log(np.abs(dev[ow]))
    log_slope, _, rms = _linfit(x, y)
    half = len(x) // 2
    s_lo = _linfit(x[:half], y[:half])[0]
    s_hi = _linfit(x[half:], y[half:])[0]
    if abs(s_lo - s_hi) > drift_tol * max(1.0, abs(log_slope)):
        raise FitUnstable(f"order fit drifts: {s_lo:.3f} vs {s_hi:.3f}")

    if end_id == "E2":
        fitted_order = -log_slope - 1.0     # sqrt deviation ~ coord^-(tau+1)
    else:
        fitted_order = -log_slope
    return EndFit(end_id=end_id, fitted_slope=float(slope),
                  fitted_order=float(fitted_order), fit_residual=rms,
                  shift=shift, ref_slope=ref_slope, ref_order=ref_order,
                  sign_disagreement=(ref_order <= 0.0) != (fitted_order <= 0.0))


def yamabe_flow_residual(tr: Trajectory) -> list[tuple[float, float]]:
    """Max relative defect of the discrete flow equation at interior
    stored times: centered time derivative minus the radial diffusion
    operator applied to u^m, divided by u.  Needs >= 3 stored times."""
    if len(tr.times) < 3:
        raise ValueError("need at least 3 stored times")
    p = tr.params
    op = RadialOperator(tr.grid, p.n)
    out = []
    for k in range(1, len(tr.times) - 1):
        h1 = tr.times[k] - tr.times[k - 1]
        h2 = tr.times[k + 1] - tr.times[k]
        u0, u1, u2 = (tr.fields[k - 1].values, tr.fields[k].values,
                      tr.fields[k + 1].values)
        dudt = ((h1 ** 2 * u2 + (h2 ** 2 - h1 ** 2) * u1 - h2 ** 2 * u0)
                / (h1 * h2 * (h1 + h2)))
        lap = op.apply(u1 ** p.m)
        resid = np.abs(dudt[1:-1] - lap) / u1[1:-1]
        out.append((tr.times[k], float(resid.max())))
    return out


def volume_form_limits(field: RadialField, p: FlowParams):
    """(inner, outer) extrapolated limits of the scaled volume density.

    Inner: r^(2 n lam/(n+2)) u^(2n/(n+2)) over the innermost decade,
    regressed against r^(m lam) (the leading correction of the initial
    profile) and read off at r = 0; compares to c1^(2n/(n+2)).  Outer:
    u^(2n/(n+2)) against r^(-m lam), compares to c2^(2n/(n+2))."""
    p.require_geometry_admissible()
    n = p.n
    r = field.grid.nodes
    dens = field.values ** (2.0 * n / (n + 2.0))
    inner = r <= 10.0 * field.grid.r_min
    outer = r >= field.grid.r_max / 10.0
    q_in = r[inner] ** (2.0 * n * p.lam / (n + 2.0)) * dens[inner]
    _, b_in, _ = _linfit(r[inner] ** (p.m * p.lam), q_in)
    _, b_out, _ = _linfit(r[outer] ** (-p.m * p.lam), dens[outer])
    return float(b_in), float(b_out)


def sphere_volume(n: int) -> float:
    """Volume of the unit n-sphere, 2 pi^((n+1)/2) / Gamma((n+1)/2),
    with the half-integer Gamma values taken from the factorial
    recurrences (exact, no numerical Gamma)."""
    if n < 1:
        raise ValueError("need n >= 1")
    k2 = n + 1  # Gamma(k2 / 2)
    if k2 % 2 == 0:
        gamma = float(math.factorial(k2 // 2 - 1))
    else:
        j = (k2 - 1) // 2
        gamma = (math.factorial(2 * j) * math.sqrt(math.pi)
                 / (4.0 ** j * math.factorial(j)))
    return 2.0 * math.pi ** ((n + 1) / 2.0) / gamma


def yamabe_constant_sphere(n: int) -> float:
    """n(n-1) Vol(S^n)^(2/n), the constant conformal energy level of
    the punctured flat space for every time slice."""
    if n < 3:
        raise ValueError("need n >= 3")
    return n * (n - 1.0) * sphere_volume(n) ** (2.0 / n)


def blowdown_diagnostics(tr: Trajectory, window: tuple[float, float]
                         ) -> list[dict]:
    """Flatness metrics of the solution on a compact window, per stored
    time, against the truncated steady state (the harmonic-in-u^m
    profile through the pinned boundary values)."""
    ra, rb = window
    grid = tr.grid
    if not (grid.r_min < ra < rb < grid.r_max):
        raise ValueError("window must lie strictly inside the grid")
    p = tr.params
    r = grid.nodes
    mask = (r >= ra) & (r <= rb)
    mask_i = mask[1:-1]
    op = RadialOperator(grid, p.n)
    alpha, beta = steady_state_reference(p, grid)
    w_ref = steady_profile(p, alpha, beta, r[mask])
    rows = []
    for t, f in zip(tr.times, tr.fields):
        u = f.values
        du = op.gradient(u)
        d2u = op.second_derivative(u)
        rows.append({
            "t": t,
            "max_dev": float(np.abs(u[mask] - p.c2).max()),
            "max_grad": float(np.abs(du[mask_i]).max()),
            "max_curv": float(np.abs(d2u[mask_i]).max()),
            "steady_dev": float((np.abs(u[mask] - w_ref) / w_ref).max()),
        })
    return rows


# --- closed-form shift integrals (initial-slice cross checks) ---------------

def euclidean_shift_reference(p: FlowParams) -> float:
    """Outer-end shift from the arc-length tail integral of the initial
    profile; cross-checks the fitted shift at time zero."""
    p.require_geometry_admissible()
    n = p.n

    def tail(rr):
        return (-2.0 / (n + 2.0)) * rr \
            * initial_profile(p, rr) ** (-n / (n + 2.0)) \
            * initial_profile_gradient(p, rr)

    val, _ = quad(tail, 1.0, np.inf, limit=200)
    return float(initial_profile(p, 1.0) ** (2.0 / (n + 2.0)) - val)


def conical_shift_reference(p: FlowParams) -> float:
    """Inner-end shift from the arc-length integral toward the origin."""
    p.require_geometry_admissible()
    n = p.n

    def head(rr):
        u0 = initial_profile(p, rr)
        return (2.0 / (n + 2.0)) * u0 ** (-n / (n + 2.0)) \
            * (p.lam * u0 + rr * initial_profile_gradient(p, rr))

    val, _ = quad(head, 0.0, 1.0, limit=200)
    scale = 1.0 / (1.0 - 2.0 * p.lam / (n + 2.0))
    return float(scale * (-initial_profile(p, 1.0) ** (2.0 / (n + 2.0))
                          + val))


# --- CSV interchange ---------------------------------------------------------

def _fmt(x: float) -> str:
    return f"{x:.17g}"


def export_geometry(profiles: list[GeometryProfile], path):
    """Rows ``t,r,rho,F,scal,vol_density`` (interior nodes only, where
    the curvature stencil is defined)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,r,rho,F,scal,vol_density\n")
        for prof in profiles:
            for i in range(1, len(prof.r) - 1):
                fh.write(",".join(_fmt(x) for x in (
                    prof.time, prof.r[i], prof.rho[i], prof.warping[i],
                    prof.scal[i - 1], prof.vol_density[i])) + "\n")


def export_end_fits(rows: list[tuple[float, EndFit]], path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,end,slope,order,ref_slope,ref_order,residual\n")
        for t, fit in rows:
            fh.write(f"{_fmt(t)},{fit.end_id},{_fmt(fit.fitted_slope)},"
                     f"{_fmt(fit.fitted_order)},{_fmt(fit.ref_slope)},"
                     f"{_fmt(fit.ref_order)},{_fmt(fit.fit_residual)}\n")


def export_blowdown(rows: list[dict], path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,max_dev,max_grad,max_curv,steady_dev\n")
        for row in rows:
            fh.write(",".join(_fmt(row[k]) for k in
                              ("t", "max_dev", "max_grad", "max_curv",
                               "steady_dev")) + "\n")
