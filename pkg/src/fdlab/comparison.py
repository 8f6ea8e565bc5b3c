"""Closed-form supersolution and three-piece weak subsolution.

The supersolution is the initial profile itself (time independent).  The
subsolution is pieced together from

    w_in(r, t)  = c1 * [r^(-m lam) - a(t) r^(-m nu)]_+^(1/m),   r <= rho(t)
    w_out(r, t) = c1 * b(t)^(1/m) * r^(-mu),          rho(t) < r <= sigma(t)
    c2,                                                       r > sigma(t)

with a(t) = A e^t, rho(t) = (delta/a)^(1/(m(lam-nu))),
b(t) = (1-delta) rho^(m(mu-lam)) and sigma(t) = (c1/c2)^(1/mu) b^(1/(m mu)).
rho and b underflow to zero within a few time units for admissible A, so
every evaluation here is carried out on logarithms; pieces are selected by
log r and values are exponentiated only at the end.

Residual sign checks use the hand-derived space/time derivatives of each
piece; no numerical differentiation is involved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .params import FlowParams, initial_profile

__all__ = [
    "InfeasibleWindow",
    "SubsolutionConfig",
    "SubsolutionState",
    "exponent_windows",
    "minimal_amplitude",
    "pick_admissible_config",
    "supersolution",
    "subsolution",
    "verify_subsolution",
    "sandwich_margins",
]


class InfeasibleWindow(ValueError):
    """No admissible subsolution constants at floating precision."""


@dataclass(frozen=True)
class SubsolutionConfig:
    """Subsolution constants: exponents nu < lam < mu, interface
    fraction delta, and amplitude A > 1."""

    nu: float
    mu: float
    delta: float
    A: float

    def check(self, p: FlowParams):
        """Validate the admissibility window against the problem
        constants; raises InfeasibleWindow on violation."""
        nu_lo, nu_hi, mu_lo, mu_hi = exponent_windows(p)
        if not (nu_lo < self.nu < nu_hi):
            raise InfeasibleWindow(
                f"nu={self.nu} outside ({nu_lo}, {nu_hi})")
        if not (mu_lo < self.mu < mu_hi):
            raise InfeasibleWindow(
                f"mu={self.mu} outside ({mu_lo}, {mu_hi})")
        d_lo = (self.mu - p.lam) / (self.mu - self.nu)
        if not (d_lo < self.delta < 1.0):
            raise InfeasibleWindow(
                f"delta={self.delta} outside ({d_lo}, 1)")
        if not self.A > 1.0:
            raise InfeasibleWindow(f"A={self.A} must exceed 1")
        if not _amplitude_ok(p, self.nu, self.mu, self.delta, self.A):
            raise InfeasibleWindow(f"A={self.A} below the minimal amplitude")


@dataclass(frozen=True)
class SubsolutionState:
    """Derived time functions at one instant.  rho, b and sigma underflow
    for large t; the log fields stay meaningful throughout."""

    a: float
    rho: float
    b: float
    sigma: float
    log_a: float
    log_rho: float
    log_b: float
    log_sigma: float


def exponent_windows(p: FlowParams):
    """(nu_lo, nu_hi, mu_lo, mu_hi): open windows for nu and mu."""
    nu_lo = p.lam - (2.0 / p.m) * ((p.lam / 2.0) * (1.0 - p.m) - 1.0)
    nu_hi = p.lam
    mu_lo = (p.n - 2.0) / p.m
    mu_hi = (2.0 * p.n - 2.0) / p.m
    return nu_lo, nu_hi, mu_lo, mu_hi


def _amplitude_ok(p: FlowParams, nu, mu, delta, A) -> bool:
    """Both amplitude inequalities at given constants (the first is
    skipped for c2 = 0)."""
    # interior-region inequality: c1^(1-m) A (1-delta)^(1/m-1) > n m^2 lam
    lhs2 = ((1.0 - p.m) * math.log(p.c1) + math.log(A)
            + (1.0 / p.m - 1.0) * math.log1p(-delta))
    if lhs2 <= math.log(p.n * p.m ** 2 * p.lam):
        return False
    if p.c2 == 0:
        return True
    # interface-ordering inequality (keeps rho < sigma)
    k = 1.0 / (p.m * (p.lam - nu))
    lhs1 = ((math.log(p.c1) - math.log(p.c2)) / mu
            + math.log1p(-delta) / (p.m * mu)
            + k * ((mu - p.lam) / mu) * math.log(delta)
            + k * (p.lam / mu) * math.log(A))
    rhs1 = k * math.log(delta)
    return lhs1 > rhs1


def minimal_amplitude(p: FlowParams, nu, mu, delta,
                      hi: float = 1e12) -> float:
    """Smallest A in [1, hi] satisfying both amplitude inequalities,
    located by bisection (the predicate is monotone in A)."""
    if _amplitude_ok(p, nu, mu, delta, 1.0):
        return 1.0
    if not _amplitude_ok(p, nu, mu, delta, hi):
        raise InfeasibleWindow(
            f"no admissible amplitude below {hi:.1e} for "
            f"nu={nu}, mu={mu}, delta={delta}")
    lo = 1.0
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if _amplitude_ok(p, nu, mu, delta, mid):
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-12 * hi:
            break
    return hi


def pick_admissible_config(p: FlowParams,
                           margin: float = 0.1) -> SubsolutionConfig:
    """Midpoint exponents, midpoint interface fraction, and the minimal
    amplitude inflated by ``margin``."""
    if p.c1 <= 0:
        raise InfeasibleWindow("subsolution constants require c1 > 0")
    nu_lo, nu_hi, mu_lo, mu_hi = exponent_windows(p)
    if not (nu_lo < nu_hi and mu_lo < mu_hi):
        raise InfeasibleWindow("empty exponent window")
    nu = 0.5 * (nu_lo + nu_hi)
    mu = 0.5 * (mu_lo + mu_hi)
    d_lo = (mu - p.lam) / (mu - nu)
    if not d_lo < 1.0:
        raise InfeasibleWindow("empty interface-fraction window")
    delta = 0.5 * (d_lo + 1.0)
    a_star = minimal_amplitude(p, nu, mu, delta)
    cfg = SubsolutionConfig(nu=nu, mu=mu, delta=delta,
                            A=max((1.0 + margin) * a_star, 1.0 + margin))
    cfg.check(p)
    return cfg


def state_at(p: FlowParams, cfg: SubsolutionConfig,
             t: float) -> SubsolutionState:
    """Derived time functions a, rho, b, sigma at time t (log-exact)."""
    k = 1.0 / (p.m * (p.lam - cfg.nu))
    log_a = math.log(cfg.A) + t
    log_rho = k * (math.log(cfg.delta) - log_a)
    log_b = math.log1p(-cfg.delta) + p.m * (cfg.mu - p.lam) * log_rho
    if p.c2 > 0:
        log_sigma = ((math.log(p.c1) - math.log(p.c2)) / cfg.mu
                     + log_b / (p.m * cfg.mu))
    else:
        log_sigma = math.inf
    return SubsolutionState(
        a=math.exp(log_a), rho=math.exp(log_rho), b=math.exp(log_b),
        sigma=math.exp(log_sigma) if log_sigma < 700 else math.inf,
        log_a=log_a, log_rho=log_rho, log_b=log_b, log_sigma=log_sigma)


def supersolution(p: FlowParams, r, t: float = 0.0):
    """Upper comparison profile: the initial datum, frozen in time."""
    del t
    return initial_profile(p, r)


def _log_w_in(p, cfg, st, log_r):
    """log w_in on r <= rho(t); the bracket r^(-m lam) - a r^(-m nu)
    равно r^(-m lam)(1 - a r^(m(lam-nu))) with a r^(m(lam-nu)) <= delta."""
    z = st.log_a + p.m * (p.lam - cfg.nu) * log_r
    bracket = -p.m * p.lam * log_r + np.log1p(-np.exp(z))
    return math.log(p.c1) + bracket / p.m


def _log_w_out(p, cfg, st, log_r):
    return math.log(p.c1) + st.log_b / p.m - cfg.mu * log_r


def subsolution(p: FlowParams, cfg: SubsolutionConfig, r, t: float):
    """Lower comparison profile at radius r (scalar or array), time t."""
    if p.c1 <= 0:
        raise ValueError("subsolution requires c1 > 0")
    st = state_at(p, cfg, t)
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 0):
        raise ValueError("subsolution requires r > 0")
    log_r = np.log(r_arr)
    out = np.empty_like(log_r)
    inner = log_r <= st.log_rho
    mid = (~inner) & (log_r <= st.log_sigma)
    outer = ~inner & ~mid
    if np.any(inner):
        out[inner] = np.exp(_log_w_in(p, cfg, st, log_r[inner]))
    if np.any(mid):
        out[mid] = np.exp(_log_w_out(p, cfg, st, log_r[mid]))
    if np.any(outer):
        out[outer] = p.c2
    return out if out.shape else float(out)


# --- residual and matching checks -------------------------------------------

def _interior_residual_scaled(p, cfg, st, log_r):
    """(residual, scale) on r < rho(t), both divided by the largest term.

    residual = -T1 + T2 - T3 with
      T1 = (c1/m) a' (r^(-m lam) - a r^(-m nu))^(1/m - 1) r^(-m nu)
      T2 = c1^m m lam (n - 2 - m lam) r^(-m lam - 2)
      T3 = c1^m m nu (n - 2 - m nu) a r^(-m nu - 2)
    all three positive for admissible constants.
    """
    m, lam, n = p.m, p.lam, p.n
    z = st.log_a + m * (lam - cfg.nu) * log_r
    log_bracket = -m * lam * log_r + np.log1p(-np.exp(z))
    log_t1 = (math.log(p.c1 / m) + st.log_a
              + (1.0 / m - 1.0) * log_bracket - m * cfg.nu * log_r)
    log_t2 = (m * math.log(p.c1) + math.log(m * lam * (n - 2.0 - m * lam))
              - (m * lam + 2.0) * log_r)
    log_t3 = (m * math.log(p.c1)
              + math.log(m * cfg.nu * (n - 2.0 - m * cfg.nu))
              + st.log_a - (m * cfg.nu + 2.0) * log_r)
    top = np.maximum.reduce([log_t1, log_t2, log_t3])
    e1, e2, e3 = (np.exp(log_t1 - top), np.exp(log_t2 - top),
                  np.exp(log_t3 - top))
    return -e1 + e2 - e3, e1 + e2 + e3


def _middle_residual_scaled(p, cfg, st, log_r):
    """(residual, scale) on rho(t) < r < sigma(t); both terms are
    nonpositive:
      residual = (c1/m) b^(1/m-1) b' r^(-mu)
                 - c1^m m mu (m mu + 2 - n) b r^(-m mu - 2)
    with b'(t) = -b (mu - lam)/(lam - nu).
    """
    m = p.m
    log_t1 = (math.log(p.c1 / m)
              + math.log((cfg.mu - p.lam) / (p.lam - cfg.nu))
              + st.log_b / m - cfg.mu * log_r)
    log_t2 = (m * math.log(p.c1)
              + math.log(m * cfg.mu * (m * cfg.mu + 2.0 - p.n))
              + st.log_b - (m * cfg.mu + 2.0) * log_r)
    top = np.maximum(log_t1, log_t2)
    e1, e2 = np.exp(log_t1 - top), np.exp(log_t2 - top)
    return -e1 - e2, e1 + e2


def interface_slope_gap(p: FlowParams, cfg: SubsolutionConfig,
                        t: float) -> float:
    """d/dr w_out^m - d/dr w_in^m at r = rho(t), divided by the common
    factor c1^m m rho^(-m lam - 1).  Must be positive (the kink at the
    inner interface points the right way)."""
    st = state_at(p, cfg, t)
    # a rho^(m(lam-nu)) == delta and b rho^(-m mu) == (1-delta) rho^(-m lam)
    slope_in = -p.lam + cfg.nu * math.exp(
        st.log_a + p.m * (p.lam - cfg.nu) * st.log_rho)
    slope_out = -cfg.mu * math.exp(
        st.log_b + p.m * (p.lam - cfg.mu) * st.log_rho)
    return slope_out - slope_in


def outer_interface_slope(p: FlowParams, cfg: SubsolutionConfig,
                          t: float) -> float:
    """d/dr w_out^m at r = sigma(t), divided by c1^m m / sigma; equals
    -mu (c2/c1)^m and must be negative."""
    del t
    return -cfg.mu * math.exp(p.m * (math.log(p.c2) - math.log(p.c1)))


def verify_subsolution(p: FlowParams, cfg: SubsolutionConfig,
                       times, n_radii: int = 12,
                       interface_margin: float = 1e-3,
                       residual_tol: float = 1e-8) -> list[dict]:
    """Sign checks for the subsolution over sampled (r, t).

    Samples each smooth region on a log-radial grid that keeps a
    relative distance ``interface_margin`` from the interfaces, the
    inner region extending six decades below rho(t).  Returns one row
    per check: kind, r, t, quantity, bound, pass; residual quantities
    are scaled by the sum of their term magnitudes, so ``residual_tol``
    is relative.
    """
    cfg.check(p)
    rows = []

    def add(kind, r, t, quantity, bound, ok):
        rows.append({"kind": kind, "r": r, "t": t,
                     "quantity": quantity, "bound": bound,
                     "pass": bool(ok)})

    for t in times:
        st = state_at(p, cfg, t)
        lo_in = st.log_rho - 6.0 * math.log(10.0)
        hi_in = st.log_rho + math.log1p(-interface_margin)
        log_r = np.linspace(lo_in, hi_in, n_radii)
        res, scale = _interior_residual_scaled(p, cfg, st, log_r)
        worst = int(np.argmax(res / scale))
        add("residual_in", math.exp(log_r[worst]), t,
            float(res[worst]), residual_tol * float(scale[worst]),
            np.all(res <= residual_tol * scale))

        if p.c2 > 0:
            lo_mid = st.log_rho + math.log1p(interface_margin)
            hi_mid = st.log_sigma + math.log1p(-interface_margin)
        else:
            lo_mid = st.log_rho + math.log1p(interface_margin)
            hi_mid = lo_mid + 6.0 * math.log(10.0)
        log_r = np.linspace(lo_mid, hi_mid, n_radii)
        res, scale = _middle_residual_scaled(p, cfg, st, log_r)
        worst = int(np.argmax(res / scale))
        add("residual_mid", math.exp(log_r[worst]), t,
            float(res[worst]), residual_tol * float(scale[worst]),
            np.all(res <= residual_tol * scale))

        if p.c2 > 0:
            # constant piece: the residual vanishes identically
            r_out = math.exp(st.log_sigma) if st.log_sigma < 700 else 1.0
            add("residual_out", r_out * 2.0, t, 0.0, 0.0, True)

        gap = interface_slope_gap(p, cfg, t)
        add("match_rho", st.rho, t, gap, 0.0, gap > 0.0)
        if p.c2 > 0:
            slope = outer_interface_slope(p, cfg, t)
            add("match_sigma", st.sigma, t, slope, 0.0, slope < 0.0)

    # initial ordering: the subsolution starts at or below the initial
    # datum (checked as a relative gap at t = 0 across all three pieces)
    st0 = state_at(p, cfg, 0.0)
    anchors = [st0.log_rho - 3 * math.log(10.0),
               st0.log_rho + math.log(0.5)]
    if p.c2 > 0:
        anchors += [0.5 * (st0.log_rho + st0.log_sigma),
                    st0.log_sigma + math.log(2.0), st0.log_sigma + 3.0]
    else:
        anchors += [st0.log_rho + 2.0, st0.log_rho + 5.0]
    for lr in anchors:
        r = math.exp(lr)
        gap = float(subsolution(p, cfg, r, 0.0) / initial_profile(p, r)) - 1.0
        add("init_order", r, 0.0, gap, 1e-12, gap <= 1e-12)
    return rows


def sandwich_margins(p: FlowParams, cfg: SubsolutionConfig, grid_r,
                     values, t: float):
    """(lower_margin, upper_margin) for one stored field: largest
    relative violation of lower <= u and u <= upper, each normalized by
    the supersolution.  Nonpositive margins mean the sandwich holds."""
    upper = initial_profile(p, grid_r)
    lower = subsolution(p, cfg, grid_r, t)
    low_violation = float(np.max((lower - values) / upper))
    high_violation = float(np.max((values - upper) / upper))
    return low_violation, high_violation
