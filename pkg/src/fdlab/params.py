"""Problem constants, initial data, and the admissibility window.

The model problem is the radial fast diffusion equation du/dt = Lap(u^m)
on the punctured space, with singular initial data

    u0(r) = (c1^m r^(-m*lambda) + c2^m)^(1/m),

posed for 0 < m < (n-2)/n and 2/(1-m) < lambda < (n-2)/m (both strict).
All power evaluations run in log space: u0 spans many decades over a
typical radial grid and r^(-m*lambda) overflows naively for r ~ 1e-6.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ConfigError",
    "FlowParams",
    "RegularizationConfig",
    "critical_exponent",
    "initial_profile",
    "initial_profile_gradient",
    "regularized_initial",
    "parse_config",
]

# slack for the open-window checks; the admissibility window is open, so
# boundary values are rejected, but only beyond float rounding
VALIDATION_SLACK = 1e-12


class ConfigError(ValueError):
    """Raised for invalid problem constants or malformed config input."""


def critical_exponent(n: int) -> float:
    """Diffusion exponent (n-2)/(n+2) at which the equation is the
    conformally flat Yamabe flow; lies in (0, (n-2)/n) for n >= 3.
    """
    if n < 3:
        raise ConfigError(f"spatial dimension must be >= 3, got {n}")
    return (n - 2.0) / (n + 2.0)


@dataclass(frozen=True)
class FlowParams:
    """Problem constants for the singular fast diffusion problem.

    Attributes
    ----------
    n : int
        Spatial dimension, n >= 3.
    m : float
        Diffusion exponent, 0 < m < (n-2)/n.
    lam : float
        Decay exponent of the singular initial profile,
        2/(1-m) < lam < (n-2)/m.
    c1 : float
        Inner amplitude (r -> 0), c1 >= 0.  c1 = 0 degenerates to the
        constant solution u == c2 and is refused by operations that
        need the singular end.
    c2 : float
        Outer amplitude (r -> infinity), c2 >= 0.
    """

    n: int
    m: float
    lam: float
    c1: float
    c2: float

    def __post_init__(self):
        if self.n < 3:
            raise ConfigError(f"n must be >= 3, got {self.n}")
        if self.c1 < 0 or self.c2 < 0:
            raise ConfigError("amplitudes c1, c2 must be >= 0")
        if self.c1 == 0 and self.c2 == 0:
            raise ConfigError("c1 and c2 cannot both vanish")
        s = VALIDATION_SLACK
        if not (s < self.m < (self.n - 2) / self.n - s):
            raise ConfigError(
                f"m={self.m} outside the open window (0, (n-2)/n)="
                f"(0, {(self.n - 2) / self.n})")
        lo = 2.0 / (1.0 - self.m)
        hi = (self.n - 2.0) / self.m
        if not (lo + s < self.lam < hi - s):
            raise ConfigError(
                f"lambda={self.lam} outside the open window "
                f"(2/(1-m), (n-2)/m)=({lo}, {hi})")

    @property
    def is_critical(self) -> bool:
        """True when m equals the Yamabe-flow exponent (n-2)/(n+2)."""
        return abs(self.m - critical_exponent(self.n)) <= VALIDATION_SLACK

    def require_geometry_admissible(self):
        """Geometry operations need m critical, c2 > 0 and c1 > 0."""
        if not self.is_critical:
            raise ConfigError(
                f"geometry requires the critical exponent m=(n-2)/(n+2)="
                f"{critical_exponent(self.n)}, got m={self.m}")
        if self.c2 <= 0:
            raise ConfigError("geometry requires c2 > 0")
        if self.c1 <= 0:
            raise ConfigError("geometry requires c1 > 0")


@dataclass(frozen=True)
class RegularizationConfig:
    """Regularization parameter for the smoothed full-space problem."""

    epsilon: float

    def __post_init__(self):
        if not (0.0 < self.epsilon < 1.0):
            raise ConfigError(
                f"epsilon must lie in (0, 1), got {self.epsilon}")


def _sum_powers_log(log_terms) -> np.ndarray:
    """exp-sum of log-space terms, overflow safe: log(sum exp(t_i))."""
    stacked = np.broadcast_arrays(*log_terms)
    big = np.maximum.reduce(stacked)
    acc = sum(np.exp(t - big) for t in stacked)
    return big + np.log(acc)


def initial_profile(p: FlowParams, r) -> np.ndarray | float:
    """Singular initial datum u0(r) = (c1^m r^(-m lam) + c2^m)^(1/m).

    Strictly positive, and strictly decreasing in r when c1 > 0.
    Rejects r <= 0.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("initial_profile requires r > 0")
    terms = []
    if p.c1 > 0:
        terms.append(p.m * (math.log(p.c1) - p.lam * np.log(r)))
    if p.c2 > 0:
        terms.append(np.full(r.shape, p.m * math.log(p.c2)))
    out = np.exp(_sum_powers_log(terms) / p.m)
    return out if out.shape else float(out)


def initial_profile_gradient(p: FlowParams, r) -> np.ndarray | float:
    """d/dr of the initial datum: -lam c1^m r^(-m lam - 1) u0^(1-m)."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("initial_profile_gradient requires r > 0")
    if p.c1 == 0:
        out = np.zeros(r.shape)
        return out if out.shape else 0.0
    log_u0 = np.log(initial_profile(p, r))
    log_mag = (math.log(p.lam) + p.m * math.log(p.c1)
               - (p.m * p.lam + 1.0) * np.log(r) + (1.0 - p.m) * log_u0)
    out = -np.exp(log_mag)
    return out if out.shape else float(out)


def regularized_initial(p: FlowParams, rc: RegularizationConfig,
                        r) -> np.ndarray | float:
    """Smoothed initial datum, finite at the origin:

    (c1^m (r^2 + eps)^(-m lam / 2) + c2^m + eps)^(1/m).
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("regularized_initial requires r >= 0")
    eps = rc.epsilon
    terms = [np.full(r.shape, math.log(p.c2 ** p.m + eps))]
    if p.c1 > 0:
        terms.append(p.m * math.log(p.c1)
                     - 0.5 * p.m * p.lam * np.log(r * r + eps))
    out = np.exp(_sum_powers_log(terms) / p.m)
    return out if out.shape else float(out)


# --- flat key = value config files -----------------------------------------

_PARAM_KEYS = ("n", "m", "lambda", "c1", "c2")
_GRID_KEYS = ("r_min", "r_max", "N")
_SOLVER_KEYS = ("dt0", "t_end", "theta", "newton_tol", "newton_max",
                "step_growth", "dt_cap")
_MISC_KEYS = ("epsilon", "margin", "store_stride",
              "tol_clause_i", "tol_clause_ii", "tol_clause_iii",
              "tol_clause_iv", "tol_clause_v",
              "tol_sandwich", "tol_subsol_residual")
KNOWN_KEYS = frozenset(_PARAM_KEYS + _GRID_KEYS + _SOLVER_KEYS + _MISC_KEYS)

_INT_KEYS = frozenset(("n", "N", "newton_max", "store_stride"))


def parse_config(path) -> dict:
    """Parse a flat ``key = value`` config file into typed values.

    The key ``m`` accepts the literal token ``critical``, resolved to
    (n-2)/(n+2) from the ``n`` entry.  Unknown keys are rejected.
    """
    raw: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ConfigError(
                    f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, value = (part.strip() for part in stripped.split("=", 1))
            if key not in KNOWN_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            if key in raw:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            raw[key] = value

    out: dict[str, float | int] = {}
    for key, value in raw.items():
        if key == "m" and value == "critical":
            continue
        try:
            out[key] = int(value) if key in _INT_KEYS else float(value)
        except ValueError as exc:
            raise ConfigError(
                f"{path}: key {key!r} has non-numeric value {value!r}"
            ) from exc
    if raw.get("m") == "critical":
        if "n" not in out:
            raise ConfigError(f"{path}: m = critical requires an n entry")
        out["m"] = critical_exponent(int(out["n"]))
    return out


def flow_params_from_config(cfg: dict) -> FlowParams:
    missing = [k for k in _PARAM_KEYS if k not in cfg]
    if missing:
        raise ConfigError(f"missing config keys: {', '.join(missing)}")
    return FlowParams(n=int(cfg["n"]), m=float(cfg["m"]),
                      lam=float(cfg["lambda"]),
                      c1=float(cfg["c1"]), c2=float(cfg["c2"]))
