"""Logarithmic radial meshes and non-uniform three-point stencils.

Grids are geometric (constant node ratio) on a truncated annulus
[r_min, r_max] with an exact node at r = 1, the base point for arc-length
integrals.  A single constant ratio cannot in general place a node at 1
exactly, so the mesh is built as two geometric pieces meeting at 1 whose
ratios agree with the nominal q = (r_max/r_min)^(1/(N-1)) to rounding of
the piece split.  ``refine`` inserts geometric midpoints, which nests
grids exactly for convergence studies.

Stencils come from local quadratic interpolation, hence are exact on
quadratics and second-order accurate on smoothly graded meshes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "RadialGrid",
    "RadialField",
    "build_grid",
    "build_ball_grid",
    "radial_laplacian",
    "radial_gradient",
    "RadialOperator",
]


@dataclass(frozen=True)
class RadialGrid:
    """Strictly increasing radial nodes.

    ``has_origin`` marks ball-type grids whose first node is r = 0
    (used by the regularized full-space problem); annulus grids have
    all nodes positive and 0 < r_min < 1 < r_max.
    """

    nodes: np.ndarray
    has_origin: bool = False

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        if nodes.ndim != 1 or len(nodes) < 3:
            raise ValueError("grid needs at least 3 nodes")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("grid nodes must be strictly increasing")
        if self.has_origin:
            if nodes[0] != 0.0:
                raise ValueError("ball grid must start at r = 0")
        elif nodes[0] <= 0.0:
            raise ValueError("annulus grid requires r_min > 0")

    @property
    def r_min(self) -> float:
        return float(self.nodes[0])

    @property
    def r_max(self) -> float:
        return float(self.nodes[-1])

    @property
    def size(self) -> int:
        return len(self.nodes)

    @property
    def index_of_unit(self) -> int:
        """Index of the node closest to r = 1 (exact by construction
        for grids from ``build_grid``)."""
        return int(np.argmin(np.abs(self.nodes - 1.0)))

    @property
    def nominal_ratio(self) -> float:
        lo = self.nodes[1] if self.has_origin else self.nodes[0]
        k = self.size - (2 if self.has_origin else 1)
        return float((self.nodes[-1] / lo) ** (1.0 / k))

    def refine(self) -> "RadialGrid":
        """Insert cell midpoints (geometric between positive nodes, the
        arithmetic half for an origin cell); the result contains every
        node of this grid at doubled index, so solutions can be compared
        at shared nodes without interpolation."""
        mids = np.sqrt(self.nodes[:-1] * self.nodes[1:])
        if self.has_origin:
            mids[0] = 0.5 * self.nodes[1]
        merged = np.empty(2 * self.size - 1)
        merged[::2] = self.nodes
        merged[1::2] = mids
        return RadialGrid(merged, has_origin=self.has_origin)


def build_grid(r_min: float, r_max: float, N: int) -> RadialGrid:
    """Geometric annulus grid with an exact node at r = 1.

    Requires 0 < r_min < 1 < r_max and N >= 3.  The node count split
    between (r_min, 1) and (1, r_max) is the rounding of the log-scale
    proportion, so both piece ratios match (r_max/r_min)^(1/(N-1)) up
    to O(1/N).
    """
    if not (0.0 < r_min < 1.0 < r_max):
        raise ValueError(
            f"need 0 < r_min < 1 < r_max, got [{r_min}, {r_max}]")
    if N < 3:
        raise ValueError(f"need N >= 3 nodes, got {N}")
    k = int(round((N - 1) * math.log(1.0 / r_min)
                  / math.log(r_max / r_min)))
    k = min(max(k, 1), N - 2)
    inner = r_min * (1.0 / r_min) ** (np.arange(k + 1) / k)
    outer = r_max ** (np.arange(1, N - k) / (N - 1 - k))
    nodes = np.concatenate([inner, outer])
    nodes[0], nodes[k], nodes[-1] = r_min, 1.0, r_max
    return RadialGrid(nodes)


def build_ball_grid(r_inner: float, r_max: float, N: int) -> RadialGrid:
    """Grid on [0, r_max]: the origin plus a geometric annulus part
    starting at r_inner.  Used with a symmetry (zero-slope) condition
    at the origin."""
    annulus = build_grid(r_inner, r_max, N - 1)
    return RadialGrid(np.concatenate([[0.0], annulus.nodes]),
                      has_origin=True)


@dataclass(frozen=True)
class RadialField:
    """Positive radial profile sampled on a grid at one instant.

    ``mono_tol`` is the producer-declared tolerance on discrete radial
    monotonicity (relative positive jump allowed between neighbours);
    pass None to skip the check for fields that are not expected to be
    nonincreasing.
    """

    grid: RadialGrid
    values: np.ndarray
    time: float = 0.0
    mono_tol: float | None = field(default=None, repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if values.shape != self.grid.nodes.shape:
            raise ValueError("field/grid size mismatch")
        if np.any(values <= 0.0) or not np.all(np.isfinite(values)):
            raise ValueError("field values must be positive and finite")
        if self.time < 0:
            raise ValueError("time must be >= 0")
        if self.mono_tol is not None:
            jump = np.diff(values) / values[:-1]
            worst = float(jump.max(initial=0.0))
            if worst > self.mono_tol:
                raise ValueError(
                    f"field increases in r by {worst:.3e} relative, above "
                    f"declared tolerance {self.mono_tol:.3e}")


class RadialOperator:
    """Precomputed three-point coefficients for d^2/dr^2 + (dim-1)/r d/dr
    at interior nodes of a grid (dim = spatial dimension; dim = 2 gives
    the meridional form f'' + f'/r)."""

    def __init__(self, grid: RadialGrid, dim: int):
        r = grid.nodes
        # interior nodes exclude both end nodes; on ball grids the origin
        # row is assembled separately by the solver
        ri = r[1:-1]
        h1 = r[1:-1] - r[:-2]
        h2 = r[2:] - r[1:-1]
        w = (dim - 1.0) / ri
        self.lo = 2.0 / (h1 * (h1 + h2)) + w * (-h2 / (h1 * (h1 + h2)))
        self.up = 2.0 / (h2 * (h1 + h2)) + w * (h1 / (h2 * (h1 + h2)))
        # rows must annihilate constants exactly, not just to rounding
        self.di = -(self.lo + self.up)
        # gradient-only coefficients (dim independent)
        self.g_lo = -h2 / (h1 * (h1 + h2))
        self.g_up = h1 / (h2 * (h1 + h2))
        self.g_di = -(self.g_lo + self.g_up)
        # pure second derivative
        self.d2_lo = 2.0 / (h1 * (h1 + h2))
        self.d2_up = 2.0 / (h2 * (h1 + h2))
        self.d2_di = -(self.d2_lo + self.d2_up)
        self.grid = grid
        self.dim = dim

    def apply(self, values: np.ndarray) -> np.ndarray:
        # difference form: constants are annulled exactly, and flat
        # regions avoid catastrophic cancellation
        return (self.lo * (values[:-2] - values[1:-1])
                + self.up * (values[2:] - values[1:-1]))

    def gradient(self, values: np.ndarray) -> np.ndarray:
        return (self.g_lo * (values[:-2] - values[1:-1])
                + self.g_up * (values[2:] - values[1:-1]))

    def second_derivative(self, values: np.ndarray) -> np.ndarray:
        return (self.d2_lo * (values[:-2] - values[1:-1])
                + self.d2_up * (values[2:] - values[1:-1]))

    def cancellation_scale(self, values: np.ndarray) -> np.ndarray:
        """Sum of stencil term magnitudes; the natural scale against
        which a near-zero result of ``apply`` should be judged."""
        return (np.abs(self.lo * values[:-2]) + np.abs(self.di * values[1:-1])
                + np.abs(self.up * values[2:]))


def radial_laplacian(f: RadialField, dim: int) -> np.ndarray:
    """f'' + (dim-1)/r f' at interior nodes, second order on smooth
    fields."""
    if f.grid.size < 3:
        raise ValueError("need at least 3 nodes")
    return RadialOperator(f.grid, dim).apply(f.values)


def radial_gradient(f: RadialField) -> np.ndarray:
    """Centered non-uniform first derivative at interior nodes."""
    if f.grid.size < 3:
        raise ValueError("need at least 3 nodes")
    return RadialOperator(f.grid, 2).gradient(f.values)
