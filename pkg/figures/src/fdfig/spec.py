"""Figure specifications and CSV loading with schema enforcement.

Every loader validates the header against the declared schema, refuses
empty bodies, and re-runs the data assertions the upstream pipeline
guarantees (ordering, positivity, envelope bracketing) so a corrupted
artifact fails loudly before anything is drawn.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "SchemaMismatch",
    "EmptyInput",
    "DataAssertionError",
    "FigureSpec",
    "load_csv",
    "KINDS",
    "SCHEMAS",
]

KINDS = ("sandwich", "warping", "blowdown", "curvature")

SCHEMAS = {
    "envelope": ["t", "r", "lower", "u", "upper"],
    "geometry": ["t", "r", "rho", "F", "scal", "vol_density"],
    "endfit": ["t", "end", "slope", "order", "ref_slope", "ref_order",
               "residual"],
    "blowdown": ["t", "max_dev", "max_grad", "max_curv", "steady_dev"],
}

# which input tables each figure kind consumes
KIND_INPUTS = {
    "sandwich": ("envelope",),
    "warping": ("geometry", "endfit"),
    "blowdown": ("blowdown",),
    "curvature": ("geometry",),
}


class SchemaMismatch(ValueError):
    """Header of an input CSV does not match its declared schema."""


class EmptyInput(ValueError):
    """Input CSV has a header but no data rows."""


class DataAssertionError(ValueError):
    """Loaded data violate an invariant the pipeline guarantees."""


@dataclass(frozen=True)
class FigureSpec:
    """One figure to render.

    inputs maps table names (see KIND_INPUTS) to CSV paths; ``log_x`` /
    ``log_y`` choose axis scales where the kind does not force them.
    The output format follows the ``out`` suffix (.png or .svg).
    """

    kind: str
    inputs: dict
    out: str | Path
    log_x: bool = True
    log_y: bool = True
    dpi: int = 120
    size: tuple = (7.0, 4.5)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; "
                             f"expected one of {KINDS}")
        missing = [name for name in KIND_INPUTS[self.kind]
                   if name not in self.inputs]
        if missing:
            raise ValueError(
                f"{self.kind} figure needs input tables {missing}")
        suffix = Path(self.out).suffix.lower()
        if suffix not in (".png", ".svg"):
            raise ValueError(f"output must be .png or .svg, got {suffix!r}")


def load_csv(path, table: str) -> dict:
    """Read one declared table into column arrays (strings preserved
    for the non-numeric ``end`` column)."""
    schema = SCHEMAS[table]
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        columns = header.split(",") if header else []
        if columns != schema:
            offending = next(
                (f"column {i} is {got!r}, expected {want!r}"
                 for i, (got, want) in enumerate(
                     zip(columns + ["<missing>"] * len(schema), schema))
                 if got != want),
                "column count differs")
            raise SchemaMismatch(
                f"{path}: header {header!r} does not match the "
                f"{table} schema {','.join(schema)}; {offending}")
        rows = [line.rstrip("\n").split(",") for line in fh if line.strip()]
    if not rows:
        raise EmptyInput(f"{path}: no data rows")
    if any(len(row) != len(schema) for row in rows):
        raise SchemaMismatch(f"{path}: ragged row width")
    out = {}
    for j, name in enumerate(schema):
        col = [row[j] for row in rows]
        if name == "end":
            out[name] = np.asarray(col)
        else:
            try:
                out[name] = np.asarray(col, dtype=float)
            except ValueError as exc:
                raise SchemaMismatch(
                    f"{path}: column {name!r} is not numeric") from exc
    return out


def check_envelope(data: dict, slack: float = 1e-9):
    """The envelope table must bracket the solution and be positive."""
    for name in ("lower", "u", "upper"):
        if not np.all(data[name] > 0):
            raise DataAssertionError(f"column {name!r} must be positive")
    tol = slack * data["upper"]
    if not np.all(data["lower"] <= data["u"] + tol):
        raise DataAssertionError("lower envelope exceeds the solution")
    if not np.all(data["u"] <= data["upper"] * (1 + 1e-6) + tol):
        raise DataAssertionError("solution exceeds the upper envelope")


def check_geometry(data: dict):
    if not np.all(data["F"] > 0):
        raise DataAssertionError("warping column F must be positive")
    for t in np.unique(data["t"]):
        block = data["t"] == t
        if not np.all(np.diff(data["rho"][block]) > 0):
            raise DataAssertionError(
                f"arc length must increase within the t={t} block")


def check_blowdown(data: dict):
    if not np.all(np.diff(data["t"]) > 0):
        raise DataAssertionError("times must be strictly increasing")
    devs = data["max_dev"]
    if not np.all(devs[1:] <= devs[:-1] * (1 + 1e-9)):
        raise DataAssertionError("window deviation must be nonincreasing")
