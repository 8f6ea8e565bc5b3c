"""Deterministic rendering of the four figure kinds.

Rendering is a pure function of the input CSVs: fixed figure size and
dpi, the Agg backend, a pinned SVG hash salt, and no timestamp metadata,
so identical inputs give identical bytes.  All numeric claims live in
the producing pipeline; figures only re-assert what they plot.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "fdfig"

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .spec import (FigureSpec, check_blowdown, check_envelope,
                   check_geometry, load_csv)

__all__ = ["RenderResult", "render"]


@dataclass(frozen=True)
class RenderResult:
    """Written file plus the values the figure displays."""

    path: Path
    annotations: dict


def _pick_times(ts: np.ndarray, k: int = 5) -> np.ndarray:
    uniq = np.unique(ts)
    if len(uniq) <= k:
        return uniq
    idx = np.unique(np.linspace(0, len(uniq) - 1, k).astype(int))
    return uniq[idx]


def _save(fig, spec: FigureSpec) -> Path:
    out = Path(spec.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    metadata = {"Software": None} if out.suffix == ".png" else \
        {"Date": None, "Creator": None}
    fig.savefig(out, dpi=spec.dpi, metadata=metadata)
    plt.close(fig)
    return out


def _render_sandwich(spec: FigureSpec):
    data = load_csv(spec.inputs["envelope"], "envelope")
    check_envelope(data)
    fig, ax = plt.subplots(figsize=spec.size)
    times = _pick_times(data["t"])
    for t in times:
        block = data["t"] == t
        ax.plot(data["r"][block], data["u"][block], lw=1.4,
                label=f"u, t={t:g}")
    first = data["t"] == data["t"].min()
    ax.plot(data["r"][first], data["upper"][first], "k--", lw=1.0,
            label="upper envelope")
    ax.plot(data["r"][first], data["lower"][first], "k:", lw=1.0,
            label="lower envelope (t=0)")
    if spec.log_x:
        ax.set_xscale("log")
    if spec.log_y:
        ax.set_yscale("log")
    ax.set_xlabel("r")
    ax.set_ylabel("u")
    ax.legend(fontsize=8)
    ax.set_title("solution inside the comparison envelope")
    return fig, {"times": [float(t) for t in times]}


def _render_warping(spec: FigureSpec):
    geo = load_csv(spec.inputs["geometry"], "geometry")
    check_geometry(geo)
    fits = load_csv(spec.inputs["endfit"], "endfit")
    inner = fits["end"] == "E2"
    if not inner.any():
        raise ValueError("endfit table carries no inner-end row")
    slope = float(fits["slope"][inner][0])
    ref_slope = float(fits["ref_slope"][inner][0])

    t0 = geo["t"].min()
    block = geo["t"] == t0
    rho = geo["rho"][block]
    sqF = np.sqrt(geo["F"][block])
    side = rho < 0
    fig, ax = plt.subplots(figsize=spec.size)
    ax.plot(-rho[side], sqF[side], lw=1.4, label="sqrt(F)")
    ax.plot(-rho[side], ref_slope * (-rho[side]), "k--", lw=1.0,
            label=f"cone asymptote, slope {ref_slope:g}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("distance toward the puncture")
    ax.set_ylabel("sqrt(F)")
    ax.annotate(f"fitted slope = {slope:.17g}", xy=(0.05, 0.9),
                xycoords="axes fraction", fontsize=9)
    ax.legend(fontsize=8)
    ax.set_title("warped-product profile at the inner end")
    return fig, {"fitted_slope": slope, "ref_slope": ref_slope}


def _render_blowdown(spec: FigureSpec):
    data = load_csv(spec.inputs["blowdown"], "blowdown")
    check_blowdown(data)
    fig, ax = plt.subplots(figsize=spec.size)
    for name, style in (("max_dev", "-"), ("max_grad", "--"),
                        ("max_curv", ":"), ("steady_dev", "-.")):
        positive = data[name] > 0
        ax.plot(data["t"][positive], data[name][positive], style, lw=1.3,
                label=name)
    ax.set_yscale("log")
    if spec.log_x and data["t"][0] > 0:
        ax.set_xscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("window metric")
    ax.legend(fontsize=8)
    ax.set_title("flattening on the compact window")
    return fig, {"final_dev": float(data["max_dev"][-1])}


def _render_curvature(spec: FigureSpec):
    geo = load_csv(spec.inputs["geometry"], "geometry")
    check_geometry(geo)
    fig, ax = plt.subplots(figsize=spec.size)
    for t in _pick_times(geo["t"], 4):
        block = geo["t"] == t
        ax.plot(geo["r"][block], -geo["scal"][block], lw=1.3,
                label=f"-scal, t={t:g}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("r")
    ax.set_ylabel("-scal")
    ax.legend(fontsize=8)
    ax.set_title("scalar curvature magnitude")
    return fig, {"min_scal": float(geo["scal"].min())}


_RENDERERS = {
    "sandwich": _render_sandwich,
    "warping": _render_warping,
    "blowdown": _render_blowdown,
    "curvature": _render_curvature,
}


def render(spec: FigureSpec) -> RenderResult:
    """Validate inputs, draw, and write the image; nothing is written
    when validation fails."""
    fig, annotations = _RENDERERS[spec.kind](spec)
    path = _save(fig, spec)
    return RenderResult(path=path, annotations=annotations)
