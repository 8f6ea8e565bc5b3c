"""Figure generation for the fast-diffusion pipeline's CSV artifacts."""

__version__ = "0.1.0"

from .render import RenderResult, render
from .spec import (KINDS, SCHEMAS, DataAssertionError, EmptyInput,
                   FigureSpec, SchemaMismatch, load_csv)

__all__ = ["render", "RenderResult", "FigureSpec", "load_csv", "KINDS",
           "SCHEMAS", "SchemaMismatch", "EmptyInput", "DataAssertionError"]
