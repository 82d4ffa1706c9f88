"""plotkit: publication-style figures from atomwalk CSV/JSON outputs."""

__version__ = "0.1.0"

from .figures import FigureKind, FigureSpec, build, render
from .readers import SchemaError

__all__ = ["__version__", "FigureKind", "FigureSpec", "build", "render", "SchemaError"]
