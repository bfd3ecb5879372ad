"""plotkit: regenerate benchmark figures from rodlab CSV outputs."""

from .figures import FIGURE_KINDS, FigureSpec, load_table, render

__version__ = "0.1.0"

__all__ = ["FIGURE_KINDS", "FigureSpec", "load_table", "render"]
