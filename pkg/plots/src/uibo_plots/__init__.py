"""Figure rendering for benchmark and replay CSV artifacts."""

from .figures import (
    FIGURE_KINDS,
    FigureSpec,
    plot_curves,
    plot_paths,
    plot_posterior,
    render,
)

__all__ = [
    "FIGURE_KINDS",
    "FigureSpec",
    "plot_curves",
    "plot_paths",
    "plot_posterior",
    "render",
]

__version__ = "0.1.0"
