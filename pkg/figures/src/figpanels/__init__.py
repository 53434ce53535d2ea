"""Read-only figure rendering for collective-emission run directories."""

from .loader import EnsembleDirectory, FigureDataError, RunDirectory
from .panels import PANEL_KINDS, render, render_file

__version__ = "0.1.0"

__all__ = ["EnsembleDirectory", "FigureDataError", "PANEL_KINDS",
           "RunDirectory", "render", "render_file", "__version__"]
