"""Figure rendering for simulation sweep CSVs."""

from .spec import FigureSpec, PlotInputError
from .render import render

__all__ = ["FigureSpec", "PlotInputError", "render"]
