"""Batch figure rendering for mimosim results.csv files."""

__version__ = "0.1.0"

from .render import PlotSpec, RenderError, load_rows, render
