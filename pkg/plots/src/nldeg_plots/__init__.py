"""Batch figure renderer for the solver's CSV/JSON artifacts.

Pure view layer: every number that appears in a figure was read verbatim
from a CSV file in the artifact directory; nothing is recomputed.
"""

from .render import FIGURES, RenderError, render

__all__ = ["FIGURES", "RenderError", "render"]

__version__ = "0.1.0"
