"""File-coupled renderer for mmhb experiment artifacts."""

from .render import KINDS, DIVERGENCE_RGBA, PlotJob, SchemaError, render

__all__ = ["KINDS", "DIVERGENCE_RGBA", "PlotJob", "SchemaError", "render"]
