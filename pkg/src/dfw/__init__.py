"""Deconfounding-factor weighting and baseline propensity weighting schemes."""

__version__ = "0.1.0"
