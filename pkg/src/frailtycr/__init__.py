"""Bivariate competing-risks models with Gamma-type frailty."""

__version__ = "0.1.0"
