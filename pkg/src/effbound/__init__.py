"""Semiparametric efficiency bounds for white-noise, deconvolution and Levy models."""
__version__ = "0.1.0"
