"""Travelling waves and invasions for reaction-diffusion fields coupled
to a line of fast diffusion."""

__version__ = "0.1.0"
