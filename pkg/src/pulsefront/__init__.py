"""Pulsating reaction-diffusion fronts in periodic media."""

__version__ = "0.1.0"
