"""Exact simulation and local-time estimation for skew and oscillating Brownian motion."""

__version__ = "0.1.0"
