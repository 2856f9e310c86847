"""Numerical checks of the local log-Brunn-Minkowski inequality near the ball."""

__version__ = "0.1.0"
