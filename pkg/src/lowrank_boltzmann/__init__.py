"""Adaptive dynamical low-rank and full-tensor steady solvers for the 2D-velocity Boltzmann equation."""

__version__ = "0.1.0"
