"""Counting rational approximations on spheres through lattice points of the light cone."""

__version__ = "0.1.0"
