"""Supersymmetric polar coordinates and exact Cauchy-disorder averages on lattices."""

__version__ = "0.1.0"
