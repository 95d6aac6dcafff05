"""Spectral multiplicity laboratory: finite abelian realizations, rank-one towers, cocycles."""

__version__ = "0.1.0"
