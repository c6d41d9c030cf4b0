"""Spectral flow of flat operator families via page towers and Massey products."""

__version__ = "0.1.0"
