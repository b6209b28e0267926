"""Coupled radiative-conductive heat transfer: discrete-ordinates transport,
implicit nonlinear conduction, Picard coupling and estimate diagnostics."""

__version__ = "0.1.0"
