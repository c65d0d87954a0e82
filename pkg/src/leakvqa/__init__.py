"""Qutrit-level simulation of leakage noise in variational quantum circuits."""

__version__ = "0.1.0"
