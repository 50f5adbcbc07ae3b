"""Explicit symplectic integrators for nonseparable Hamiltonians."""

__version__ = "0.1.0"
