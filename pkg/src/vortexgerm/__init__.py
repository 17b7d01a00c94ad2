"""Semiclassical curve states of the damped nonlocal NLSE and a PDE reference solver."""

__version__ = "0.1.0"
