"""Stationary inhomogeneous incompressible Navier-Stokes solver in symmetric settings."""
__version__ = "0.1.0"
