"""Periodic orbits of the planar Hill four-body problem."""

__version__ = "0.1.0"
