"""Radial verification suite for the critical elliptic problem on the unit ball:
ground-state branches, auxiliary linear profiles, non-degeneracy certificates,
bubble calculus, and finite-dimensional energy expansion checks."""

__version__ = "0.1.0"
