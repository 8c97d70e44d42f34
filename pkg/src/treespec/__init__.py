"""Spectral toolkit for weak-coupling ground states on regular metric trees.

The package studies Schrodinger operators -Laplacian - alpha*V on regular
metric trees through their radial reduction to weighted half-line problems:
certified Bessel/Lambert primitives, tree geometry, finite-element ground
state solvers, the diagonalizing oscillatory transform, Birman-Schwinger
trace and eigenvalue machinery, and coupling-sweep asymptotics with the
matching variational bounds.
"""

__version__ = "0.1.0"
