"""Simple closed geodesics and geodesic loops on tetrahedra of constant curvature."""

__version__ = "0.1.0"
