"""Numerical laboratory for minimal-mass blow-up structures of the 2D cubic
Zakharov-Kuznetsov equation: ground state, linearized operators, localized
approximate blow-up profiles, weighted norms, time evolution, and modulation
diagnostics."""

__version__ = "0.1.0"
