"""Numerical laboratory for degenerate one-phase free boundary problems.

``Delta w = h(grad w)/w`` with the free boundary condition ``grad w`` on the
boundary of a star-shaped set ``D``, its obstacle and Alt-Phillips
specialisations, and the linearized Neumann-type problem.
"""
from ._backend import backend_name, use_backend

__version__ = "0.1.0"

__all__ = ["__version__", "backend_name", "use_backend"]
