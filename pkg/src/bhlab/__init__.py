"""Boundary-behaviour laboratory for fully nonlinear parabolic equations.

Subpackages: :mod:`bhlab.geometry`, :mod:`bhlab.operators`,
:mod:`bhlab.barriers`, :mod:`bhlab.solver`, :mod:`bhlab.harness` and the
command-line runner :mod:`bhlab.cli`.
"""

__version__ = "0.1.0"
