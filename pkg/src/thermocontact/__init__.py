"""Finite-element simulator for thermal adhesive contact of a thermoviscoelastic body.

Modules
-------
monotone      thermal laws, Yosida/Moreau regularization calculus
mesh          triangular meshes with marked boundary parts
assembly      P1 matrices (mass, stiffness, viscoelastic forms, coupling, loads)
constitutive  surface constitutive functions and constraint operators
stepper       semi-implicit time stepping with a fixed-point loop
diagnostics   energy functionals, dissipation and the discrete energy balance
scenarios     presets; config / output / study / cli form the application layer
"""

from .errors import *  # noqa: F401,F403
from .stepper import Scenario, Simulator, SolverParams, State, build_initial_data, run, step  # noqa: F401

__version__ = "0.1.0"
