"""Numerical toolkit for a boundary-degenerate, age- and space-structured predator-prey cascade.

Forward and adjoint solvers on a characteristic-aligned lattice, Carleman and
observability estimates evaluated on discrete solutions, and penalized HUM
synthesis of null controls on an age band.
"""
from .adjoint import TerminalData, characteristic_eval, solve_adjoint, transpose_check
from .coefficients import (DegeneracyModel, DegeneracyReport, check_carleman_hypotheses,
                           check_pair_ordering, classify_degeneracy, eval_k)
from .forward import (CascadeState, CascadeTrajectory, Mortality, RatePack, gronwall_check,
                      renewal_trace, solve_forward, transform_model)
from .hum import (ControlSetup, HumProblem, HumReport, functional_J, minimize_F, minimize_J,
                  minimize_joint, null_control_full, synthesize_control)
from .inequalities import (adjoint_forcing, carleman_constant_sweep, carleman_sides,
                           observability_sides)
from .mesh import (Field, Region, TensorGrid, cylinder_integral, hardy_ratio, restrict,
                   weighted_l2)
from .weights import CarlemanConfig, WeightP, Window, phi, theta

__all__ = [
    "TerminalData", "characteristic_eval", "solve_adjoint", "transpose_check",
    "DegeneracyModel", "DegeneracyReport", "check_carleman_hypotheses", "check_pair_ordering",
    "classify_degeneracy", "eval_k",
    "CascadeState", "CascadeTrajectory", "Mortality", "RatePack", "gronwall_check", "renewal_trace",
    "solve_forward", "transform_model",
    "ControlSetup", "HumProblem", "HumReport", "functional_J", "minimize_F", "minimize_J",
    "minimize_joint", "null_control_full", "synthesize_control",
    "adjoint_forcing", "carleman_constant_sweep", "carleman_sides", "observability_sides",
    "Field", "Region", "TensorGrid", "cylinder_integral", "hardy_ratio", "restrict", "weighted_l2",
    "CarlemanConfig", "WeightP", "Window", "phi", "theta",
]
