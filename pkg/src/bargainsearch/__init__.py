"""Numerical laboratory for a bargaining-with-search marketplace.

Solve the stationary equilibrium, simulate event logs, estimate structural
primitives back from the logs, and run full-commitment counterfactuals with
welfare accounting.
"""

from .core import (
    ACTIONS,
    ActionValues,
    Policies,
    RegularityReport,
    ValueFunctions,
    buyer_action_values,
    buyer_best_action,
    committed_offer,
    noncommitted_offer,
    regularity_diagnostics,
    seller_best_price,
    seller_match_value,
    seller_objective,
    walkaway_cutoff,
)
from .grids import Grids, build_grids, ecdf_at, edensity_at
from .params import ModelParams, Normal, baseline_params
from .solver import (
    Equilibrium,
    SolverError,
    SolverOptions,
    iterate_once,
    smooth_values,
    solve_equilibrium,
)

__all__ = [
    "ACTIONS",
    "ActionValues",
    "Equilibrium",
    "Grids",
    "ModelParams",
    "Normal",
    "Policies",
    "RegularityReport",
    "SolverError",
    "SolverOptions",
    "ValueFunctions",
    "baseline_params",
    "build_grids",
    "buyer_action_values",
    "buyer_best_action",
    "committed_offer",
    "ecdf_at",
    "edensity_at",
    "iterate_once",
    "noncommitted_offer",
    "regularity_diagnostics",
    "seller_best_price",
    "seller_match_value",
    "seller_objective",
    "smooth_values",
    "solve_equilibrium",
    "walkaway_cutoff",
]

__version__ = "0.1.0"
