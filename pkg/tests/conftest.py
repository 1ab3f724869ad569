"""Shared fixtures: a small fast equilibrium for unit/property tests and the
full-size baseline objects for the acceptance suite."""

from __future__ import annotations

import warnings

import pytest

from bargainsearch import SolverOptions, baseline_params, build_grids, solve_equilibrium
from bargainsearch.cli import DEFAULT_GRID_SEED, DEFAULT_SIM_SEED
from bargainsearch.estimate import estimate_all
from bargainsearch.simulate import SimOptions, simulate_market


@pytest.fixture(scope="session")
def params():
    return baseline_params()


@pytest.fixture(scope="session")
def small_eq(params):
    """Coarse but converged baseline equilibrium for fast tests."""
    grids = build_grids(params, n_values=40, n_prices=100, seed=7)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return solve_equilibrium(params, grids, SolverOptions(compute_diagnostics=False))


@pytest.fixture(scope="session")
def small_log(small_eq, params):
    return simulate_market(small_eq, params, SimOptions(n_listings=1500, horizon=365.0, seed=404))


@pytest.fixture(scope="session")
def baseline_eq(params):
    """Full-size baseline equilibrium at the pinned grid seed."""
    grids = build_grids(params, n_values=100, n_prices=200, seed=DEFAULT_GRID_SEED)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return solve_equilibrium(params, grids, SolverOptions())


@pytest.fixture(scope="session")
def counterfactual_eq(baseline_eq, params):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return solve_equilibrium(
            params, baseline_eq.grids, SolverOptions(counterfactual_full_commitment=True)
        )


@pytest.fixture(scope="session")
def roundtrip_log(baseline_eq, params):
    return simulate_market(
        baseline_eq, params, SimOptions(n_listings=10_000, horizon=365.0, seed=DEFAULT_SIM_SEED)
    )


@pytest.fixture(scope="session")
def roundtrip_estimate(roundtrip_log, params):
    return estimate_all(roundtrip_log, r=params.r, t=params.t, N_S=params.N_S, N_B=params.N_B)
