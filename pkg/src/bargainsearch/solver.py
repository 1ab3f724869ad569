"""Stationary equilibrium via damped, smoothed value function iteration.

Each sweep recomputes the acceptance prices and buyer best responses implied
by the current value functions, updates the unmatched seller value from the
list-price problem and the buyer values from their definitions, then applies
damping, Gaussian smoothing in grid-index space, and an isotonic repair that
keeps the matched buyer value non-increasing in the seller value. Iteration
stops when the sup-norm relative change of both unmatched value functions
falls below tolerance.

The returned policies are exact best responses to the converged values, so an
exhaustive enumeration oracle can check them cell for cell.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import isotonic_regression

from .core import ACCEPT_ATOL, Policies, RegularityReport, ValueFunctions, regularity_diagnostics
from .grids import Grids
from .params import ModelParams

EQUILIBRIUM_SCHEMA_VERSION = "bargainsearch-equilibrium-v1"


class SolverError(RuntimeError):
    """Raised when an iteration produces non-finite values; carries a state summary."""

    def __init__(self, message: str, state_summary: dict | None = None):
        super().__init__(message)
        self.state_summary = state_summary or {}


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-3
    max_iters: int = 500
    smoothing_bandwidth: float = 5.0
    damping: float = 0.5
    counterfactual_full_commitment: bool = False
    compute_diagnostics: bool = True

    def __post_init__(self) -> None:
        if not self.tol > 0.0:
            raise ValueError("tol must be positive")
        if self.smoothing_bandwidth < 0.0:
            raise ValueError("smoothing bandwidth must be non-negative")
        if not (0.0 < self.damping <= 1.0):
            raise ValueError("damping weight must lie in (0, 1]")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")

    def to_dict(self) -> dict:
        return {
            "tol": self.tol,
            "max_iters": self.max_iters,
            "smoothing_bandwidth": self.smoothing_bandwidth,
            "damping": self.damping,
            "counterfactual_full_commitment": self.counterfactual_full_commitment,
        }


@dataclass
class Equilibrium:
    params: ModelParams
    grids: Grids
    value_fns: ValueFunctions
    policies: Policies
    iterations: int
    residuals: dict
    converged: bool
    diagnostics: dict = field(default_factory=dict)
    residual_history: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "schema_version": EQUILIBRIUM_SCHEMA_VERSION,
            "params": self.params.to_dict(),
            "grids": self.grids.to_dict(),
            "values": {
                "seller_unmatched": self.value_fns.seller_unmatched.tolist(),
                "buyer_unmatched": self.value_fns.buyer_unmatched.tolist(),
                "buyer_matched": self.value_fns.buyer_matched.tolist(),
            },
            "policies": {
                "list_price": self.policies.list_price.tolist(),
                "list_price_idx": self.policies.list_price_idx.tolist(),
                "commit_price": self.policies.commit_price.tolist(),
                "search_price": [
                    [None if not np.isfinite(v) else v for v in row]
                    for row in self.policies.search_price
                ],
                "action": self.policies.action.tolist(),
            },
            "iterations": self.iterations,
            "residuals": self.residuals,
            "converged": self.converged,
            "diagnostics": self.diagnostics,
            "residual_history": self.residual_history,
        }

    @staticmethod
    def from_dict(d: dict) -> "Equilibrium":
        if d.get("schema_version") != EQUILIBRIUM_SCHEMA_VERSION:
            raise ValueError(f"unsupported equilibrium schema: {d.get('schema_version')!r}")
        search = np.array(
            [[np.nan if v is None else v for v in row] for row in d["policies"]["search_price"]],
            dtype=float,
        )
        return Equilibrium(
            params=ModelParams.from_dict(d["params"]),
            grids=Grids.from_dict(d["grids"]),
            value_fns=ValueFunctions(
                np.asarray(d["values"]["seller_unmatched"], dtype=float),
                np.asarray(d["values"]["buyer_unmatched"], dtype=float),
                np.asarray(d["values"]["buyer_matched"], dtype=float),
            ),
            policies=Policies(
                list_price=np.asarray(d["policies"]["list_price"], dtype=float),
                list_price_idx=np.asarray(d["policies"]["list_price_idx"], dtype=int),
                commit_price=np.asarray(d["policies"]["commit_price"], dtype=float),
                search_price=search,
                action=np.asarray(d["policies"]["action"], dtype=np.int8),
            ),
            iterations=int(d["iterations"]),
            residuals=dict(d["residuals"]),
            converged=bool(d["converged"]),
            diagnostics=dict(d.get("diagnostics", {})),
            residual_history=list(d.get("residual_history", [])),
        )


@lru_cache(maxsize=16)
def _smoothing_matrix(n: int, bandwidth: float) -> np.ndarray:
    idx = np.arange(n, dtype=float)
    w = np.exp(-((idx[:, None] - idx[None, :]) ** 2) / (2.0 * bandwidth**2))
    return w / w.sum(axis=1, keepdims=True)


def smooth_values(values: np.ndarray, bandwidth: float) -> np.ndarray:
    """Gaussian smoothing in grid-index space, weights renormalized at the edges.

    Bandwidth zero is the identity. Constants are preserved exactly up to
    renormalization rounding.
    """
    if bandwidth < 0.0:
        raise ValueError("bandwidth must be non-negative")
    values = np.asarray(values, dtype=float)
    if bandwidth == 0.0:
        return values.copy()
    return _smoothing_matrix(values.shape[0], float(bandwidth)) @ values


def _initial_values(params: ModelParams, grids: Grids) -> ValueFunctions:
    # A positive seller start keeps the first committed/noncommitted acceptance
    # prices apart; matched buyer values start at static trade surplus.
    sellers = grids.seller_values
    buyers = grids.buyer_values
    us = 0.1 * np.maximum(0.0, (1.0 - params.t) * params.F_B.mean - sellers)
    ub = np.zeros_like(buyers)
    vb = np.maximum(0.0, buyers[None, :] - sellers[:, None] / (1.0 - params.t))
    return ValueFunctions(us, ub, vb)


def _walkaway_frac_table(vb: np.ndarray, buyers: np.ndarray, prices: np.ndarray, n_s: int) -> np.ndarray:
    """Walkaway probability F(s*(b, p)) for every (buyer, price) pair.

    Works column by column on the matched buyer value, which is non-increasing
    in the seller index; the cutoff interpolates linearly between grid points,
    so its empirical CDF is (k + 1 + frac) / n directly.
    """
    n_b = buyers.size
    n_p = prices.size
    out = np.empty((n_b, n_p))
    for j in range(n_b):
        col = vb[:, j]
        targets = buyers[j] - prices
        idx = np.searchsorted(-col, -targets, side="right")  # first index with value < target
        frac_num = np.where(idx == 0, 0.0, col[np.clip(idx - 1, 0, n_s - 1)] - targets)
        gap = np.where(
            (idx >= 1) & (idx < n_s),
            col[np.clip(idx - 1, 0, n_s - 1)] - col[np.clip(idx, 0, n_s - 1)],
            1.0,
        )
        frac = np.where(gap > 0.0, frac_num / gap, 0.0)
        level = np.where(idx == 0, 0.0, np.where(idx == n_s, n_s, idx + frac)) / n_s
        out[j] = np.clip(level, 0.0, 1.0)
    return out


def _policy_update(value_fns: ValueFunctions, params: ModelParams, grids: Grids, options: SolverOptions):
    """Best responses to the current values: acceptance prices, buyer actions,
    list prices, and the implied one-step value updates (pre-stabilization)."""
    us, ub, vb = value_fns.seller_unmatched, value_fns.buyer_unmatched, value_fns.buyer_matched
    sellers, buyers, prices = grids.seller_values, grids.buyer_values, grids.prices
    n_s, n_b, n_p = sellers.size, buyers.size, prices.size

    d_R, d_B, d_S = params.delta_R, params.delta_B, params.delta_S

    commit_price = (sellers + us / d_R) / (1.0 - params.t)

    walk = _walkaway_frac_table(vb, buyers, prices, n_s)  # (n_b, n_p)
    w = (1.0 - params.kappa) * walk
    profit = (1.0 - params.t) * prices[None, None, :] - sellers[:, None, None]
    accept = d_B * (w[None, :, :] * us[:, None, None] + (1.0 - w[None, :, :]) * profit)
    ok = accept - us[:, None, None] >= -ACCEPT_ATOL
    has_offer = ok.any(axis=2)
    first_idx = np.argmax(ok, axis=2)
    search_price = np.where(has_offer, prices[first_idx], np.nan)  # (n_s, n_b)

    # buyer action values that do not depend on the list price
    cn_val = d_R**2 * (buyers[None, :] - commit_price[:, None])
    d_val = np.broadcast_to(d_R * ub[None, :], (n_s, n_b))
    if options.counterfactual_full_commitment:
        cs_val = np.full((n_s, n_b), -np.inf)
    else:
        cs_val = np.full((n_s, n_b), -np.inf)
        keep = buyers[None, :] - search_price  # NaN where absent
        for j in range(n_b):
            col = vb[:, j]  # non-increasing
            prefix = np.concatenate(([0.0], np.cumsum(col)))
            x = keep[:, j]
            finite = np.isfinite(x)
            if not finite.any():
                continue
            xf = np.where(finite, x, 0.0)
            cnt = np.searchsorted(-col, -xf, side="left")  # entries strictly above x
            mean_max = (prefix[cnt] + (n_s - cnt) * xf) / n_s
            vals = d_B * mean_max - params.search_cost_pv
            cs_val[finite, j] = vals[finite]

    # best action among CN/CS/D with ties to the later action in D < CS < CN
    non_a_val = d_val.copy()
    non_a_code = np.zeros((n_s, n_b), dtype=np.int8)
    upgrade = cs_val >= non_a_val
    non_a_val = np.where(upgrade, cs_val, non_a_val)
    non_a_code = np.where(upgrade, np.int8(1), non_a_code)
    upgrade = cn_val >= non_a_val
    non_a_val = np.where(upgrade, cn_val, non_a_val)
    non_a_code = np.where(upgrade, np.int8(2), non_a_code)

    # list-price problem: flow is (1-t)p0 - s for A buyers, discounted outside
    # value for counteroffers, undiscounted for declines
    picks_a = buyers[None, :, None] - prices[None, None, :] >= non_a_val[:, :, None]
    flow_a = (1.0 - params.t) * prices[None, :] - sellers[:, None]  # (n_s, n_p)
    flow_non_a = np.where(non_a_code >= 1, d_R * us[:, None], us[:, None])  # (n_s, n_b)
    flows = np.where(picks_a, flow_a[:, None, :], flow_non_a[:, :, None])
    objective = d_S * flows.mean(axis=1)  # (n_s, n_p)
    list_idx = np.argmax(objective, axis=1)  # lowest price wins ties
    list_price = prices[list_idx]
    us_new = objective[np.arange(n_s), list_idx]

    a_val_chosen = buyers[None, :] - list_price[:, None]
    is_a = a_val_chosen >= non_a_val
    action = np.where(is_a, np.int8(3), non_a_code).astype(np.int8)
    vb_new = np.where(is_a, a_val_chosen, non_a_val)
    ub_new = d_B * vb_new.mean(axis=0) - params.search_cost_pv

    policies = Policies(
        list_price=list_price,
        list_price_idx=list_idx,
        commit_price=commit_price,
        search_price=search_price,
        action=action,
    )
    return policies, us_new, ub_new, vb_new


def _relative_change(new: np.ndarray, old: np.ndarray) -> float:
    scale = max(1.0, float(np.max(np.abs(old))))
    return float(np.max(np.abs(new - old))) / scale


def iterate_once(
    value_fns: ValueFunctions,
    params: ModelParams,
    grids: Grids,
    options: SolverOptions,
) -> tuple[ValueFunctions, Policies, dict]:
    """One sweep: best responses, value updates, damping, smoothing, isotonic repair."""
    policies, us_new, ub_new, vb_new = _policy_update(value_fns, params, grids, options)

    if not (np.all(np.isfinite(us_new)) and np.all(np.isfinite(ub_new)) and np.all(np.isfinite(vb_new))):
        raise SolverError(
            "non-finite value produced during iteration",
            state_summary={
                "us_bad": int(np.sum(~np.isfinite(us_new))),
                "ub_bad": int(np.sum(~np.isfinite(ub_new))),
                "vb_bad": int(np.sum(~np.isfinite(vb_new))),
                "us_range": [float(np.nanmin(us_new)), float(np.nanmax(us_new))],
            },
        )

    lam = options.damping
    us_d = lam * us_new + (1.0 - lam) * value_fns.seller_unmatched
    ub_d = lam * ub_new + (1.0 - lam) * value_fns.buyer_unmatched
    vb_d = lam * vb_new + (1.0 - lam) * value_fns.buyer_matched

    # Smoothing runs along seller-indexed dimensions only. Smoothing across
    # the buyer index would transfer value between buyer types, which
    # contaminates the buyer action margins (an isolated cell can then prefer
    # a searching counteroffer inside the committed band) and breaks the
    # monotone action partition.
    bw = options.smoothing_bandwidth
    us_s = smooth_values(us_d, bw)
    ub_s = ub_d
    vb_s = _smoothing_matrix(vb_d.shape[0], bw) @ vb_d if bw > 0.0 else vb_d.copy()

    # keep the matched buyer value non-increasing in the seller value
    for j in range(vb_s.shape[1]):
        col = vb_s[:, j]
        if np.any(np.diff(col) > 0.0):
            vb_s[:, j] = isotonic_regression(col, increasing=False).x

    residuals = {
        "seller": _relative_change(us_s, value_fns.seller_unmatched),
        "buyer": _relative_change(ub_s, value_fns.buyer_unmatched),
    }
    return ValueFunctions(us_s, ub_s, vb_s), policies, residuals


def solve_equilibrium(params: ModelParams, grids: Grids, options: SolverOptions | None = None) -> Equilibrium:
    """Iterate to a stationary equilibrium and return converged values plus the
    best-response policies at those values."""
    options = options or SolverOptions()
    state = _initial_values(params, grids)
    history: list[list[float]] = []
    converged = False
    residuals = {"seller": np.inf, "buyer": np.inf}
    iterations = 0
    for iterations in range(1, options.max_iters + 1):
        state, _, residuals = iterate_once(state, params, grids, options)
        history.append([residuals["seller"], residuals["buyer"]])
        if residuals["seller"] < options.tol and residuals["buyer"] < options.tol:
            converged = True
            break
    if not converged:
        warnings.warn(
            f"no convergence after {iterations} iterations "
            f"(residuals {residuals['seller']:.2e}/{residuals['buyer']:.2e})",
            RuntimeWarning,
        )
    worst = [max(pair) for pair in history]
    if len(worst) >= 8 and max(worst[-3:]) > max(worst[-8:-5]):
        warnings.warn("residual sequence is not decreasing near termination", RuntimeWarning)

    # policies consistent with the final values
    policies, _, _, _ = _policy_update(state, params, grids, options)

    diagnostics: dict = {}
    if options.compute_diagnostics:
        diagnostics = regularity_pass_rates(state, policies, grids, params)

    return Equilibrium(
        params=params,
        grids=grids,
        value_fns=state,
        policies=policies,
        iterations=iterations,
        residuals=residuals,
        converged=converged,
        diagnostics=diagnostics,
        residual_history=history,
    )


def regularity_pass_rates(
    value_fns: ValueFunctions,
    policies: Policies,
    grids: Grids,
    params: ModelParams,
) -> dict:
    """Share of cells with an interior search offer that satisfy the two
    regularity conditions; boundary cells count as unavailable."""
    n_s, n_b = policies.search_price.shape
    available = 0
    steep_ok = 0
    slope_ok = 0
    total = 0
    for i in range(n_s):
        for j in range(n_b):
            p1 = policies.search_price[i, j]
            if not np.isfinite(p1):
                continue
            total += 1
            rep = regularity_diagnostics(i, j, float(p1), value_fns, grids, params)
            if not rep.available:
                continue
            available += 1
            if rep.steepness_slack > 0.0:
                steep_ok += 1
            if rep.slope_slack > 0.0:
                slope_ok += 1
    return {
        "cells_with_search_offer": total,
        "cells_with_diagnostics": available,
        "steepness_pass_rate": steep_ok / available if available else float("nan"),
        "slope_pass_rate": slope_ok / available if available else float("nan"),
    }
