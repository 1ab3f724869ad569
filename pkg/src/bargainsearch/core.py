"""Per-state economics of the bargaining-with-search market.

A matched buyer picks one of four actions: buy at the list price (A), make a
committed counteroffer (CN), make a counteroffer while continuing to search
(CS), or decline (D). Sellers accept a counteroffer exactly when the expected
payoff from accepting weakly beats declining; the committed acceptance price
has a closed form, the noncommitted one is found on the price grid because the
walkaway risk depends on the buyer's outside options.

Everything here is a pure function of explicit inputs and safe to evaluate in
parallel across grid cells. The solver has its own vectorized versions of
these computations; tests cross-check the two paths cell by cell.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .grids import ecdf_at, edensity_at
from .params import ModelParams

# Buyer actions in increasing order of buyer valuation (ties break toward the
# later action). Integer codes follow this order, so a monotone action
# partition in b is simply a non-decreasing code sequence.
ACTIONS = ("D", "CS", "CN", "A")
ACTION_CODE = {name: i for i, name in enumerate(ACTIONS)}

# Absolute slack (yen) when checking the seller acceptance inequality on the
# grid; covers float noise between scalar and vectorized evaluation orders.
ACCEPT_ATOL = 1e-6


class ActionValues(NamedTuple):
    A: float
    CN: float
    CS: float
    D: float


@dataclass
class ValueFunctions:
    """Converged or in-progress value functions on the grids."""

    seller_unmatched: np.ndarray  # (n_s,)  value of an unmatched seller
    buyer_unmatched: np.ndarray   # (n_b,)  value of an unmatched buyer
    buyer_matched: np.ndarray     # (n_s, n_b)  value of a buyer matched to seller s

    def copy(self) -> "ValueFunctions":
        return ValueFunctions(
            self.seller_unmatched.copy(),
            self.buyer_unmatched.copy(),
            self.buyer_matched.copy(),
        )


@dataclass
class Policies:
    """Equilibrium policy objects on the grids.

    search_price is NaN where no grid price makes the seller accept; the CS
    action is disabled there. action holds integer codes per ACTIONS.
    """

    list_price: np.ndarray        # (n_s,)
    list_price_idx: np.ndarray    # (n_s,) int
    commit_price: np.ndarray      # (n_s,)
    search_price: np.ndarray      # (n_s, n_b), NaN = absent
    action: np.ndarray            # (n_s, n_b) int8 codes into ACTIONS


def committed_offer(s: float, us: float, params: ModelParams) -> float:
    """Lowest counteroffer a seller accepts from a committed buyer."""
    return (s + us / params.delta_R) / (1.0 - params.t)


def walkaway_cutoff(b: float, p1: float, vb_row: np.ndarray, seller_values: np.ndarray) -> float:
    """Seller value below which the buyer abandons an accepted offer at p1.

    The buyer walks away from the standing deal exactly when the new match is
    worth at least the locked-in surplus b - p1; with matched values
    non-increasing in the seller value, that is a cutoff in the seller
    dimension. Linear interpolation between grid points; ties resolve to the
    largest seller value still worth walking to.

    Returns -inf when even the best grid seller is not worth walking to
    (walkaway probability 0) and +inf when every grid seller is (probability
    1), so the empirical CDF evaluates the markers correctly.
    """
    vb_row = np.asarray(vb_row, dtype=float)
    if vb_row.ndim != 1 or vb_row.size != seller_values.size:
        raise ValueError("vb_row must be a vector over the seller grid")
    diffs = np.diff(vb_row)
    if diffs.size and diffs.max() > 1e-9 * max(1.0, float(np.abs(vb_row).max())):
        raise ValueError("matched buyer values must be non-increasing in the seller value")

    target = b - p1
    if vb_row[-1] >= target:
        return np.inf
    if vb_row[0] < target:
        return -np.inf
    # first index where value drops strictly below target
    idx = int(np.searchsorted(-vb_row, -target, side="right"))
    k = idx - 1
    gap = vb_row[k] - vb_row[idx]
    frac = 0.0 if gap <= 0.0 else (vb_row[k] - target) / gap
    return float(seller_values[k] + frac * (seller_values[idx] - seller_values[k]))


def acceptance_gap(
    p1: float,
    s: float,
    us: float,
    walk_prob: float,
    params: ModelParams,
) -> float:
    """Seller's accept-minus-decline payoff for a noncommitted offer at p1."""
    w = (1.0 - params.kappa) * walk_prob
    accept = params.delta_B * (w * us + (1.0 - w) * ((1.0 - params.t) * p1 - s))
    return accept - us


def noncommitted_offer(
    s: float,
    b: float,
    us: float,
    vb_row: np.ndarray,
    seller_values: np.ndarray,
    params: ModelParams,
    price_grid: np.ndarray,
) -> float | None:
    """Lowest grid price a searching buyer can offer and still be accepted.

    Scans the price grid upward and returns the first price at which the
    seller's expected payoff from accepting (walkaway risk included) weakly
    beats declining; None when no grid price clears the bar, which disables
    the CS action in that cell.
    """
    for p1 in price_grid:
        cut = walkaway_cutoff(b, float(p1), vb_row, seller_values)
        walk_prob = float(ecdf_at(seller_values, cut))
        if acceptance_gap(float(p1), s, us, walk_prob, params) >= -ACCEPT_ATOL:
            return float(p1)
    return None


def buyer_action_values(
    b: float,
    p0: float,
    p1_commit: float,
    p1_search: float | None,
    vb_row: np.ndarray,
    ub: float,
    params: ModelParams,
) -> ActionValues:
    """Value of each buyer action upon matching.

    vb_row is the buyer's matched value across the seller grid (used both for
    the walkaway option inside CS and, upstream, for the cutoff); ub is the
    buyer's unmatched value. CS is -inf when no acceptable search offer
    exists.
    """
    a_val = b - p0
    cn_val = params.delta_R**2 * (b - p1_commit)
    if p1_search is None or not np.isfinite(p1_search):
        cs_val = -np.inf
    else:
        keep = b - p1_search
        cs_val = params.delta_B * float(np.mean(np.maximum(keep, vb_row))) - params.search_cost_pv
    d_val = params.delta_R * ub
    return ActionValues(A=a_val, CN=cn_val, CS=cs_val, D=d_val)


def buyer_best_action(values: ActionValues) -> str:
    """Argmax action; ties go to the action later in D < CS < CN < A."""
    best = "D"
    best_val = values.D
    for name, val in (("CS", values.CS), ("CN", values.CN), ("A", values.A)):
        if val >= best_val:
            best, best_val = name, val
    return best


def seller_match_value(s: float, p0: float, chi: str, us: float, params: ModelParams) -> float:
    """Seller's continuation value from a match, given the buyer's action."""
    if chi == "A":
        return (1.0 - params.t) * p0 - s
    if chi in ("CN", "CS"):
        return params.delta_R * us
    if chi == "D":
        return us
    raise ValueError(f"unknown action {chi!r}")


def seller_objective(
    p0: float,
    s: float,
    us: float,
    buyer_values: np.ndarray,
    params: ModelParams,
    value_fns: ValueFunctions,
    seller_values: np.ndarray,
    price_grid: np.ndarray,
    commit_price: float | None = None,
    search_price_row: np.ndarray | None = None,
) -> float:
    """Expected discounted seller value of posting list price p0.

    Buyer best responses are derived from the given value functions; the
    committed/noncommitted acceptance prices can be passed in to avoid
    recomputing them across candidate list prices.
    """
    if commit_price is None:
        commit_price = committed_offer(s, us, params)
    vb = value_fns.buyer_matched
    flows = np.empty(buyer_values.size)
    for j, b in enumerate(buyer_values):
        if search_price_row is None:
            p1s = noncommitted_offer(s, float(b), us, vb[:, j], seller_values, params, price_grid)
        else:
            raw = search_price_row[j]
            p1s = None if not np.isfinite(raw) else float(raw)
        av = buyer_action_values(
            float(b), p0, commit_price, p1s, vb[:, j], float(value_fns.buyer_unmatched[j]), params
        )
        flows[j] = seller_match_value(s, p0, buyer_best_action(av), us, params)
    return params.delta_S * float(np.mean(flows))


def seller_best_price(
    s: float,
    us: float,
    buyer_values: np.ndarray,
    params: ModelParams,
    value_fns: ValueFunctions,
    seller_values: np.ndarray,
    price_grid: np.ndarray,
) -> float:
    """Grid list price maximizing the seller objective; ties go to the lowest price."""
    commit_price = committed_offer(s, us, params)
    vb = value_fns.buyer_matched
    row = np.empty(buyer_values.size)
    for j, b in enumerate(buyer_values):
        p1s = noncommitted_offer(s, float(b), us, vb[:, j], seller_values, params, price_grid)
        row[j] = np.nan if p1s is None else p1s
    best_p, best_val = None, -np.inf
    for p0 in price_grid:
        val = seller_objective(
            float(p0), s, us, buyer_values, params, value_fns, seller_values, price_grid,
            commit_price=commit_price, search_price_row=row,
        )
        if val > best_val:
            best_p, best_val = float(p0), val
    return best_p


@dataclass
class RegularityReport:
    """Numerical check of the two regularity conditions behind the monotone
    action partition and the downward slope of the search offer in b.

    accept_gap:       seller accept-minus-decline payoff at the offer (≈ 0).
    d_accept_d_buyer: sensitivity of the acceptance function to b (H_b).
    d_accept_d_price: sensitivity to the offer price (H_p1).
    steepness_lhs/rhs: the bounded-steepness condition lhs < rhs; slack = rhs - lhs.
    slope_slack:      H_p1 itself; positive means the price slope condition holds.
    """

    available: bool
    accept_gap: float = np.nan
    d_accept_d_buyer: float = np.nan
    d_accept_d_price: float = np.nan
    steepness_lhs: float = np.nan
    steepness_rhs: float = np.nan
    steepness_slack: float = np.nan
    slope_slack: float = np.nan


def regularity_diagnostics(
    s_idx: int,
    b_idx: int,
    p1: float,
    value_fns: ValueFunctions,
    grids,
    params: ModelParams,
) -> RegularityReport:
    """Finite-difference regularity diagnostics at one (seller, buyer) cell.

    Cutoff derivatives use centered differences with steps of one buyer-grid
    and one price-grid spacing. Cells whose stencil leaves the grids or whose
    cutoffs are off the seller support report available=False rather than
    extrapolating.
    """
    sellers = grids.seller_values
    buyers = grids.buyer_values
    prices = grids.prices
    n_b = buyers.size
    rhs = params.delta_R**2 / params.delta_B - 1.0
    if b_idx < 1 or b_idx > n_b - 2 or not np.isfinite(p1):
        return RegularityReport(available=False, steepness_rhs=rhs)
    dp = prices[1] - prices[0]
    if p1 - dp < prices[0] - 1e-9 or p1 + dp > prices[-1] + 1e-9:
        return RegularityReport(available=False, steepness_rhs=rhs)

    vb = value_fns.buyer_matched
    b = float(buyers[b_idx])
    s = float(sellers[s_idx])
    us = float(value_fns.seller_unmatched[s_idx])

    cut0 = walkaway_cutoff(b, p1, vb[:, b_idx], sellers)
    cut_bp = walkaway_cutoff(float(buyers[b_idx + 1]), p1, vb[:, b_idx + 1], sellers)
    cut_bm = walkaway_cutoff(float(buyers[b_idx - 1]), p1, vb[:, b_idx - 1], sellers)
    cut_pp = walkaway_cutoff(b, p1 + dp, vb[:, b_idx], sellers)
    cut_pm = walkaway_cutoff(b, p1 - dp, vb[:, b_idx], sellers)
    if not all(np.isfinite(v) for v in (cut0, cut_bp, cut_bm, cut_pp, cut_pm)):
        return RegularityReport(available=False, steepness_rhs=rhs)

    ds_db = (cut_bp - cut_bm) / (buyers[b_idx + 1] - buyers[b_idx - 1])
    ds_dp = (cut_pp - cut_pm) / (2.0 * dp)
    F = float(ecdf_at(sellers, cut0))
    f = float(edensity_at(sellers, cut0))
    surplus_gap = us - (1.0 - params.t) * p1 + s
    h_b = params.delta_B * (1.0 - params.kappa) * f * ds_db * surplus_gap
    h_p1 = params.delta_B * (
        (1.0 - params.t) * (1.0 - (1.0 - params.kappa) * F)
        + (1.0 - params.kappa) * f * ds_dp * surplus_gap
    )
    gap = acceptance_gap(p1, s, us, F, params)
    if h_p1 == 0.0:
        return RegularityReport(
            available=False, accept_gap=gap, d_accept_d_buyer=h_b,
            d_accept_d_price=h_p1, steepness_rhs=rhs, slope_slack=h_p1,
        )
    lhs = (1.0 - F) * h_b / h_p1
    return RegularityReport(
        available=True,
        accept_gap=gap,
        d_accept_d_buyer=h_b,
        d_accept_d_price=h_p1,
        steepness_lhs=lhs,
        steepness_rhs=rhs,
        steepness_slack=rhs - lhs,
        slope_slack=h_p1,
    )
