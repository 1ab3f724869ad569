"""Welfare accounting for a solved equilibrium.

Seller welfare is the unmatched seller value, buyer welfare the unmatched
buyer value, platform welfare the expected discounted commission from a
match. Totals are per listing: sellers plus buyers scaled by the buyer/seller
ratio plus platform. Quartile rows average over the grid draws falling in
each quarter of the sorted grids.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .core import walkaway_cutoff
from .grids import ecdf_at
from .params import ModelParams
from .solver import Equilibrium

WELFARE_SCHEMA_VERSION = "bargainsearch-welfare-v1"


@dataclass
class WelfareReport:
    total: float
    seller_overall: float
    seller_by_quartile: list
    buyer_overall: float
    buyer_by_quartile: list
    platform_overall: float
    action_shares: dict                      # keys A, C, D
    action_shares_by_quartile: list          # per seller quartile
    mean_list_price: float
    mean_list_price_by_quartile: list
    mean_counter_price: float                # pooled accepted counteroffer
    mean_counter_price_by_quartile: list
    buyer_seller_ratio: float
    grid_fingerprint: tuple = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "schema_version": WELFARE_SCHEMA_VERSION,
            "total": self.total,
            "seller_overall": self.seller_overall,
            "seller_by_quartile": list(self.seller_by_quartile),
            "buyer_overall": self.buyer_overall,
            "buyer_by_quartile": list(self.buyer_by_quartile),
            "platform_overall": self.platform_overall,
            "action_shares": dict(self.action_shares),
            "action_shares_by_quartile": [dict(d) for d in self.action_shares_by_quartile],
            "mean_list_price": self.mean_list_price,
            "mean_list_price_by_quartile": list(self.mean_list_price_by_quartile),
            "mean_counter_price": self.mean_counter_price,
            "mean_counter_price_by_quartile": list(self.mean_counter_price_by_quartile),
            "buyer_seller_ratio": self.buyer_seller_ratio,
            "grid_fingerprint": list(self.grid_fingerprint),
        }


def _quartile_slices(n: int) -> list[slice]:
    bounds = [round(k * n / 4) for k in range(5)]
    return [slice(bounds[k], bounds[k + 1]) for k in range(4)]


def platform_value(s_idx: int, b_idx: int, equilibrium: Equilibrium, params: ModelParams) -> float:
    """Expected discounted commission from the match (s_idx, b_idx).

    Action probabilities are degenerate given the policy: the list price for
    A, the discounted committed price for CN, and for CS the search offer
    scaled by the probability the deal actually closes (the walkaway
    probability is offset by the chance of a post-walkaway trade).
    """
    pol = equilibrium.policies
    chi = int(pol.action[s_idx, b_idx])
    if chi == 0:  # D
        return 0.0
    if chi == 3:  # A
        return params.t * float(pol.list_price[s_idx])
    if chi == 2:  # CN
        return params.t * params.delta_R * float(pol.commit_price[s_idx])
    # CS
    p1 = float(pol.search_price[s_idx, b_idx])
    sellers = equilibrium.grids.seller_values
    b = float(equilibrium.grids.buyer_values[b_idx])
    cut = walkaway_cutoff(b, p1, equilibrium.value_fns.buyer_matched[:, b_idx], sellers)
    walk = float(ecdf_at(sellers, cut))
    close = 1.0 - (1.0 - params.kappa) * walk
    return params.t * params.delta_B * close * p1


def welfare_report(equilibrium: Equilibrium, params: ModelParams) -> WelfareReport:
    """Welfare, action shares, and price summaries, overall and by quartile."""
    us = equilibrium.value_fns.seller_unmatched
    ub = equilibrium.value_fns.buyer_unmatched
    pol = equilibrium.policies
    grids = equilibrium.grids
    n_s, n_b = pol.action.shape
    ratio = params.N_B / params.N_S

    plat = np.empty((n_s, n_b))
    for i in range(n_s):
        for j in range(n_b):
            plat[i, j] = platform_value(i, j, equilibrium, params)

    s_slices = _quartile_slices(n_s)
    b_slices = _quartile_slices(n_b)

    act = pol.action
    is_c = (act == 1) | (act == 2)
    counter = np.where(
        act == 2, pol.commit_price[:, None], np.where(act == 1, pol.search_price, np.nan)
    )

    def shares(rows: slice) -> dict:
        block = act[rows]
        return {
            "A": float((block == 3).mean()),
            "C": float(((block == 1) | (block == 2)).mean()),
            "D": float((block == 0).mean()),
        }

    def pooled_counter(rows: slice) -> float:
        mask = is_c[rows]
        return float(counter[rows][mask].mean()) if mask.any() else float("nan")

    seller_q = [float(us[sl].mean()) for sl in s_slices]
    buyer_q = [float(ub[sl].mean()) for sl in b_slices]
    seller_overall = float(us.mean())
    buyer_overall = float(ub.mean())
    platform_overall = float(plat.mean())

    return WelfareReport(
        total=seller_overall + ratio * buyer_overall + platform_overall,
        seller_overall=seller_overall,
        seller_by_quartile=seller_q,
        buyer_overall=buyer_overall,
        buyer_by_quartile=buyer_q,
        platform_overall=platform_overall,
        action_shares=shares(slice(None)),
        action_shares_by_quartile=[shares(sl) for sl in s_slices],
        mean_list_price=float(pol.list_price.mean()),
        mean_list_price_by_quartile=[float(pol.list_price[sl].mean()) for sl in s_slices],
        mean_counter_price=pooled_counter(slice(None)),
        mean_counter_price_by_quartile=[pooled_counter(sl) for sl in s_slices],
        buyer_seller_ratio=ratio,
        grid_fingerprint=(
            grids.seed,
            n_s,
            n_b,
            float(grids.seller_values[0]),
            float(grids.buyer_values[-1]),
        ),
    )


def counterfactual_compare(baseline: WelfareReport, counterfactual: WelfareReport) -> dict:
    """Elementwise counterfactual-minus-baseline differences."""
    if baseline.grid_fingerprint != counterfactual.grid_fingerprint:
        raise ValueError("welfare reports were computed on different grids")
    diff = {
        "total": counterfactual.total - baseline.total,
        "seller_overall": counterfactual.seller_overall - baseline.seller_overall,
        "seller_by_quartile": [
            c - b for c, b in zip(counterfactual.seller_by_quartile, baseline.seller_by_quartile)
        ],
        "buyer_overall": counterfactual.buyer_overall - baseline.buyer_overall,
        "buyer_by_quartile": [
            c - b for c, b in zip(counterfactual.buyer_by_quartile, baseline.buyer_by_quartile)
        ],
        "platform_overall": counterfactual.platform_overall - baseline.platform_overall,
        "action_shares": {
            k: counterfactual.action_shares[k] - baseline.action_shares[k] for k in ("A", "C", "D")
        },
        "mean_list_price": counterfactual.mean_list_price - baseline.mean_list_price,
        "mean_counter_price": counterfactual.mean_counter_price - baseline.mean_counter_price,
    }
    return diff


def welfare_table_csv(baseline: WelfareReport, counterfactual: WelfareReport | None = None) -> str:
    """Baseline / counterfactual / difference welfare table as CSV text."""
    diff = counterfactual_compare(baseline, counterfactual) if counterfactual is not None else None
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["row", "baseline", "counterfactual", "difference"])

    def row(name: str, b: float, c: float | None, d: float | None):
        w.writerow([name, f"{b:.4f}", "" if c is None else f"{c:.4f}", "" if d is None else f"{d:.4f}"])

    cf = counterfactual
    row("total", baseline.total, cf.total if cf else None, diff["total"] if diff else None)
    row("seller_overall", baseline.seller_overall, cf.seller_overall if cf else None,
        diff["seller_overall"] if diff else None)
    for k in range(4):
        row(f"seller_q{k + 1}", baseline.seller_by_quartile[k],
            cf.seller_by_quartile[k] if cf else None,
            diff["seller_by_quartile"][k] if diff else None)
    row("buyer_overall", baseline.buyer_overall, cf.buyer_overall if cf else None,
        diff["buyer_overall"] if diff else None)
    for k in range(4):
        row(f"buyer_q{k + 1}", baseline.buyer_by_quartile[k],
            cf.buyer_by_quartile[k] if cf else None,
            diff["buyer_by_quartile"][k] if diff else None)
    row("platform_overall", baseline.platform_overall, cf.platform_overall if cf else None,
        diff["platform_overall"] if diff else None)
    return buf.getvalue()


def actions_table_csv(baseline: WelfareReport, counterfactual: WelfareReport | None = None) -> str:
    """Action shares and prices by seller quartile as CSV text."""
    buf = io.StringIO()
    w = csv.writer(buf)
    header = ["row", "A", "C", "D", "list_price", "counter_price"]
    if counterfactual is not None:
        header += ["dA", "dC", "dD", "d_list_price", "d_counter_price"]
    w.writerow(header)

    def emit(name, sh, p0, p1, sh_cf=None, p0_cf=None, p1_cf=None):
        vals = [name, f"{sh['A']:.4f}", f"{sh['C']:.4f}", f"{sh['D']:.4f}", f"{p0:.2f}", f"{p1:.2f}"]
        if sh_cf is not None:
            vals += [
                f"{sh_cf['A'] - sh['A']:+.4f}",
                f"{sh_cf['C'] - sh['C']:+.4f}",
                f"{sh_cf['D'] - sh['D']:+.4f}",
                f"{p0_cf - p0:+.2f}",
                f"{p1_cf - p1:+.2f}",
            ]
        w.writerow(vals)

    cf = counterfactual
    emit(
        "overall", baseline.action_shares, baseline.mean_list_price, baseline.mean_counter_price,
        cf.action_shares if cf else None,
        cf.mean_list_price if cf else None,
        cf.mean_counter_price if cf else None,
    )
    for k in range(4):
        emit(
            f"q{k + 1}",
            baseline.action_shares_by_quartile[k],
            baseline.mean_list_price_by_quartile[k],
            baseline.mean_counter_price_by_quartile[k],
            cf.action_shares_by_quartile[k] if cf else None,
            cf.mean_list_price_by_quartile[k] if cf else None,
            cf.mean_counter_price_by_quartile[k] if cf else None,
        )
    return buf.getvalue()
