"""Per-state economics: offers, cutoffs, action values, best responses,
regularity diagnostics."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bargainsearch import baseline_params
from bargainsearch.core import (
    ActionValues,
    acceptance_gap,
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
from bargainsearch.grids import ecdf_at
from bargainsearch.params import ModelParams, Normal


def mk_params(**over):
    base = dict(
        lambda_S=0.605, lambda_B=0.678, lambda_R=3.513, r=0.05,
        c=1478.432, t=0.10, kappa=0.687, N_S=4545, N_B=4056,
    )
    base.update(over)
    return ModelParams(**base)


class TestCommittedOffer:
    def test_zero_case(self):
        p = mk_params(t=0.1)
        assert committed_offer(0.0, 0.0, p) == 0.0

    def test_reduces_to_margin(self):
        p = mk_params(t=0.1)
        assert committed_offer(9000.0, 0.0, p) == pytest.approx(10000.0)

    def test_benchmark_arithmetic(self):
        # hand evaluation at the benchmark rates and the median seller
        p = mk_params(lambda_R=3.513, r=0.05, t=0.1)
        assert committed_offer(8740.62, 3338.29, p) == pytest.approx(13473.81, abs=0.5)


class TestWalkawayCutoff:
    def test_constant_row_tie_rule(self):
        sellers = np.linspace(0.0, 10.0, 11)
        row = np.zeros(11)
        # target 0: every seller is (weakly) worth walking to
        assert walkaway_cutoff(5.0, 5.0, row, sellers) == np.inf
        # positive locked-in surplus: nobody is worth walking to
        cut = walkaway_cutoff(6.0, 5.0, row, sellers)
        assert cut == -np.inf
        assert ecdf_at(sellers, cut) == 0.0

    def test_linear_interpolation(self):
        sellers = np.linspace(0.0, 10.0, 11)
        row = np.linspace(100.0, 0.0, 11)
        assert walkaway_cutoff(60.0, 10.0, row, sellers) == pytest.approx(5.0)

    def test_non_monotone_rejected(self):
        sellers = np.linspace(0.0, 10.0, 5)
        row = np.array([5.0, 6.0, 4.0, 3.0, 2.0])
        with pytest.raises(ValueError):
            walkaway_cutoff(1.0, 0.5, row, sellers)

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=25, deadline=None)
    def test_matches_brute_force_scan(self, seed):
        rng = np.random.default_rng(seed)
        n = 30
        sellers = np.sort(rng.uniform(0.0, 10_000.0, n))
        sellers += np.arange(n) * 1e-6  # strictly increasing
        row = np.sort(rng.uniform(-500.0, 5000.0, n))[::-1].copy()
        b = rng.uniform(0.0, 15_000.0)
        p1 = rng.uniform(0.0, 15_000.0)
        cut = walkaway_cutoff(b, p1, row, sellers)
        # oracle: exhaustive scan on a fine refinement of the seller axis
        fine = np.linspace(sellers[0], sellers[-1], 10_000)
        vals = np.interp(fine, sellers, row)
        mask = vals >= b - p1
        if not mask.any():
            assert cut == -np.inf
        elif mask.all() and row[-1] >= b - p1:
            assert cut == np.inf
        else:
            scan = fine[mask].max()
            step = fine[1] - fine[0]
            assert abs(cut - scan) <= step + 1e-9


class TestNoncommittedOffer:
    def test_kappa_one_closed_form(self):
        p = mk_params(kappa=1.0)
        sellers = np.linspace(5000.0, 12000.0, 20)
        row = np.linspace(4000.0, 0.0, 20)
        prices = np.linspace(0.0, 100_000.0, 200)
        s, us, b = 9000.0, 800.0, 20_000.0
        got = noncommitted_offer(s, b, us, row, sellers, p, prices)
        target = (s + us / p.delta_B) / (1.0 - p.t)
        want = prices[np.searchsorted(prices, target - 1e-9)]
        assert got == pytest.approx(want)

    def test_zero_continuation_matches_committed(self):
        p = mk_params()
        sellers = np.linspace(5000.0, 12000.0, 20)
        row = np.linspace(4000.0, 0.0, 20)
        prices = np.linspace(0.0, 100_000.0, 200)
        s, b = 9000.0, 20_000.0
        got = noncommitted_offer(s, b, 0.0, row, sellers, p, prices)
        target = committed_offer(s, 0.0, p)  # s / (1 - t)
        want = prices[np.searchsorted(prices, target - 1e-9)]
        assert got == pytest.approx(want)

    def test_premium_with_interior_cutoff(self):
        # positive continuation value and a walkaway region strictly inside
        # the seller support force a strict premium over the committed price
        p = mk_params()
        sellers = np.linspace(5000.0, 12000.0, 40)
        row = np.linspace(9000.0, 1000.0, 40)
        prices = np.linspace(0.0, 100_000.0, 400)
        s, us, b = 8000.0, 1500.0, 18_000.0
        got = noncommitted_offer(s, b, us, row, sellers, p, prices)
        cut = walkaway_cutoff(b, got, row, sellers)
        assert np.isfinite(cut)
        assert got > committed_offer(s, us, p)


class TestBuyerActions:
    def test_zero_surplus_symmetry(self):
        p = mk_params()
        row = np.zeros(10)
        av = buyer_action_values(100.0, 100.0, 100.0, None, row, 0.0, p)
        assert av.A == 0.0 and av.CN == 0.0 and av.D == 0.0
        assert av.CS == -np.inf

    def test_huge_search_cost_disables_search(self):
        p = mk_params(c=1e9)
        row = np.linspace(50.0, 0.0, 10)
        av = buyer_action_values(100.0, 90.0, 95.0, 60.0, row, 10.0, p)
        assert av.CS < av.D

    def test_cs_matches_monte_carlo(self, small_eq, params):
        # direct Monte Carlo over the seller grid law as integration oracle
        pol, vf, grids = small_eq.policies, small_eq.value_fns, small_eq.grids
        cells = np.argwhere(np.isfinite(pol.search_price))
        i, j = cells[len(cells) // 2]
        b = grids.buyer_values[j]
        row = vf.buyer_matched[:, j]
        av = buyer_action_values(
            b, pol.list_price[i], pol.commit_price[i], pol.search_price[i, j],
            row, vf.buyer_unmatched[j], params,
        )
        rng = np.random.default_rng(0)
        draws = rng.integers(0, row.size, size=1_000_000)
        vals = np.maximum(b - pol.search_price[i, j], row[draws])
        mc = params.delta_B * vals.mean() - params.search_cost_pv
        se = params.delta_B * vals.std() / 1000.0
        assert abs(av.CS - mc) <= 3.0 * se + 1e-9

    def test_best_action_and_ties(self):
        assert buyer_best_action(ActionValues(A=1.0, CN=0.0, CS=0.0, D=0.0)) == "A"
        assert buyer_best_action(ActionValues(A=0.0, CN=0.0, CS=0.0, D=0.0)) == "A"
        assert buyer_best_action(ActionValues(A=-1.0, CN=2.0, CS=2.0, D=0.0)) == "CN"
        assert buyer_best_action(ActionValues(A=-1.0, CN=-2.0, CS=0.5, D=0.5)) == "CS"
        assert buyer_best_action(ActionValues(A=-1.0, CN=-2.0, CS=-np.inf, D=0.0)) == "D"


class TestSellerSide:
    def test_match_value_cases(self):
        p = mk_params(t=0.1)
        assert seller_match_value(5.0, 100.0, "D", 7.0, p) == 7.0
        assert seller_match_value(9000.0, 10_000.0, "A", 1000.0, p) == pytest.approx(0.0)
        assert seller_match_value(0.0, 0.0, "CN", 1000.0, p) == pytest.approx(986.0, abs=0.1)
        with pytest.raises(ValueError):
            seller_match_value(0.0, 0.0, "X", 0.0, p)

    def test_objective_degenerate_cases(self, params):
        sellers = np.linspace(5000.0, 12000.0, 10)
        prices = np.linspace(0.0, 100_000.0, 50)
        from bargainsearch.core import ValueFunctions
        # all buyers decline: valuations far below any price
        buyers = np.linspace(-5e6, -4e6, 8)
        vf = ValueFunctions(
            seller_unmatched=np.full(10, 500.0),
            buyer_unmatched=np.zeros(8),
            buyer_matched=np.zeros((10, 8)),
        )
        s, us = 9000.0, 500.0
        val = seller_objective(50_000.0, s, us, buyers, params, vf, sellers, prices)
        assert val == pytest.approx(params.delta_S * us)
        # all buyers accept: valuations far above, list price low
        buyers_hi = np.linspace(4e6, 5e6, 8)
        vf_hi = ValueFunctions(
            seller_unmatched=np.full(10, 0.0),
            buyer_unmatched=np.zeros(8),
            buyer_matched=np.zeros((10, 8)),
        )
        val = seller_objective(20_000.0, s, 0.0, buyers_hi, params, vf_hi, sellers, prices)
        assert val == pytest.approx(params.delta_S * ((1 - params.t) * 20_000.0 - s))

    def test_converged_price_is_grid_argmax(self, small_eq, params):
        grids = small_eq.grids
        vf = small_eq.value_fns
        pol = small_eq.policies
        for i in (0, grids.n_sellers // 2, grids.n_sellers - 1):
            s = grids.seller_values[i]
            us = vf.seller_unmatched[i]
            at_policy = seller_objective(
                pol.list_price[i], s, us, grids.buyer_values, params, vf,
                grids.seller_values, grids.prices,
            )
            row = [np.nan if not np.isfinite(v) else float(v) for v in pol.search_price[i]]
            for p0 in grids.prices[:: max(1, grids.n_prices // 25)]:
                other = seller_objective(
                    float(p0), s, us, grids.buyer_values, params, vf,
                    grids.seller_values, grids.prices,
                    commit_price=pol.commit_price[i],
                    search_price_row=np.asarray(row),
                )
                assert at_policy >= other - 1e-6 * max(1.0, abs(other))

    def test_best_price_degenerate_grid(self, params):
        from bargainsearch.core import ValueFunctions
        sellers = np.linspace(5000.0, 12000.0, 5)
        buyers = np.linspace(-10_000.0, 60_000.0, 6)
        vf = ValueFunctions(np.zeros(5), np.zeros(6), np.zeros((5, 6)))
        only = np.array([15_000.0])
        assert seller_best_price(8000.0, 0.0, buyers, params, vf, sellers, only) == 15_000.0

    def test_best_price_monotone_in_seller_value(self, params):
        from bargainsearch.core import ValueFunctions
        sellers = np.linspace(5000.0, 12000.0, 12)
        buyers = np.linspace(-20_000.0, 80_000.0, 15)
        vb = np.maximum(0.0, buyers[None, :] - sellers[:, None] / 0.9)
        vf = ValueFunctions(np.full(12, 800.0), np.zeros(15), vb)
        prices = np.linspace(0.0, 40_000.0, 60)
        last = -np.inf
        for s in (6000.0, 8000.0, 10_000.0):
            p = seller_best_price(s, 800.0, buyers, params, vf, sellers, prices)
            assert p >= last - 1e-9
            last = p


class TestRegularity:
    def test_kappa_one_limits(self, small_eq):
        p1 = mk_params(kappa=1.0)
        grids = small_eq.grids
        vf = small_eq.value_fns
        pol = small_eq.policies
        cells = np.argwhere(np.isfinite(pol.search_price))
        mid = cells[len(cells) // 2]
        rep = regularity_diagnostics(int(mid[0]), int(mid[1]),
                                     float(pol.search_price[mid[0], mid[1]]), vf, grids, p1)
        if rep.available:
            assert rep.d_accept_d_buyer == pytest.approx(0.0, abs=1e-12)
            assert rep.d_accept_d_price == pytest.approx(p1.delta_B * (1 - p1.t), rel=1e-9)
            assert rep.steepness_slack > 0.0
            assert rep.slope_slack > 0.0

    def test_matches_symbolic_rederivation(self, small_eq, params):
        # independent re-evaluation of the two sensitivity formulas
        grids = small_eq.grids
        vf = small_eq.value_fns
        pol = small_eq.policies
        sellers, buyers, prices = grids.seller_values, grids.buyer_values, grids.prices
        cells = np.argwhere(np.isfinite(pol.search_price[:, 1:-1]))
        rng = np.random.default_rng(5)
        n = sellers.size
        checked = 0
        for i, j0 in cells[rng.choice(len(cells), size=min(20, len(cells)), replace=False)]:
            j = j0 + 1
            p1 = float(pol.search_price[i, j])
            rep = regularity_diagnostics(int(i), int(j), p1, vf, grids, params)
            if not rep.available:
                continue
            checked += 1
            dp = prices[1] - prices[0]
            cut = walkaway_cutoff(buyers[j], p1, vf.buyer_matched[:, j], sellers)
            cut_bp = walkaway_cutoff(buyers[j + 1], p1, vf.buyer_matched[:, j + 1], sellers)
            cut_bm = walkaway_cutoff(buyers[j - 1], p1, vf.buyer_matched[:, j - 1], sellers)
            cut_pp = walkaway_cutoff(buyers[j], p1 + dp, vf.buyer_matched[:, j], sellers)
            cut_pm = walkaway_cutoff(buyers[j], p1 - dp, vf.buyer_matched[:, j], sellers)
            k = int(np.searchsorted(sellers, cut, side="right"))
            dens = (1.0 / n) / (sellers[min(k, n - 1)] - sellers[min(k, n - 1) - 1]) if 0 < k < n else 0.0
            F = float(ecdf_at(sellers, cut))
            gap = vf.seller_unmatched[i] - (1 - params.t) * p1 + sellers[i]
            hb = params.delta_B * (1 - params.kappa) * dens * (
                (cut_bp - cut_bm) / (buyers[j + 1] - buyers[j - 1])
            ) * gap
            hp = params.delta_B * (
                (1 - params.t) * (1 - (1 - params.kappa) * F)
                + (1 - params.kappa) * dens * ((cut_pp - cut_pm) / (2 * dp)) * gap
            )
            assert rep.d_accept_d_buyer == pytest.approx(hb, rel=1e-9, abs=1e-12)
            assert rep.d_accept_d_price == pytest.approx(hp, rel=1e-9, abs=1e-12)
        assert checked >= 5

    def test_positive_slope_slack_implies_offer_non_increasing(self, small_eq, params):
        grids = small_eq.grids
        vf = small_eq.value_fns
        pol = small_eq.policies
        n_s, n_b = pol.search_price.shape
        checked = 0
        for i in range(n_s):
            for j in range(1, n_b - 1):
                p1 = pol.search_price[i, j]
                nxt = pol.search_price[i, j + 1]
                if not (np.isfinite(p1) and np.isfinite(nxt)):
                    continue
                rep = regularity_diagnostics(i, j, float(p1), vf, grids, params)
                if rep.available and rep.slope_slack > 0:
                    checked += 1
                    assert nxt <= p1 + 1e-9
        assert checked > 50


class TestEquilibriumInvariants:
    def test_delta_identities(self):
        p = mk_params()
        assert 0 < p.delta_B < p.delta_R < 1

    def test_commitment_premium(self, small_eq):
        pol = small_eq.policies
        p1n = np.broadcast_to(pol.commit_price[:, None], pol.search_price.shape)
        mask = np.isfinite(pol.search_price)
        assert np.all(pol.search_price[mask] >= p1n[mask] - 1e-6)

    def test_monotone_partition(self, small_eq):
        act = small_eq.policies.action.astype(int)
        assert np.all(np.diff(act, axis=1) >= 0)

    def test_acceptance_tightness(self, small_eq, params):
        grids = small_eq.grids
        pol, vf = small_eq.policies, small_eq.value_fns
        step = grids.prices[1] - grids.prices[0]
        checked = 0
        for i in range(0, grids.n_sellers, 5):
            for j in range(0, grids.n_buyers, 5):
                p1 = pol.search_price[i, j]
                if not np.isfinite(p1) or p1 < step / 2:
                    continue
                checked += 1
                s = grids.seller_values[i]
                b = grids.buyer_values[j]
                us = vf.seller_unmatched[i]
                row = vf.buyer_matched[:, j]
                cut_at = walkaway_cutoff(b, float(p1), row, grids.seller_values)
                assert acceptance_gap(float(p1), s, us,
                                      float(ecdf_at(grids.seller_values, cut_at)), params) >= -1e-6
                lower = float(p1) - step
                cut_lo = walkaway_cutoff(b, lower, row, grids.seller_values)
                assert acceptance_gap(lower, s, us,
                                      float(ecdf_at(grids.seller_values, cut_lo)), params) < -1e-6
        assert checked > 20
