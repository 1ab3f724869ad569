"""Structural estimation from marketplace event logs.

The pipeline mirrors the constructive identification of the model: arrival
rates from observed buyer arrivals and post-counteroffer purchase delays,
seller valuations by inverting the committed-offer and discounted-payoff
relations into pseudovalues, buyer valuations from the accept/counter margin
fitted to a normal CDF, and the search cost from the search/no-search
indifference of the marginal noncommitted buyer.

Latent seller types are everywhere proxied by the observable list price
(licensed by monotone list pricing). Conditional expectations are local
linear regressions with a Gaussian kernel and a normal-reference bandwidth;
inverted duration regressions use Duan's smearing correction. The list price
takes finitely many values on a grid, so internal curve evaluations happen at
the unique observed list prices (exact cell-level fits); exported diagnostic
curves are reported at the observed list-price deciles.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.stats import norm

from .simulate import Event, EventLog, extract_records

ESTIMATE_SCHEMA_VERSION = "bargainsearch-estimate-v1"

TEN_MINUTES_DAYS = 10.0 / (24.0 * 60.0)
EXPOSURE_CAP_DAYS = 30.0
WALKAWAY_RESALE_WINDOW_DAYS = 1.5
SEARCH_COST_BINS = 50
SEARCH_COST_QUANTILE_BAND = (0.001, 0.05)


class EstimationError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# numerical utilities

@dataclass
class ConditionalCurve:
    """A fitted conditional-expectation curve E[y | x] at evaluation points."""

    x0: np.ndarray
    fitted: np.ndarray
    bandwidth: float
    local_constant_flags: np.ndarray  # True where the local design was singular

    def __call__(self, x) -> np.ndarray | float:
        return np.interp(x, self.x0, self.fitted)


def rule_of_thumb_bandwidth(x: np.ndarray) -> float:
    """Normal-reference bandwidth 1.06 sd(x) n^(-1/5)."""
    x = np.asarray(x, dtype=float)
    return 1.06 * float(np.std(x)) * x.size ** (-0.2)


def local_linear_regress(
    x: np.ndarray,
    y: np.ndarray,
    x0: np.ndarray,
    bandwidth: float | None = None,
) -> ConditionalCurve:
    """Local linear regression with a Gaussian kernel.

    At each evaluation point the fit is the intercept of a weighted least
    squares line in (x - x0). Where the local design is singular (all mass on
    one x value) the fit falls back to the local constant and is flagged.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x.size < 3:
        raise EstimationError("local linear regression needs at least 3 observations")
    if bandwidth is None:
        bandwidth = rule_of_thumb_bandwidth(x)
    if bandwidth <= 0.0:
        raise EstimationError("bandwidth must be positive")

    fitted = np.empty(x0.size)
    flags = np.zeros(x0.size, dtype=bool)
    for k, point in enumerate(x0):
        d = (x - point) / bandwidth
        w = np.exp(-0.5 * d * d)
        s0 = w.sum()
        if s0 <= 0.0 or not np.isfinite(s0):
            # no effective mass near the point; widen to a global fit
            w = np.ones_like(x)
            s0 = w.sum()
            flags[k] = True
        s1 = float(np.sum(w * d))
        s2 = float(np.sum(w * d * d))
        t0 = float(np.sum(w * y))
        t1 = float(np.sum(w * d * y))
        denom = s0 * s2 - s1 * s1
        if denom <= 1e-12 * s0 * max(s2, 1e-300):
            fitted[k] = t0 / s0
            flags[k] = True
        else:
            fitted[k] = (s2 * t0 - s1 * t1) / denom
    return ConditionalCurve(x0=x0, fitted=fitted, bandwidth=float(bandwidth), local_constant_flags=flags)


def duan_smearing_mean(log_values: np.ndarray, log_fit_at_obs: np.ndarray):
    """Smearing factor for inverting a regression of log durations.

    Returns mean(exp(residual)); multiply exp(fitted log) by it to estimate
    the level expectation without assuming normal errors.
    """
    resid = np.asarray(log_values, dtype=float) - np.asarray(log_fit_at_obs, dtype=float)
    return float(np.mean(np.exp(resid)))


# ---------------------------------------------------------------------------
# arrival rates

def estimate_lambda_S(listings: dict, cap: float = EXPOSURE_CAP_DAYS) -> float:
    """Buyer arrival rate: total matches over total exposure, both truncated
    at the cap. Pure likes count as (unobservable) matches."""
    arrivals = 0
    exposure = 0.0
    for rec in listings.values():
        if rec.sale_time is not None:
            cutoff = min(rec.sale_time, cap)
        else:
            last = max(rec.arrival_times + rec.like_times, default=0.0)
            cutoff = min(max(last, cap), cap)
        arrivals += sum(1 for t in rec.arrival_times if t <= cutoff)
        arrivals += sum(1 for t in rec.like_times if t <= cutoff)
        exposure += cutoff
    if exposure <= 0.0:
        raise EstimationError("zero total exposure; cannot estimate the arrival rate")
    return arrivals / exposure


def estimate_lambda_R(listings: dict) -> float:
    """Response rate from committed counteroffers: the offer-to-purchase delay
    spans two response arrivals, so the rate is 2 over the mean delay."""
    delays = []
    for rec in listings.values():
        for m in rec.matches:
            if m.action == "CN" and m.purchase_time is not None:
                delays.append(m.purchase_time - m.time)
    if not delays:
        raise EstimationError("no completed committed counteroffers in the log")
    return 2.0 / float(np.mean(delays))


def estimate_lambda_B(lambda_S_hat: float, N_S: int, N_B: int) -> float:
    """Seller arrival rate to buyers from the meeting-flow balance."""
    if N_B <= 0:
        raise EstimationError("N_B must be positive")
    return lambda_S_hat * N_S / N_B


# ---------------------------------------------------------------------------
# selection into observability

@dataclass
class SelectionCorrection:
    """Probability q(list price) that a buyer arrival leaves a visible trace."""

    x0: np.ndarray
    q: np.ndarray
    smearing_factor: float
    bandwidth: float
    n_gaps: int

    def __call__(self, x) -> np.ndarray | float:
        return np.interp(x, self.x0, self.q)


def selection_correction(
    listings: dict,
    lambda_S_hat: float,
    eval_points: np.ndarray | None = None,
) -> SelectionCorrection:
    """Observable-arrival rate inverted from gap durations between observed
    arrivals, divided by the overall arrival rate, clamped to (0, 1].

    Gaps under ten minutes are dropped before the log-duration regression;
    Duan smearing converts the log fit back to a level expectation.
    """
    xs, ys = [], []
    for rec in listings.values():
        if len(rec.arrival_times) < 2:
            continue
        times = sorted(rec.arrival_times)
        for a, bb in zip(times, times[1:]):
            gap = bb - a
            if gap < TEN_MINUTES_DAYS:
                continue
            xs.append(rec.list_price)
            ys.append(math.log(gap))
    if len(xs) < 3:
        raise EstimationError("too few observed arrival gaps for the selection correction")
    xs_arr = np.asarray(xs)
    ys_arr = np.asarray(ys)
    if eval_points is None:
        eval_points = np.unique(xs_arr)
    curve = local_linear_regress(xs_arr, ys_arr, eval_points)
    smear = duan_smearing_mean(ys_arr, curve(xs_arr))
    expected_gap = np.exp(curve.fitted) * smear
    q = np.clip(1.0 / (expected_gap * lambda_S_hat), 1e-9, 1.0)
    return SelectionCorrection(
        x0=curve.x0, q=q, smearing_factor=smear, bandwidth=curve.bandwidth, n_gaps=len(xs),
    )


# ---------------------------------------------------------------------------
# action share curves

@dataclass
class ShareCurves:
    x0: np.ndarray
    raw_A: np.ndarray
    raw_CN: np.ndarray
    raw_CS: np.ndarray
    bandwidth: float
    n_matches: int

    def corrected(self, q_at: np.ndarray) -> dict:
        pa = np.clip(q_at * self.raw_A, 0.0, 1.0)
        pcn = np.clip(q_at * self.raw_CN, 0.0, 1.0)
        pcs = np.clip(q_at * self.raw_CS, 0.0, 1.0)
        return {"A": pa, "CN": pcn, "CS": pcs, "D": np.clip(1.0 - pa - pcn - pcs, 0.0, 1.0)}


def action_share_curves(listings: dict, eval_points: np.ndarray | None = None) -> ShareCurves:
    """Local linear fits of per-match action indicators on the list price,
    conditional on the match being observable."""
    xs, ia, icn, ics = [], [], [], []
    for rec in listings.values():
        for m in rec.matches:
            xs.append(rec.list_price)
            ia.append(1.0 if m.action == "A" else 0.0)
            icn.append(1.0 if m.action == "CN" else 0.0)
            ics.append(1.0 if m.action == "CS" else 0.0)
    if len(xs) < 3:
        raise EstimationError("too few observable matches for action share curves")
    xs_arr = np.asarray(xs)
    if eval_points is None:
        eval_points = np.unique(xs_arr)
    bw = rule_of_thumb_bandwidth(xs_arr)
    ca = local_linear_regress(xs_arr, np.asarray(ia), eval_points, bw)
    ccn = local_linear_regress(xs_arr, np.asarray(icn), eval_points, bw)
    ccs = local_linear_regress(xs_arr, np.asarray(ics), eval_points, bw)
    return ShareCurves(
        x0=ca.x0,
        raw_A=np.clip(ca.fitted, 0.0, 1.0),
        raw_CN=np.clip(ccn.fitted, 0.0, 1.0),
        raw_CS=np.clip(ccs.fitted, 0.0, 1.0),
        bandwidth=bw,
        n_matches=len(xs),
    )


# ---------------------------------------------------------------------------
# seller valuations: pseudovalue inversion

def estimate_F_S(
    listings: dict,
    lambda_R_hat: float,
    r: float,
    t: float,
) -> tuple[np.ndarray, dict]:
    """Empirical seller valuation distribution from pseudovalues.

    Listings with an accepted committed counteroffer pin the seller's
    acceptance price; inverting it jointly with the discounted-sale moments
    gives the latent seller value. All three ingredients enter through
    smoothed curves in the list price: the list price takes finitely many
    values, and mixing a cell-pooled moment with the listing-level accepted
    amount would amplify within-cell dispersion by roughly
    (delta_R + dU_S/ds) / (delta_R - E[e^{-rT}]) and wreck the tail
    quantiles. Points where the denominator degenerates are dropped and
    counted.
    """
    delta_R = lambda_R_hat / (lambda_R_hat + r)
    p0s, y1, y2 = [], [], []
    for rec in listings.values():
        p0s.append(rec.list_price)
        if rec.sale_time is not None:
            disc = math.exp(-r * rec.sale_time)
            y1.append(disc * (1.0 - t) * rec.sale_price)
            y2.append(disc)
        else:
            y1.append(0.0)
            y2.append(0.0)
    if len(p0s) < 3:
        raise EstimationError("too few listings to estimate seller valuations")
    p0_arr = np.asarray(p0s)
    uniq = np.unique(p0_arr)
    bw = rule_of_thumb_bandwidth(p0_arr)
    c1 = local_linear_regress(p0_arr, np.asarray(y1), uniq, bw)
    c2 = local_linear_regress(p0_arr, np.asarray(y2), uniq, bw)
    commit_curve = _commit_price_curve(listings)

    pseudo = []
    dropped = 0
    n_commit = 0
    for rec in listings.values():
        commit = next((m for m in rec.matches if m.action == "CN" and m.accept_time is not None), None)
        if commit is None or commit.offer_price is None:
            continue
        n_commit += 1
        num = float(c1(rec.list_price)) - delta_R * (1.0 - t) * float(commit_curve(rec.list_price))
        den = float(c2(rec.list_price)) - delta_R
        if abs(den) < 1e-6:
            dropped += 1
            continue
        pseudo.append(num / den)
    if not pseudo:
        raise EstimationError("no usable committed acceptances to invert into pseudovalues")
    values = np.sort(np.asarray(pseudo))
    diag = {
        "bandwidth": bw,
        "n_committed_listings": n_commit,
        "n_dropped_degenerate": dropped,
        "quartiles": [float(np.quantile(values, q)) for q in (0.25, 0.5, 0.75)],
    }
    return values, diag


def pseudovalue(
    sale_discount: float,
    sale_price_discounted: float,
    commit_price: float,
    lambda_R_hat: float,
    r: float,
    t: float,
) -> float:
    """Scalar pseudovalue inversion for one listing's moments."""
    delta_R = lambda_R_hat / (lambda_R_hat + r)
    den = sale_discount - delta_R
    if abs(den) < 1e-6:
        raise EstimationError("degenerate pseudovalue denominator")
    return (sale_price_discounted * (1.0 - t) - delta_R * (1.0 - t) * commit_price) / den


# ---------------------------------------------------------------------------
# buyer valuations: normal fit at the accept/counter margin

def _commit_price_curve(listings: dict, eval_points: np.ndarray | None = None) -> ConditionalCurve:
    xs, ys = [], []
    for rec in listings.values():
        for m in rec.matches:
            if m.action == "CN" and m.offer_price is not None:
                xs.append(rec.list_price)
                ys.append(m.offer_price)
                break
    if len(xs) < 3:
        raise EstimationError("too few committed offers to fit the acceptance price curve")
    xs_arr = np.asarray(xs)
    if eval_points is None:
        eval_points = np.unique(xs_arr)
    return local_linear_regress(xs_arr, np.asarray(ys), eval_points)


def fit_normal_cdf(x: np.ndarray, y: np.ndarray, rounds: int = 60) -> tuple[float, float]:
    """Least squares fit of y ~ Phi((x - mu)/sigma) by a bounded grid search
    refined with coordinate descent."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.unique(x).size < 2:
        raise EstimationError("need at least two distinct margin points to fit the buyer distribution")

    span = max(float(x.max() - x.min()), 1.0)
    mu_grid = np.linspace(x.min() - 4.0 * span, x.max() + 4.0 * span, 41)
    sigma_grid = np.geomspace(span / 50.0, span * 50.0, 41)
    mu_lo, mu_hi = mu_grid[0], mu_grid[-1]
    sg_lo, sg_hi = sigma_grid[0], sigma_grid[-1]

    def sse(mu: float, sigma: float) -> float:
        return float(np.sum((y - norm.cdf((x - mu) / sigma)) ** 2))

    best = (float("inf"), 0.0, 1.0)
    for mu in mu_grid:
        for sg in sigma_grid:
            val = sse(mu, sg)
            if val < best[0]:
                best = (val, float(mu), float(sg))
    _, mu, sigma = best

    prev = float("inf")
    for _ in range(rounds):
        res_mu = minimize_scalar(lambda m: sse(m, sigma), bounds=(mu_lo, mu_hi), method="bounded",
                                 options={"xatol": 1e-6 * span})
        mu = float(res_mu.x)
        res_sg = minimize_scalar(lambda s: sse(mu, s), bounds=(sg_lo, sg_hi), method="bounded",
                                 options={"xatol": 1e-6 * span})
        sigma = float(res_sg.x)
        cur = sse(mu, sigma)
        if prev - cur < 1e-14 * (1.0 + cur):
            break
        prev = cur
    return mu, sigma


def estimate_F_B(
    listings: dict,
    lambda_R_hat: float,
    r: float,
    q_curve: SelectionCorrection,
    shares: ShareCurves,
) -> tuple[float, float, dict]:
    """Normal buyer valuation parameters from the accept/counter margin.

    The margin valuation at each list price comes from the committed
    acceptance price curve; its left-tail probability is one minus the
    selection-corrected accept share. One observation per listing.
    """
    delta_R2 = (lambda_R_hat / (lambda_R_hat + r)) ** 2
    commit_curve = _commit_price_curve(listings)

    p0_listings = np.asarray([rec.list_price for rec in listings.values()])
    tau = (p0_listings - delta_R2 * commit_curve(p0_listings)) / (1.0 - delta_R2)
    share_a = np.interp(p0_listings, shares.x0, shares.raw_A)
    q_at = q_curve(p0_listings)
    y = 1.0 - np.clip(q_at * share_a, 0.0, 1.0)

    mu, sigma = fit_normal_cdf(tau, y)
    diag = {
        "n_listings": int(p0_listings.size),
        "tau_range": [float(tau.min()), float(tau.max())],
        "commit_curve_bandwidth": commit_curve.bandwidth,
    }
    return mu, sigma, diag


# ---------------------------------------------------------------------------
# search cost

def estimate_search_cost(
    listings: dict,
    purchases_by_buyer: dict,
    mu_B: float,
    sigma_B: float,
    lambda_R_hat: float,
    r: float,
    q_curve: SelectionCorrection,
    shares: ShareCurves,
) -> tuple[float, dict]:
    """Flow search cost from the search/no-search indifference.

    The marginal searching buyer at each list price is located by inverting
    the fitted buyer distribution at the selection-corrected search-or-decline
    share; her realized discounted purchase outcome is proxied by the lowest
    noncommitted offers (a 0.001-0.05 quantile band within each of 50 list
    price bins). Integrals run over the empirical list price distribution.
    """
    delta_R2 = (lambda_R_hat / (lambda_R_hat + r)) ** 2
    commit_curve = _commit_price_curve(listings)

    def tau_ns_at(p0: np.ndarray) -> np.ndarray:
        share_a = np.interp(p0, shares.x0, shares.raw_A)
        share_cn = np.interp(p0, shares.x0, shares.raw_CN)
        q_at = q_curve(p0)
        share = 1.0 - np.clip(q_at * (share_a + share_cn), 0.0, 1.0)
        share = np.clip(share, 1e-4, 1.0 - 1e-4)
        return mu_B + sigma_B * norm.ppf(share)

    offers = []  # (p0, offer_price, match_time, buyer_id)
    for rec in listings.values():
        for m in rec.matches:
            if m.action == "CS" and m.offer_price is not None:
                offers.append((rec.list_price, m.offer_price, m.time, m.buyer_id))
    if not offers:
        raise EstimationError("no noncommitted offers in the log")

    p0_off = np.asarray([o[0] for o in offers])
    amt_off = np.asarray([o[1] for o in offers])
    lo_q, hi_q = SEARCH_COST_QUANTILE_BAND
    edges = np.linspace(p0_off.min(), p0_off.max() + 1e-9, SEARCH_COST_BINS + 1)
    keep = np.zeros(len(offers), dtype=bool)
    kept_bins = 0
    for k in range(SEARCH_COST_BINS):
        in_bin = (p0_off >= edges[k]) & (p0_off < edges[k + 1])
        if not in_bin.any():
            continue
        amounts = amt_off[in_bin]
        lo, hi = np.quantile(amounts, [lo_q, hi_q])
        sel = in_bin & (amt_off >= lo) & (amt_off <= hi)
        if sel.any():
            kept_bins += 1
            keep |= sel
    if not keep.any():
        raise EstimationError("quantile band empty in every list price bin")

    xs, z1, z2 = [], [], []
    for flag, (p0, amount, t_match, buyer) in zip(keep, offers):
        if not flag:
            continue
        tau = float(tau_ns_at(np.asarray([p0]))[0])
        purchase = None
        for t_pur, price in purchases_by_buyer.get(buyer, []):
            if t_pur >= t_match - 1e-12:
                purchase = (t_pur, price)
                break
        xs.append(p0)
        if purchase is None:
            z1.append(0.0)
            z2.append(1.0)
        else:
            disc = math.exp(-r * (purchase[0] - t_match))
            z1.append(disc * (tau - purchase[1]))
            z2.append(1.0 - disc)
    xs_arr = np.asarray(xs)

    # The search/no-search indifference only holds at sellers whose buyers
    # actually search, so the integrals run over the empirical list price
    # distribution of the selected offers; at other sellers the inverted
    # margin is not a search margin at all.
    uniq = np.unique(xs_arr)
    c1 = local_linear_regress(xs_arr, np.asarray(z1), uniq)
    c2 = local_linear_regress(xs_arr, np.asarray(z2), uniq)

    tau_sub = tau_ns_at(xs_arr)
    payoff_int = float(np.mean(c1(xs_arr)))
    commit_int = float(np.mean(delta_R2 * (tau_sub - commit_curve(xs_arr))))
    denom_int = float(np.mean(c2(xs_arr)))
    if abs(denom_int) < 1e-12:
        raise EstimationError("purchases are instantaneous; the search cost is not identified")
    c_hat = r * (payoff_int - commit_int) / denom_int
    diag = {
        "n_offers": len(offers),
        "n_selected": int(keep.sum()),
        "bins_used": kept_bins,
        "subsample_bandwidth": c1.bandwidth,
        "payoff_integral": payoff_int,
        "commit_integral": commit_int,
        "denominator_integral": denom_int,
    }
    return c_hat, diag


# ---------------------------------------------------------------------------
# post-walkaway trading probability

def calibrate_kappa(listings: dict, window: float = WALKAWAY_RESALE_WINDOW_DAYS) -> float:
    """Share of walked-away deals where the item still sells to someone else
    at the agreed price within the window."""
    total = 0
    hits = 0
    for rec in listings.values():
        for m in rec.matches:
            if m.action != "CS" or m.walkaway_time is None:
                continue
            total += 1
            for t_sale, price, buyer, _ in rec.sales:
                if (
                    m.walkaway_time - 1e-12 <= t_sale <= m.walkaway_time + window
                    and buyer != m.buyer_id
                    and price is not None
                    and m.offer_price is not None
                    and abs(price - m.offer_price) <= 1e-6
                ):
                    hits += 1
                    break
    if total == 0:
        raise EstimationError("no walkaways after accepted noncommitted offers")
    return hits / total


# ---------------------------------------------------------------------------
# full pipeline

@dataclass
class EstimationResult:
    lambda_R_hat: float
    lambda_S_hat: float
    lambda_B_hat: float
    kappa_hat: float
    pseudovalues: np.ndarray
    F_S_quartiles: list
    mu_B_hat: float
    sigma_B_hat: float
    c_hat: float
    diagnostics: dict = field(default_factory=dict)

    def F_S_cdf(self, x) -> np.ndarray | float:
        return np.searchsorted(self.pseudovalues, x, side="right") / self.pseudovalues.size

    def to_dict(self) -> dict:
        return {
            "schema_version": ESTIMATE_SCHEMA_VERSION,
            "lambda_R_hat": self.lambda_R_hat,
            "lambda_S_hat": self.lambda_S_hat,
            "lambda_B_hat": self.lambda_B_hat,
            "kappa_hat": self.kappa_hat,
            "F_S_quartiles": list(self.F_S_quartiles),
            "mu_B_hat": self.mu_B_hat,
            "sigma_B_hat": self.sigma_B_hat,
            "c_hat": self.c_hat,
            "n_pseudovalues": int(self.pseudovalues.size),
            "pseudovalues": [float(v) for v in self.pseudovalues],
            "diagnostics": self.diagnostics,
        }

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))


def estimate_all(
    events: list[Event] | EventLog,
    r: float,
    t: float,
    N_S: int,
    N_B: int,
) -> EstimationResult:
    """Run the whole identification pipeline on an event log.

    The discount rate, commission, and population counts are calibrated
    inputs; everything else is recovered from the log.
    """
    if isinstance(events, EventLog):
        events = events.events
    listings, purchases = extract_records(events)
    if not listings:
        raise EstimationError("log contains no listings")

    lam_S = estimate_lambda_S(listings)
    lam_R = estimate_lambda_R(listings)
    lam_B = estimate_lambda_B(lam_S, N_S, N_B)
    kappa = calibrate_kappa(listings)

    q_curve = selection_correction(listings, lam_S)
    shares = action_share_curves(listings)

    pseudo, fs_diag = estimate_F_S(listings, lam_R, r, t)
    mu_B, sigma_B, fb_diag = estimate_F_B(listings, lam_R, r, q_curve, shares)
    c_hat, c_diag = estimate_search_cost(
        listings, purchases, mu_B, sigma_B, lam_R, r, q_curve, shares
    )

    p0_all = np.asarray([rec.list_price for rec in listings.values()])
    deciles = np.quantile(p0_all, np.linspace(0.0, 1.0, 11))
    diagnostics = {
        "n_listings": len(listings),
        "n_matches": int(sum(len(rec.matches) for rec in listings.values())),
        "share_bandwidth": shares.bandwidth,
        "selection": {
            "smearing_factor": q_curve.smearing_factor,
            "bandwidth": q_curve.bandwidth,
            "n_gaps": q_curve.n_gaps,
        },
        "F_S": fs_diag,
        "F_B": fb_diag,
        "search_cost": c_diag,
        "curves_deciles": {
            "p0": [float(v) for v in deciles],
            "q": [float(v) for v in q_curve(deciles)],
            "share_A_raw": [float(v) for v in np.interp(deciles, shares.x0, shares.raw_A)],
            "share_CN_raw": [float(v) for v in np.interp(deciles, shares.x0, shares.raw_CN)],
            "share_CS_raw": [float(v) for v in np.interp(deciles, shares.x0, shares.raw_CS)],
        },
    }
    return EstimationResult(
        lambda_R_hat=lam_R,
        lambda_S_hat=lam_S,
        lambda_B_hat=lam_B,
        kappa_hat=kappa,
        pseudovalues=pseudo,
        F_S_quartiles=fs_diag["quartiles"],
        mu_B_hat=mu_B,
        sigma_B_hat=sigma_B,
        c_hat=c_hat,
        diagnostics=diagnostics,
    )


def write_curves_csv(result: EstimationResult, path: str | Path) -> None:
    """Diagnostic conditional curves at the observed list price deciles."""
    curves = result.diagnostics.get("curves_deciles", {})
    p0 = curves.get("p0", [])
    names = [k for k in curves if k != "p0"]
    lines = ["curve,x0,fitted"]
    for name in names:
        for x, v in zip(p0, curves[name]):
            lines.append(f"{name},{x!r},{v!r}")
    Path(path).write_text("\n".join(lines) + "\n")
