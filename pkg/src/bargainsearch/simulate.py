"""Synthetic continuous-time marketplace event logs from a solved equilibrium.

Every listing starts at time zero and runs an independent random stream:
buyers arrive at exponential inter-times, draw a value from the buyer grid,
and play the equilibrium action. Committed counteroffers resolve through two
response-rate delays; noncommitted ones resolve when the buyer's next seller
arrives, at which point the buyer either purchases or walks away. A walkaway
triggers an instantaneous outside sale at the agreed price with the
calibrated probability, else the listing re-enters its arrival process.

A buyer who walks away keeps searching: the continuation is simulated at
freshly drawn sellers and logged under an auxiliary thread id with no List
event. Those rows never enter listing-level statistics (which key on List
events) but let the estimator find the buyer's eventual purchase by id, the
same way panel data tracks a buyer across items.

Declining buyers leave an observable Decline with probability q_D_obs and a
silent Like otherwise, so pure likes proxy unobservable matches.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .params import ModelParams
from .solver import Equilibrium

EVENTS_SCHEMA_VERSION = "bargainsearch-events-v1"
CSV_HEADER = ["listing_id", "event_time", "event_kind", "buyer_id", "price", "committed_flag"]

EVENT_KINDS = (
    "List", "Arrival", "Like", "Offer", "Accept", "Decline",
    "Purchase", "Walkaway", "ExogenousSale", "PriceChange",
)

_MAX_WALKER_HOPS = 10_000


class Event(NamedTuple):
    listing_id: str
    time: float
    kind: str
    buyer_id: str
    price: float | None
    committed: bool | None
    seq: int  # per-listing tiebreaker, not serialized


@dataclass(frozen=True)
class SimOptions:
    n_listings: int
    horizon: float = 365.0
    seed: int = 0
    q_D_obs: float = 0.5

    def __post_init__(self) -> None:
        if self.n_listings < 0:
            raise ValueError("n_listings must be non-negative")
        if not (0.0 <= self.q_D_obs <= 1.0):
            raise ValueError("q_D_obs must lie in [0, 1]")
        if self.horizon <= 0.0:
            raise ValueError("horizon must be positive")

    def to_dict(self) -> dict:
        return {
            "n_listings": self.n_listings,
            "horizon": self.horizon,
            "seed": self.seed,
            "q_D_obs": self.q_D_obs,
        }


@dataclass
class EventLog:
    events: list[Event]
    options: SimOptions
    true_params: dict
    hidden_seller_values: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.events)


class _Emitter:
    """Collects events for one listing/thread with a running sequence number."""

    def __init__(self, listing_id: str, out: list[Event]):
        self.listing_id = listing_id
        self.out = out
        self.seq = 0

    def emit(self, time: float, kind: str, buyer: str = "", price: float | None = None,
             committed: bool | None = None) -> None:
        self.out.append(Event(self.listing_id, time, kind, buyer, price, committed, self.seq))
        self.seq += 1


def _walker_path(
    rng: np.random.Generator,
    em: _Emitter,
    buyer_id: str,
    b_idx: int,
    s_idx: int,
    start: float,
    eq: Equilibrium,
    params: ModelParams,
    horizon: float,
) -> None:
    """Continuation of a buyer who walked away: recurse through fresh matches
    until a purchase or the horizon."""
    pol, vb = eq.policies, eq.value_fns.buyer_matched
    buyers = eq.grids.buyer_values
    n_s = eq.grids.seller_values.size
    b = float(buyers[b_idx])
    t = start
    for _ in range(_MAX_WALKER_HOPS):
        if t > horizon:
            return
        em.emit(t, "Arrival", buyer_id)
        chi = int(pol.action[s_idx, b_idx])
        if chi == 3:  # A
            em.emit(t, "Purchase", buyer_id, float(pol.list_price[s_idx]))
            return
        if chi == 2:  # CN
            price = float(pol.commit_price[s_idx])
            em.emit(t, "Offer", buyer_id, price, committed=True)
            t_acc = t + rng.exponential(1.0 / params.lambda_R)
            t_buy = t_acc + rng.exponential(1.0 / params.lambda_R)
            if t_acc <= horizon:
                em.emit(t_acc, "Accept", buyer_id, price)
                if t_buy <= horizon:
                    em.emit(t_buy, "Purchase", buyer_id, price)
            return
        if chi == 1:  # CS
            price = float(pol.search_price[s_idx, b_idx])
            em.emit(t, "Offer", buyer_id, price, committed=False)
            wait = rng.exponential(1.0 / params.lambda_B)
            t_res = t + wait
            t_acc = t + min(rng.exponential(1.0 / params.lambda_R), 0.99 * wait)
            if t_acc <= horizon:
                em.emit(t_acc, "Accept", buyer_id, price)
            if t_res > horizon:
                return
            s_next = int(rng.integers(n_s))
            if vb[s_next, b_idx] >= b - price:
                em.emit(t_res, "Walkaway", buyer_id)
                t = t_res
                s_idx = s_next
                continue
            em.emit(t_res, "Purchase", buyer_id, price)
            return
        # D: resume-search delay, then wait for the next seller
        em.emit(t, "Decline", buyer_id)
        t = t + rng.exponential(1.0 / params.lambda_R) + rng.exponential(1.0 / params.lambda_B)
        s_idx = int(rng.integers(n_s))
    return


def simulate_market(equilibrium: Equilibrium, params: ModelParams, options: SimOptions) -> EventLog:
    """Simulate n_listings independent listings under the equilibrium policies."""
    pol = equilibrium.policies
    vb = equilibrium.value_fns.buyer_matched
    sellers = equilibrium.grids.seller_values
    buyers = equilibrium.grids.buyer_values
    n_s, n_b = sellers.size, buyers.size
    horizon = options.horizon

    events: list[Event] = []
    hidden: dict[str, float] = {}

    for li in range(options.n_listings):
        rng = np.random.default_rng([options.seed, li])
        listing_id = f"L{li:06d}"
        s_idx = int(rng.integers(n_s))
        hidden[listing_id] = float(sellers[s_idx])
        p0 = float(pol.list_price[s_idx])
        em = _Emitter(listing_id, events)
        em.emit(0.0, "List", price=p0)

        t = 0.0
        arrival_count = 0
        walk_count = 0
        terminal = False

        def busy_likes(w0: float, w1: float) -> None:
            # The buyer flow does not stop while a negotiation is pending; the
            # listing is committed, so those arrivals only leave likes. They
            # keep measured arrivals consistent with the arrival rate over the
            # listing's whole life.
            nonlocal arrival_count
            w1 = min(w1, horizon)
            if w1 <= w0:
                return
            k = int(rng.poisson(params.lambda_S * (w1 - w0)))
            for tt in np.sort(rng.uniform(w0, w1, size=k)):
                arrival_count += 1
                em.emit(float(tt), "Like", f"B{li:06d}.{arrival_count:03d}")
        while not terminal:
            t_arr = t + rng.exponential(1.0 / params.lambda_S)
            if t_arr > horizon:
                break  # censored at horizon
            arrival_count += 1
            buyer_id = f"B{li:06d}.{arrival_count:03d}"
            b_idx = int(rng.integers(n_b))
            b = float(buyers[b_idx])
            chi = int(pol.action[s_idx, b_idx])

            if chi == 3:  # A: immediate purchase at the list price
                em.emit(t_arr, "Arrival", buyer_id)
                em.emit(t_arr, "Purchase", buyer_id, p0)
                terminal = True

            elif chi == 2:  # CN: response delay, then purchase delay
                price = float(pol.commit_price[s_idx])
                em.emit(t_arr, "Arrival", buyer_id)
                em.emit(t_arr, "Offer", buyer_id, price, committed=True)
                t_acc = t_arr + rng.exponential(1.0 / params.lambda_R)
                t_buy = t_acc + rng.exponential(1.0 / params.lambda_R)
                busy_likes(t_arr, t_buy)
                if t_acc > horizon:
                    break
                em.emit(t_acc, "Accept", buyer_id, price)
                em.emit(t_acc, "PriceChange", price=price)
                if t_buy > horizon:
                    break
                em.emit(t_buy, "Purchase", buyer_id, price)
                terminal = True

            elif chi == 1:  # CS: resolves when the buyer's next seller arrives
                price = float(pol.search_price[s_idx, b_idx])
                em.emit(t_arr, "Arrival", buyer_id)
                em.emit(t_arr, "Offer", buyer_id, price, committed=False)
                wait = rng.exponential(1.0 / params.lambda_B)
                t_res = t_arr + wait
                t_acc = t_arr + min(rng.exponential(1.0 / params.lambda_R), 0.99 * wait)
                busy_likes(t_arr, t_res)
                if t_acc <= horizon:
                    em.emit(t_acc, "Accept", buyer_id, price)
                    em.emit(t_acc, "PriceChange", price=price)
                if t_res > horizon:
                    break
                s_next = int(rng.integers(n_s))
                if vb[s_next, b_idx] >= b - price:
                    em.emit(t_res, "Walkaway", buyer_id)
                    walk_count += 1
                    wem = _Emitter(f"W{li:06d}.{walk_count}", events)
                    _walker_path(rng, wem, buyer_id, b_idx, s_next, t_res, equilibrium, params, horizon)
                    if rng.random() < params.kappa:
                        outside = f"X{li:06d}.{walk_count}"
                        em.emit(t_res, "ExogenousSale", outside, price)
                        terminal = True
                    else:
                        em.emit(t_res, "PriceChange", price=p0)
                        t = t_res
                else:
                    em.emit(t_res, "Purchase", buyer_id, price)
                    terminal = True

            else:  # D: observable decline or silent like
                if rng.random() < options.q_D_obs:
                    em.emit(t_arr, "Arrival", buyer_id)
                    em.emit(t_arr, "Decline", buyer_id)
                else:
                    em.emit(t_arr, "Like", buyer_id)
                t = t_arr

    events.sort(key=lambda e: (e.listing_id, e.time, e.seq))
    return EventLog(
        events=events,
        options=options,
        true_params=params.to_dict(),
        hidden_seller_values=hidden,
    )


# ---------------------------------------------------------------------------
# serialization

def _fmt(x: float | None) -> str:
    return "" if x is None else repr(float(x))


def write_events_csv(log: EventLog, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for e in log.events:
            flag = "" if e.committed is None else ("1" if e.committed else "0")
            w.writerow([e.listing_id, repr(e.time), e.kind, e.buyer_id, _fmt(e.price), flag])


def write_sidecar(log: EventLog, path: str | Path, config_hash: str = "") -> None:
    path = Path(path)
    doc = {
        "schema_version": EVENTS_SCHEMA_VERSION,
        "config_hash": config_hash,
        "options": log.options.to_dict(),
        "true_params": log.true_params,
        "hidden_seller_values": log.hidden_seller_values,
    }
    path.write_text(json.dumps(doc, indent=1))


def read_events_csv(path: str | Path) -> list[Event]:
    """Parse an event CSV; malformed rows raise with their line number."""
    path = Path(path)
    events: list[Event] = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {header!r}")
        for ln, row in enumerate(reader, start=2):
            if len(row) != len(CSV_HEADER):
                raise ValueError(f"{path}:{ln}: expected {len(CSV_HEADER)} fields, got {len(row)}")
            lid, t_s, kind, buyer, price_s, flag_s = row
            if kind not in EVENT_KINDS:
                raise ValueError(f"{path}:{ln}: unknown event kind {kind!r}")
            try:
                t = float(t_s)
                price = None if price_s == "" else float(price_s)
            except ValueError as exc:
                raise ValueError(f"{path}:{ln}: bad numeric field ({exc})") from None
            if not math.isfinite(t) or (price is not None and not math.isfinite(price)):
                raise ValueError(f"{path}:{ln}: non-finite numeric field")
            committed = None if flag_s == "" else flag_s == "1"
            events.append(Event(lid, t, kind, buyer, price, committed, ln))
    return events


# ---------------------------------------------------------------------------
# per-listing records shared by summaries and the estimator

@dataclass
class MatchRecord:
    listing_id: str
    buyer_id: str
    time: float
    action: str                      # A / CN / CS / D
    list_price: float
    offer_price: float | None = None
    accept_time: float | None = None
    purchase_time: float | None = None  # by this buyer on this listing
    walkaway_time: float | None = None


@dataclass
class ListingRecord:
    listing_id: str
    list_price: float
    sale_time: float | None = None
    sale_price: float | None = None
    sale_buyer: str | None = None
    sale_kind: str | None = None
    arrival_times: list = field(default_factory=list)   # observable matches
    like_times: list = field(default_factory=list)      # unobservable matches
    matches: list = field(default_factory=list)
    sales: list = field(default_factory=list)           # all (time, price, buyer, kind)


def extract_records(events: list[Event]) -> tuple[dict, dict]:
    """Build listing records (listings with a List event) and a global
    buyer -> purchases index covering auxiliary walker threads too."""
    by_listing: dict[str, list[Event]] = {}
    purchases_by_buyer: dict[str, list] = {}
    for e in events:
        by_listing.setdefault(e.listing_id, []).append(e)
        if e.kind == "Purchase" and e.buyer_id:
            purchases_by_buyer.setdefault(e.buyer_id, []).append((e.time, e.price))
    for v in purchases_by_buyer.values():
        v.sort()

    listings: dict[str, ListingRecord] = {}
    for lid, evs in by_listing.items():
        evs.sort(key=lambda e: (e.time, e.seq))
        head = evs[0]
        if head.kind != "List":
            continue  # auxiliary walker thread
        rec = ListingRecord(listing_id=lid, list_price=float(head.price))
        per_buyer: dict[str, MatchRecord] = {}
        for e in evs[1:]:
            if e.kind == "Arrival":
                rec.arrival_times.append(e.time)
                m = MatchRecord(lid, e.buyer_id, e.time, "D", rec.list_price)
                per_buyer[e.buyer_id] = m
                rec.matches.append(m)
            elif e.kind == "Like":
                rec.like_times.append(e.time)
            elif e.kind == "Offer":
                m = per_buyer.get(e.buyer_id)
                if m is not None:
                    m.action = "CN" if e.committed else "CS"
                    m.offer_price = e.price
            elif e.kind == "Accept":
                m = per_buyer.get(e.buyer_id)
                if m is not None and m.accept_time is None:
                    m.accept_time = e.time
            elif e.kind == "Purchase":
                rec.sales.append((e.time, e.price, e.buyer_id, "Purchase"))
                m = per_buyer.get(e.buyer_id)
                if m is not None:
                    if m.action == "D" and m.offer_price is None:
                        m.action = "A"
                    m.purchase_time = e.time
            elif e.kind == "ExogenousSale":
                rec.sales.append((e.time, e.price, e.buyer_id, "ExogenousSale"))
            elif e.kind == "Walkaway":
                m = per_buyer.get(e.buyer_id)
                if m is not None:
                    m.walkaway_time = e.time
        if rec.sales:
            # listing terminates at its first sale
            t, p, buyer, kind = rec.sales[0]
            rec.sale_time, rec.sale_price, rec.sale_buyer, rec.sale_kind = t, p, buyer, kind
        listings[lid] = rec
    return listings, purchases_by_buyer


def summarize_log(log: EventLog | list[Event]) -> dict:
    """Listing- and match-level summary tables mirroring marketplace panels."""
    events = log.events if isinstance(log, EventLog) else log
    listings, _ = extract_records(events)
    n = len(listings)
    if n == 0:
        return {
            "listings": {"n": 0, "sold": 0.0, "sold_with_bargaining": 0.0, "received_offer": 0.0,
                         "observable_matches_mean": 0.0, "sale_list_ratio_mean": float("nan"),
                         "time_to_sell_mean": float("nan"), "time_to_first_match_mean": float("nan")},
            "matches": {"n": 0, "share_A": float("nan"), "share_C": float("nan"), "share_D": float("nan"),
                        "offer_made": float("nan"), "walkaway_share": float("nan"),
                        "time_to_purchase_after_accept_mean": float("nan")},
        }

    sold = [rec for rec in listings.values() if rec.sale_time is not None]
    sold_bargain = 0
    for rec in sold:
        for m in rec.matches:
            if m.action in ("CN", "CS") and m.purchase_time == rec.sale_time and m.buyer_id == rec.sale_buyer:
                sold_bargain += 1
                break
    received_offer = sum(
        1 for rec in listings.values() if any(m.offer_price is not None for m in rec.matches)
    )
    ratios = [rec.sale_price / rec.list_price for rec in sold if rec.list_price > 0]
    t_first = [min(rec.arrival_times) for rec in listings.values() if rec.arrival_times]

    all_matches = [m for rec in listings.values() for m in rec.matches]
    n_m = len(all_matches)
    c_matches = [m for m in all_matches if m.action in ("CN", "CS")]
    walk = [1.0 if (m.purchase_time is None) else 0.0 for m in c_matches]
    t_after_accept = []
    for m in c_matches:
        if m.accept_time is None:
            continue
        rec = listings[m.listing_id]
        later = [t for t, *_ in rec.sales if t >= m.accept_time]
        if later:
            t_after_accept.append(min(later) - m.accept_time)

    def _mean(xs):
        return float(np.mean(xs)) if len(xs) else float("nan")

    return {
        "listings": {
            "n": n,
            "sold": len(sold) / n,
            "sold_with_bargaining": sold_bargain / n,
            "received_offer": received_offer / n,
            "observable_matches_mean": _mean([len(rec.matches) for rec in listings.values()]),
            "sale_list_ratio_mean": _mean(ratios),
            "time_to_sell_mean": _mean([rec.sale_time for rec in sold]),
            "time_to_first_match_mean": _mean(t_first),
        },
        "matches": {
            "n": n_m,
            "share_A": (sum(1 for m in all_matches if m.action == "A") / n_m) if n_m else float("nan"),
            "share_C": (len(c_matches) / n_m) if n_m else float("nan"),
            "share_D": (sum(1 for m in all_matches if m.action == "D") / n_m) if n_m else float("nan"),
            "offer_made": (sum(1 for m in all_matches if m.offer_price is not None) / n_m) if n_m else float("nan"),
            "walkaway_share": _mean(walk),
            "time_to_purchase_after_accept_mean": _mean(t_after_accept),
        },
    }
