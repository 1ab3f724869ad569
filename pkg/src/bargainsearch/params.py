"""Structural primitives of the marketplace model.

All rates are per day, all money amounts are in yen. The baseline parameter
set reproduces the benchmark calibration for the used-smartphone market:
arrival and response rates, commission, post-walkaway trading probability,
market sizes, flow search cost, and normal valuation distributions whose
quartiles match the benchmark estimates at a daily discount rate of 0.05.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm


@dataclass(frozen=True)
class Normal:
    """Normal valuation distribution (yen)."""

    mean: float
    sd: float

    def __post_init__(self) -> None:
        if not (self.sd > 0.0 and math.isfinite(self.sd) and math.isfinite(self.mean)):
            raise ValueError(f"invalid normal parameters: mean={self.mean}, sd={self.sd}")

    def cdf(self, x):
        return norm.cdf(x, loc=self.mean, scale=self.sd)

    def pdf(self, x):
        return norm.pdf(x, loc=self.mean, scale=self.sd)

    def ppf(self, q):
        return norm.ppf(q, loc=self.mean, scale=self.sd)

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.normal(self.mean, self.sd, size=size)

    def to_dict(self) -> dict:
        return {"kind": "normal", "mean": self.mean, "sd": self.sd}

    @staticmethod
    def from_dict(d: dict) -> "Normal":
        if d.get("kind") != "normal":
            raise ValueError(f"unsupported distribution kind: {d.get('kind')!r}")
        return Normal(mean=float(d["mean"]), sd=float(d["sd"]))


# Quartiles of the benchmark seller/buyer valuation estimates (r = 0.05).
# sd is backed out of the interquartile range of a normal.
_Z75 = 0.6744897501960817

SELLER_VALUE_QUARTILES = (7570.95, 8740.62, 9854.90)
BUYER_VALUE_QUARTILES = (-22178.11, 14443.64, 56002.04)


@dataclass(frozen=True)
class ModelParams:
    """All structural primitives of the market.

    lambda_S: Poisson rate at which buyers arrive to a listing.
    lambda_B: Poisson rate at which sellers arrive to a searching buyer.
    lambda_R: response rate governing reply and purchase-opportunity delays.
    r:        continuous discount rate.
    c:        buyer flow search cost (yen/day).
    t:        platform commission rate (fraction of sale price).
    kappa:    probability a walked-away deal still trades at the agreed price.
    N_S, N_B: seller and buyer population counts.
    F_S, F_B: seller and buyer valuation distributions.
    """

    lambda_S: float
    lambda_B: float
    lambda_R: float
    r: float
    c: float
    t: float
    kappa: float
    N_S: int
    N_B: int
    F_S: Normal = field(default_factory=lambda: Normal(SELLER_VALUE_QUARTILES[1], _iqr_sd(SELLER_VALUE_QUARTILES)))
    F_B: Normal = field(default_factory=lambda: Normal(BUYER_VALUE_QUARTILES[1], _iqr_sd(BUYER_VALUE_QUARTILES)))

    def __post_init__(self) -> None:
        for name in ("lambda_S", "lambda_B", "lambda_R", "r"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be strictly positive")
        if not self.lambda_R > self.lambda_B:
            raise ValueError("lambda_R must exceed lambda_B")
        if not (0.0 <= self.t < 1.0):
            raise ValueError("commission rate t must lie in [0, 1)")
        if not (0.0 <= self.kappa <= 1.0):
            raise ValueError("kappa must lie in [0, 1]")
        if not (isinstance(self.N_S, int) and self.N_S > 0 and isinstance(self.N_B, int) and self.N_B > 0):
            raise ValueError("N_S and N_B must be positive integers")
        if self.c < 0.0:
            raise ValueError("search cost c must be non-negative")
        # implied one-arrival discount factors
        if not (0.0 < self.delta_B < self.delta_R < 1.0):
            raise ValueError("discount factors must satisfy 0 < delta_B < delta_R < 1")

    @property
    def delta_R(self) -> float:
        """Expected discount over one response-rate arrival."""
        return self.lambda_R / (self.lambda_R + self.r)

    @property
    def delta_B(self) -> float:
        """Expected discount over one seller-arrival wait."""
        return self.lambda_B / (self.lambda_B + self.r)

    @property
    def delta_S(self) -> float:
        """Expected discount over one buyer-arrival wait."""
        return self.lambda_S / (self.lambda_S + self.r)

    @property
    def search_cost_pv(self) -> float:
        """Expected discounted search cost over one seller-arrival wait."""
        return self.c / (self.lambda_B + self.r)

    def to_dict(self) -> dict:
        return {
            "lambda_S": self.lambda_S,
            "lambda_B": self.lambda_B,
            "lambda_R": self.lambda_R,
            "r": self.r,
            "c": self.c,
            "t": self.t,
            "kappa": self.kappa,
            "N_S": self.N_S,
            "N_B": self.N_B,
            "F_S": self.F_S.to_dict(),
            "F_B": self.F_B.to_dict(),
        }

    @staticmethod
    def from_dict(d: dict) -> "ModelParams":
        return ModelParams(
            lambda_S=float(d["lambda_S"]),
            lambda_B=float(d["lambda_B"]),
            lambda_R=float(d["lambda_R"]),
            r=float(d["r"]),
            c=float(d["c"]),
            t=float(d["t"]),
            kappa=float(d["kappa"]),
            N_S=int(d["N_S"]),
            N_B=int(d["N_B"]),
            F_S=Normal.from_dict(d["F_S"]),
            F_B=Normal.from_dict(d["F_B"]),
        )


def _iqr_sd(quartiles: tuple[float, float, float]) -> float:
    return (quartiles[2] - quartiles[0]) / (2.0 * _Z75)


def baseline_params(r: float = 0.05) -> ModelParams:
    """Benchmark calibration of the market at discount rate ``r``.

    Only the r = 0.05 row of the benchmark is wired in; other discount rates
    reuse the same rates/distributions and merely change ``r``.
    """
    return ModelParams(
        lambda_S=0.605,
        lambda_B=0.678,
        lambda_R=3.513,
        r=r,
        c=1478.432,
        t=0.10,
        kappa=0.687,
        N_S=4545,
        N_B=4056,
        F_S=Normal(SELLER_VALUE_QUARTILES[1], _iqr_sd(SELLER_VALUE_QUARTILES)),
        F_B=Normal(BUYER_VALUE_QUARTILES[1], _iqr_sd(BUYER_VALUE_QUARTILES)),
    )
