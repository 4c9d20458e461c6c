"""Shared fixtures: market builders and a hand-built separating profile."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy import integrate

from pricesignal.demand import monopoly_demand, monopoly_price
from pricesignal.market import FirmType, MarketParams, QualityPremium, Regime, ValidatedMarket, \
    ValuationDistribution, validate
from pricesignal.numerics import grid_argmax
from pricesignal.profile import BeliefRule, Piece, PricingStrategy, symmetric_profile

DATA = Path(__file__).parent / "data"
NEG_MARKET = DATA / "negmarket.txt"
POS_MARKET = DATA / "posmarket.txt"


def market(mu0=0.5, c_g=0.0, c_b=0.2, nu0=0.1, nu1=0.0, v_bar=1.0, regime=None, knots=None, p_max=None):
    if regime is None:
        regime = Regime.POSITIVE if c_g > c_b else Regime.NEGATIVE
    dist = ValuationDistribution.piecewise(knots) if knots else ValuationDistribution.uniform(v_bar)
    return validate(MarketParams(mu0, c_g, c_b, QualityPremium(nu0, nu1), dist, p_max=p_max, regime=Regime(regime)))


def neg_market(**kw) -> ValidatedMarket:
    return market(**{"mu0": 0.5, "c_g": 0.0, "c_b": 0.2, "nu0": 0.1, **kw})


def pos_market(**kw) -> ValidatedMarket:
    return market(**{"mu0": 0.8, "c_g": 0.3, "c_b": 0.1, "nu0": 0.3, **kw})


class SeparatingCandidate:
    """Separating profile for a constant premium with cG - cB >= nu and the bad
    monopoly price at most cG.

    B mixes on [P_low, P_B^m] so that its profit is mu0 * pi_B^m everywhere;
    G sits on the best price at or above P_B^m + nu and sells only against a
    good rival.
    """

    def __init__(self, m: ValidatedMarket):
        nu = m.premium.nu0
        self.m = m
        self.p_bm, self.pi_bm = monopoly_price(FirmType.B, m)
        self.p_g = grid_argmax(lambda p: (p - m.c_g) * monopoly_demand(p, 1.0, m),
                               self.p_bm + nu, m.p_max)[0]
        lo, hi = m.c_b + 1e-12, self.p_bm
        r = lambda p: (p - m.c_b) * monopoly_demand(p, 0.0, m) - m.mu0 * self.pi_bm
        # bisection for the lower end of B's support
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if r(mid) < 0 else (lo, mid)
        self.p_low = hi

    def cdf(self, p):
        m, mu0 = self.m, self.m.mu0
        p = np.asarray(p, dtype=float)
        rev = (p - m.c_b) * monopoly_demand(p, 0.0, m)
        with np.errstate(divide="ignore"):
            out = 1 - mu0 / (1 - mu0) * (self.pi_bm / rev - 1)
        return np.clip(np.where(p >= self.p_bm, 1.0, out), 0.0, 1.0)

    def profile(self):
        m = self.m
        piece = Piece.from_function(self.cdf, self.p_low, self.p_bm)
        piece = Piece(piece.lo, piece.hi, piece.prices, piece.cdf / piece.mass)
        bad = PricingStrategy(pieces=(piece,))
        good = PricingStrategy.atom(self.p_g)
        rule = BeliefRule(0.0, ((self.p_g, self.p_g, 1.0),))
        return symmetric_profile(m, good, bad, rule, "separating")

    def private_price(self) -> float:
        """Closed-form expected transaction price (quadrature over B's cdf)."""
        mu0 = self.m.mu0
        s = self.cdf
        e_one = self.p_low + integrate.quad(lambda p: 1 - s(p), self.p_low, self.p_bm, epsabs=1e-13)[0]
        e_min = self.p_low + integrate.quad(lambda p: (1 - s(p)) ** 2, self.p_low, self.p_bm, epsabs=1e-13)[0]
        return mu0 * mu0 * self.p_g + 2 * mu0 * (1 - mu0) * e_one + (1 - mu0) ** 2 * e_min


def random_separating_market(rng: np.random.Generator, mu0: float | None = None) -> ValidatedMarket:
    """Uniform market with cG - cB >= nu and the bad monopoly price at most cG."""
    while True:
        c_b = rng.uniform(0.0, 0.3)
        p_bm = (1 + c_b) / 2
        c_g = rng.uniform(p_bm, 0.8)
        nu = rng.uniform(0.02, min(c_g - c_b, 0.4))
        try:
            return pos_market(mu0=rng.uniform(0.05, 0.95) if mu0 is None else mu0, c_g=c_g, c_b=c_b, nu0=nu)
        except ValueError:
            continue


def random_neg_market(rng: np.random.Generator) -> ValidatedMarket:
    """Uniform negative-regime market, constant or increasing premium."""
    while True:
        try:
            nu = rng.uniform(0.01, 0.3)
            return neg_market(mu0=rng.uniform(0.05, 0.95), c_b=rng.uniform(nu, 0.8), nu0=nu,
                              nu1=rng.choice([0.0, rng.uniform(0.0, 0.4)]))
        except ValueError:
            continue
