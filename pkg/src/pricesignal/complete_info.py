"""Bertrand benchmarks when both firms' types are public."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .demand import DemandSplit, complete_info_belief, monopoly_demand, monopoly_price, split_masses
from .errors import ConstantPremium, NoConvergence, PriceSignalError
from .market import FirmType, Regime, ValidatedMarket
from .numerics import grid_argmax

log = logging.getLogger(__name__)

BR_GRID = 4096
BR_TOL = 1e-7
MAX_ITER = 10_000
MULTI_TOL = 1e-5
# best-response profits at or below this mean the firm cannot sell profitably
ZERO_PROFIT = 1e-12

KNIFE_EDGE = "KnifeEdge"
KNIFE_TOL = 1e-12
CYCLE_GAP = 1e-5
NON_UNIQUE_PRICE = "NonUniquePrice"
MULTIPLE_EQUILIBRIA = "MultipleEquilibria"


@dataclass(frozen=True)
class BenchmarkOutcome:
    """Prices, demands and profits of firms X and Y with public types."""

    type_pair: tuple[FirmType, FirmType]
    prices: tuple[float, float]
    demands: DemandSplit
    trade_price: float
    profits: tuple[float, float]
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "types": [t.value for t in self.type_pair],
            "prices": list(self.prices),
            "demands": [self.demands.d_x, self.demands.d_y, self.demands.d_outside],
            "tradePrice": self.trade_price,
            "profits": list(self.profits),
            "flags": list(self.flags),
        }


def _outcome(types, prices, d, m: ValidatedMarket, flags=()) -> BenchmarkOutcome:
    d_x, d_y = d
    profits = tuple((p - m.cost(t)) * q for p, t, q in zip(prices, types, (d_x, d_y)))
    sold = d_x + d_y
    trade = (prices[0] * d_x + prices[1] * d_y) / sold if sold > 0 else min(prices)
    split = DemandSplit(d_x, d_y, max(0.0, 1.0 - sold))
    return BenchmarkOutcome(tuple(types), tuple(map(float, prices)), split, float(trade),
                            tuple(map(float, profits)), tuple(flags))


def solve_symmetric(theta: FirmType, m: ValidatedMarket) -> BenchmarkOutcome:
    """Both firms share ``theta`` and price at marginal cost."""
    theta = FirmType(theta)
    c = m.cost(theta)
    mu = complete_info_belief(theta)
    d_x, d_y = split_masses(c, mu, c, mu, m)
    return _outcome((theta, theta), (c, c), (float(d_x), float(d_y)), m)


def solve_asym_constant(m: ValidatedMarket) -> BenchmarkOutcome:
    """G is firm X, B is firm Y, constant quality premium.

    The firm with the lower cost relative to its quality serves everyone who
    buys at the rival's limit price (or at its own monopoly price if that is
    lower); the rival prices at marginal cost and sells nothing.
    """
    prem = m.premium
    if not prem.is_constant:
        raise PriceSignalError("constant-premium benchmark needs nu1 = 0")
    nu = prem.nu0
    flags: list[str] = []
    gap = m.c_g - m.c_b
    edge = m.regime is Regime.POSITIVE and abs(gap - nu) <= KNIFE_TOL
    b_serves = m.regime is Regime.POSITIVE and (gap > nu or edge)
    if edge:
        flags.append(KNIFE_EDGE)
        log.warning("cG - cB equals nu exactly; using the branch where B serves")
    if b_serves:
        p_b = min(m.c_g - nu, monopoly_price(FirmType.B, m)[0])
        prices = (m.c_g, p_b)
        d = (0.0, float(monopoly_demand(p_b, 0.0, m)))
    else:
        p_g = min(m.c_b + nu, monopoly_price(FirmType.G, m)[0])
        prices = (p_g, m.c_b)
        d = (float(monopoly_demand(p_g, 1.0, m)), 0.0)
    return _outcome((FirmType.G, FirmType.B), prices, d, m, flags)


def _own_demand(p, mu, p_rival, mu_rival, m):
    return split_masses(p, mu, p_rival, mu_rival, m)[0]


def _zero_demand_bound(theta: FirmType, p_rival: float, m: ValidatedMarket) -> float:
    """Lowest own price at which the firm sells nothing against ``p_rival``."""
    mu = complete_info_belief(theta)
    mu_r = 1.0 - mu
    d = lambda p: float(_own_demand(p, mu, p_rival, mu_r, m))
    if d(0.0) <= 0.0:
        return 0.0
    lo, hi = 0.0, m.p_max
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if d(mid) > 0.0 else (lo, mid)
    return hi


def best_response(theta: FirmType, p_rival: float, m: ValidatedMarket,
                  n: int = BR_GRID) -> tuple[float, float, bool]:
    """Best price of a public type ``theta`` facing the other type at ``p_rival``.

    Returns ``(price, profit, sells)``.  When no price earns positive profit
    the firm is placed at the lowest price with zero demand.
    """
    theta = FirmType(theta)
    mu = complete_info_belief(theta)
    c = m.cost(theta)
    f = lambda p: (p - c) * _own_demand(p, mu, p_rival, 1.0 - mu, m)
    p, v = grid_argmax(f, 0.0, m.p_max, n=n)
    if v <= ZERO_PROFIT:
        return _zero_demand_bound(theta, p_rival, m), 0.0, False
    return p, v, True


def _iterate(m: ValidatedMarket, p_g: float, p_b: float, n: int) -> tuple[float, float, bool, bool]:
    sells_g = sells_b = True
    prev = None
    for _ in range(MAX_ITER):
        new_g, _, sells_g = best_response(FirmType.G, p_b, m, n)
        new_b, _, sells_b = best_response(FirmType.B, new_g, m, n)
        step = max(abs(new_g - p_g), abs(new_b - p_b))
        if step < BR_TOL:
            return new_g, new_b, sells_g, sells_b
        # back where we were two rounds ago while still moving: a two-cycle
        if prev is not None and max(abs(new_g - prev[0]), abs(new_b - prev[1])) < BR_TOL and step > CYCLE_GAP:
            raise NoConvergence(f"best responses cycle between ({p_g:g}, {p_b:g}) and ({new_g:g}, {new_b:g})")
        prev = (p_g, p_b)
        p_g, p_b = new_g, new_b
    raise NoConvergence(f"best responses still moving after {MAX_ITER} rounds")


def solve_asym_increasing(m: ValidatedMarket, n: int = BR_GRID) -> BenchmarkOutcome:
    """G is firm X, B is firm Y, strictly increasing premium.

    Alternating best responses on the exact demand split, started from
    marginal costs and again from the monopoly prices.
    """
    if m.premium.is_constant:
        raise ConstantPremium("increasing-premium benchmark needs nu1 > 0")
    flags: list[str] = []
    p_g, p_b, sells_g, sells_b = _iterate(m, m.c_g, m.c_b, n)
    alt_g, alt_b, *_ = _iterate(m, monopoly_price(FirmType.G, m)[0], monopoly_price(FirmType.B, m)[0], n)
    if max(abs(alt_g - p_g), abs(alt_b - p_b)) > MULTI_TOL:
        flags.append(MULTIPLE_EQUILIBRIA)
        log.warning("best-response iteration reached two fixed points: (%g, %g) and (%g, %g)",
                    p_g, p_b, alt_g, alt_b)
    if not (sells_g and sells_b):
        flags.append(NON_UNIQUE_PRICE)
    d_g, d_b = split_masses(p_g, 1.0, p_b, 0.0, m)
    return _outcome((FirmType.G, FirmType.B), (p_g, p_b), (float(d_g), float(d_b)), m, flags)


def solve(types: tuple[FirmType, FirmType], m: ValidatedMarket) -> BenchmarkOutcome:
    """Dispatch on the type pair and premium shape; X has ``types[0]``."""
    t_x, t_y = (FirmType(t) for t in types)
    if t_x is t_y:
        return solve_symmetric(t_x, m)
    out = solve_asym_constant(m) if m.premium.is_constant else solve_asym_increasing(m)
    if t_x is FirmType.B:
        out = BenchmarkOutcome((t_x, t_y), out.prices[::-1], out.demands.swapped(), out.trade_price,
                               out.profits[::-1], out.flags)
    return out


@dataclass(frozen=True)
class AuditResult:
    passed: bool
    gains: tuple[float, float]
    witnesses: tuple[float, float]


def best_response_audit(out: BenchmarkOutcome, m: ValidatedMarket, n: int = BR_GRID,
                        tol: float = 1e-6) -> AuditResult:
    """Largest unilateral gain on an ``n``-point price grid (half/half ties)."""
    grid = np.linspace(0.0, m.p_max, n)
    gains, wits = [], []
    for k in (0, 1):
        theta, rival = out.type_pair[k], out.type_pair[1 - k]
        mu, mu_r = complete_info_belief(theta), complete_info_belief(rival)
        prof = (grid - m.cost(theta)) * _own_demand(grid, mu, out.prices[1 - k], mu_r, m)
        i = int(np.argmax(prof))
        gains.append(float(prof[i] - out.profits[k]))
        wits.append(float(grid[i]))
    return AuditResult(max(gains) <= tol, tuple(gains), tuple(wits))
