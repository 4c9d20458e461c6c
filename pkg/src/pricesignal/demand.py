"""Consumer choice: cutoffs, monopoly demand/profit/price and the duopoly split.

Every function is vectorised over prices and beliefs (numpy broadcasting).
With an affine premium each firm's surplus ``mu*h(v) + (1-mu)*v - P`` is
affine in ``v``, so all demand sets are intervals and the split is exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConstantPremium, SinglePeakViolation
from .market import FirmType, ValidatedMarket, _count_peaks

# |b_X - b_Y| below this counts as exact indifference between the two firms
TIE_TOL = 1e-12


@dataclass(frozen=True)
class DemandSplit:
    d_x: float
    d_y: float
    d_outside: float

    def __post_init__(self):
        total = self.d_x + self.d_y + self.d_outside
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"demand masses sum to {total}, not 1")

    def swapped(self) -> "DemandSplit":
        return DemandSplit(self.d_y, self.d_x, self.d_outside)


def cutoff_valuation(p, mu, m: ValidatedMarket):
    """Lowest valuation willing to buy at price ``p`` under belief ``mu``."""
    prem = m.premium
    v = (np.asarray(p, dtype=float) - mu * prem.nu0) / (1.0 + mu * prem.nu1)
    return np.clip(v, 0.0, m.v_bar)


def monopoly_demand(p, mu, m: ValidatedMarket):
    return 1.0 - m.dist.cdf(cutoff_valuation(p, mu, m))


def complete_info_belief(theta: FirmType) -> float:
    return 1.0 if FirmType(theta) is FirmType.G else 0.0


def monopoly_profit(theta: FirmType, p, mu, m: ValidatedMarket):
    return (np.asarray(p, dtype=float) - m.cost(theta)) * monopoly_demand(p, mu, m)


def monopoly_price(theta: FirmType, m: ValidatedMarket, n: int = 4096) -> tuple[float, float]:
    """Complete-information monopoly price and profit of type ``theta``.

    Demand is piecewise linear in price (one piece per cdf segment), so the
    profit is piecewise quadratic and its maximum sits at a segment vertex or
    a breakpoint.  ``n`` sets the grid used for the single-peak check.
    """
    mu = complete_info_belief(theta)
    c = m.cost(theta)
    f = lambda p: monopoly_profit(theta, p, mu, m)
    grid = np.linspace(0.0, m.p_max, n)
    if _count_peaks(f(grid)) > 1:
        raise SinglePeakViolation(f"monopoly profit of type {theta} has several local maxima")
    prem = m.premium
    knots = np.array([k[0] for k in m.dist.knots])
    breaks = mu * prem.nu0 + (1.0 + mu * prem.nu1) * knots
    cands = [0.0, m.p_max, *breaks[(breaks > 0) & (breaks < m.p_max)]]
    d = monopoly_demand(breaks, mu, m)
    for lo, hi, d_lo, d_hi in zip(breaks[:-1], breaks[1:], d[:-1], d[1:]):
        slope = (d_hi - d_lo) / (hi - lo)
        if slope < 0:
            # (p - c)(d_lo + slope (p - lo)) peaks where its derivative vanishes
            vertex = 0.5 * (c + lo - d_lo / slope)
            if lo < vertex < hi:
                cands.append(vertex)
    cands = np.array(sorted(set(float(x) for x in cands)))
    vals = f(cands)
    i = int(np.argmax(vals))
    return float(cands[i]), float(vals[i])


def indifferent_consumer(delta_p, m: ValidatedMarket):
    """Valuation at which h(v) - v equals the price gap ``P_G - P_B``."""
    prem = m.premium
    if prem.is_constant:
        raise ConstantPremium("indifferent consumer needs nu1 > 0")
    return np.clip((np.asarray(delta_p, dtype=float) - prem.nu0) / prem.nu1, 0.0, m.v_bar)


def choice_regions(p_own, mu_own, p_other, mu_other, m: ValidatedMarket, tie_share: float = 0.5):
    """Valuation intervals buying from each firm, with their weights.

    Returns ``(lo1, hi1, w1, lo2, hi2, w2)`` (arrays, broadcast): consumers
    in ``[lo1, hi1]`` buy from the own firm with weight ``w1`` (1, or
    ``tie_share`` on an exact tie), and likewise for the other firm (weight
    ``1 - tie_share`` on a tie).  Consumers buy from the higher-surplus firm
    when that surplus is weakly positive.
    """
    prem = m.premium
    p_own = np.asarray(p_own, dtype=float)
    p_other = np.asarray(p_other, dtype=float)
    mu_own = np.asarray(mu_own, dtype=float)
    mu_other = np.asarray(mu_other, dtype=float)
    a1 = 1.0 + mu_own * prem.nu1
    b1 = mu_own * prem.nu0 - p_own
    a2 = 1.0 + mu_other * prem.nu1
    b2 = mu_other * prem.nu0 - p_other
    r1 = -b1 / a1
    r2 = -b2 / a2
    da = a1 - a2
    db = b1 - b2
    v_bar = m.v_bar
    with np.errstate(divide="ignore", invalid="ignore"):
        rd = np.where(da != 0.0, -db / np.where(da != 0.0, da, 1.0), 0.0)

    up = da > 0.0  # own firm wins high valuations
    down = da < 0.0  # own firm wins low valuations
    flat = ~(up | down)
    own_better = db > TIE_TOL
    other_better = db < -TIE_TOL
    tie = flat & ~own_better & ~other_better
    empty = np.full(np.broadcast(r1, r2).shape, v_bar)

    lo1 = np.where(up, np.maximum(r1, rd), np.where(down | own_better, r1, np.where(tie, np.minimum(r1, r2), empty)))
    hi1 = np.where(down, np.minimum(rd, v_bar), v_bar)
    lo2 = np.where(up | other_better, r2, np.where(down, np.maximum(r2, rd), np.where(tie, np.minimum(r1, r2), empty)))
    hi2 = np.where(up, np.minimum(rd, v_bar), v_bar)
    w1 = np.where(tie, tie_share, 1.0)
    w2 = np.where(tie, 1.0 - tie_share, 1.0)

    def clip(lo, hi):
        lo = np.clip(lo, 0.0, v_bar)
        return lo, np.maximum(np.clip(hi, 0.0, v_bar), lo)

    lo1, hi1 = clip(lo1, hi1)
    lo2, hi2 = clip(lo2, hi2)
    return lo1, hi1, w1, lo2, hi2, w2


def split_masses(p_own, mu_own, p_other, mu_other, m: ValidatedMarket, tie_share: float = 0.5):
    """Demand of the 'own' firm and of the other firm (arrays, broadcast).

    Exact ties split half/half unless ``tie_share`` says otherwise.
    """
    lo1, hi1, w1, lo2, hi2, w2 = choice_regions(p_own, mu_own, p_other, mu_other, m, tie_share)
    F = m.dist.cdf
    return w1 * (F(hi1) - F(lo1)), w2 * (F(hi2) - F(lo2))


def duopoly_split(p_x: float, mu_x: float, p_y: float, mu_y: float, m: ValidatedMarket) -> DemandSplit:
    d_x, d_y = split_masses(p_x, mu_x, p_y, mu_y, m)
    d_x, d_y = float(d_x), float(d_y)
    return DemandSplit(d_x, d_y, max(0.0, 1.0 - d_x - d_y))
