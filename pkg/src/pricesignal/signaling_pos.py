"""Pooling constructions and equilibrium audits when the good type costs more."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .demand import monopoly_price
from .errors import CaseOverlap, PoolingInfeasible
from .market import FirmId, FirmType, Regime, ValidatedMarket
from .profile import MASS_EPS, PricingStrategy, StrategyProfile, pooling_profile
from .signaling_neg import AuditReport, _monotonicity
from .verifier import discretize, scan, verify_pbe

IC_CONDITION_FAILS = "ICConditionFails"


def _require_positive(m: ValidatedMarket):
    if m.regime is not Regime.POSITIVE:
        raise ValueError("operation needs a positive-regime market")


def pooling_bound(m: ValidatedMarket) -> float:
    """Upper limit of pool prices that keep a bad rival from luring buyers
    with v >= cB at a price of cB: mu0 h(cB) + (1 - mu0) cB."""
    return float(m.mu0 * m.h(m.c_b) + (1 - m.mu0) * m.c_b)


def _shared_prices(a: PricingStrategy, b: PricingStrategy) -> float:
    """Number of prices both strategies charge (inf for overlapping pieces)."""
    shared = 0.0
    atoms_b = b.support_atoms()
    for p in a.support_atoms():
        if any(abs(p - q) <= 1e-12 for q in atoms_b):
            shared += 1
    for pa in a.pieces:
        for pb in b.pieces:
            if pa.mass > MASS_EPS and pb.mass > MASS_EPS and min(pa.hi, pb.hi) - max(pa.lo, pb.lo) > 1e-12:
                return float("inf")
    for p in atoms_b:
        if any(pc.lo < p < pc.hi and pc.mass > MASS_EPS for pc in a.pieces):
            shared += 1
    for p in a.support_atoms():
        if any(pc.lo < p < pc.hi and pc.mass > MASS_EPS for pc in b.pieces):
            shared += 1
    return shared


def audit_type_monotonicity(profile: StrategyProfile, n: int = 2048) -> AuditReport:
    """Bad types sell weakly more and, where they sell, price weakly lower;
    the two types of a firm share at most one price."""
    _require_positive(profile.market)
    rep = _monotonicity(profile, bad_lower=True, n=n)
    if not rep.passed:
        return rep
    for f in FirmId:
        k = _shared_prices(profile.strategy(f, FirmType.G), profile.strategy(f, FirmType.B))
        if k > 1:
            return AuditReport(False, (f"supports of {f.value}G and {f.value}B share {k} prices",))
    return AuditReport(True)


def construct_symmetric_pooling(p0: float, m: ValidatedMarket, n: int = 2048, eps: float = 1e-6) -> StrategyProfile:
    """Every type of both firms prices at ``p0``; off-path belief is worst."""
    _require_positive(m)
    bound = pooling_bound(m)
    if not m.c_g <= p0 < bound:
        raise PoolingInfeasible(f"pool price {p0} outside [cG, {bound})")
    prof = pooling_profile(m, p0, label="symmetric-pooling")
    if not verify_pbe(prof, n, eps).passed:
        raise PoolingInfeasible(f"pooling on {p0} admits a profitable deviation")
    return prof


def asym_ic_sides(p_low: float, p_high: float, m: ValidatedMarket) -> tuple[float, float]:
    """Both sides of the survival inequality for asymmetric pooling
    (constant premium): a bad type of the low firm compares its pool profit
    with the best price that still beats the high firm at belief 1."""
    nu, mu0, F = m.premium.nu0, m.mu0, m.dist.cdf
    lhs = (p_high + (1 - mu0) * nu - m.c_b) * (1 - F(p_high - mu0 * nu))
    rhs = (p_low - m.c_b) * (1 - F(p_low - mu0 * nu))
    return float(lhs), float(rhs)


def construct_asym_pooling(p_low: float, p_high: float, m: ValidatedMarket,
                           n: int = 2048, eps: float = 1e-6) -> StrategyProfile:
    """X pools on ``p_low`` and serves the market; Y pools on ``p_high`` and sells nothing.

    The profile's ``meta['flags']`` carries ``ICConditionFails`` when the
    survival inequality does not hold.
    """
    _require_positive(m)
    if not m.premium.is_constant:
        raise ValueError("asymmetric pooling construction needs a constant premium")
    bound = pooling_bound(m)
    if not m.c_g < p_low < bound:
        raise PoolingInfeasible(f"low pool price {p_low} outside (cG, {bound})")
    if not p_high > p_low:
        raise PoolingInfeasible("high pool price must exceed the low one")
    prof = pooling_profile(m, p_low, p_high, label="asymmetric-pooling")
    if not verify_pbe(prof, n, eps).passed:
        raise PoolingInfeasible(f"pools at ({p_low}, {p_high}) admit a profitable deviation")
    lhs, rhs = asym_ic_sides(p_low, p_high, m)
    flags = [] if lhs > rhs else [IC_CONDITION_FAILS]
    return StrategyProfile(m, prof.strategies, prof.beliefs, prof.label,
                           {"flags": flags, "icLhs": lhs, "icRhs": rhs})


@dataclass(frozen=True)
class BoundsReport:
    passed: bool
    slack: dict[str, float]
    violations: tuple[str, ...] = field(default=())


def audit_separating_bounds(profile: StrategyProfile, n: int = 2048, tol: float = 1e-9) -> BoundsReport:
    """Price and profit bounds every separating equilibrium satisfies under a
    constant premium.  Positive slack means the bound holds."""
    m = profile.market
    _require_positive(m)
    if not m.premium.is_constant:
        raise ValueError("separating bounds need a constant premium")
    nu = m.premium.nu0
    p_b_mono = monopoly_price(FirmType.B, m)[0]
    sc = scan(discretize(profile, n))
    slack: dict[str, float] = {}
    for f in FirmId:
        g, b = profile.strategy(f, FirmType.G), profile.strategy(f, FirmType.B)
        k = f.value
        slack[f"{k}: low B price above cB"] = b.lower - m.c_b
        slack[f"{k}: B profit positive"] = sc.eq_profit[(f, FirmType.B)]
        slack[f"{k}: low G price above high B price plus nu"] = g.lower - (b.upper + nu)
        slack[f"{k}: high B price at most B monopoly price"] = p_b_mono - b.upper
        if m.c_g - m.c_b <= nu:
            slack[f"{k}: low G price above cG"] = g.lower - m.c_g
            slack[f"{k}: G profit positive"] = sc.eq_profit[(f, FirmType.G)]
    viol = []
    for name, s in slack.items():
        weak = "at most" in name
        if (s < -tol) if weak else (s <= tol):
            viol.append(name)
    return BoundsReport(not viol, slack, tuple(viol))


def semiseparating_bound_holds(p_gs: float, p0: float, m: ValidatedMarket) -> bool:
    """A semiseparating good-type price must exceed the pool price by more
    than (1 - mu0) nu."""
    return p_gs > p0 + (1 - m.mu0) * m.premium.nu0


@dataclass(frozen=True)
class HomogeneousBenchmark:
    """Both published case lists for homogeneous consumers, side by side."""

    first_case: str
    first_p_g: float
    second_case: str
    second_p_g: float
    second_b_interval: tuple[float, float]
    p_g: float
    incomplete_raises_p_b: bool
    mu0_threshold: float
    p_b_may_fall: bool


def homogeneous_benchmark(v_g: float, v_b: float, m: ValidatedMarket) -> HomogeneousBenchmark:
    """Consumers all value good quality at ``v_g`` and bad at ``v_b``.

    Raises ``CaseOverlap`` when the two case lists assign different case
    labels (this happens exactly at ``v_b = cB + v_g - v_b``).
    """
    c_g, c_b, mu0 = m.c_g, m.c_b, m.mu0
    if not v_g > v_b > c_b:
        raise ValueError("need v_g > v_b > cB")
    d = v_g - v_b
    first = "a" if v_b > c_b + d else "b"
    second = "a" if v_b >= c_b + d else "b"
    if first != second:
        raise CaseOverlap(f"case lists disagree at v_b = cB + v_g - v_b (first {first}, second {second})")
    first_p_g = v_g if first == "a" else max(c_g, c_b + 2 * d)
    if second == "a":
        second_p_g = c_b + 2 * d
        interval = (c_b + mu0 * d, c_b + d)
    else:
        second_p_g = v_g
        interval = (c_b + mu0 * (v_b - c_b), v_b)
    p_g = max(c_g, second_p_g)
    raises = c_g - c_b <= d
    threshold = (c_g - c_b - v_g + v_b) / (v_b - c_b)
    return HomogeneousBenchmark(first, first_p_g, second, second_p_g, interval, p_g, raises,
                                threshold, (not raises) and mu0 < threshold)
