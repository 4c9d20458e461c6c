"""Equilibria when the good type has the lower cost (cG = 0 < cB).

The unique equilibrium surviving the Intuitive Criterion has both bad types
at an atom on cB and both good types mixing without atoms on [P_low, cB),
where P_low equates the good type's monopoly revenue with its revenue at cB
when only a bad rival leaves it demand.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .demand import monopoly_demand, split_masses
from .errors import NoRoot, OutOfSupport, PoolingInfeasible
from .market import FirmId, FirmType, Regime, ValidatedMarket, validate
from .numerics import bisect_root
from .profile import PIECE_SAMPLES, BeliefRule, Piece, PricingStrategy, StrategyProfile, pooling_profile, symmetric_profile
from .verifier import ELIMINATED, GridGame, discretize, expected_demand, posterior_beliefs, scan, verify_game, verify_pbe

ROOT_TOL = 1e-13


def _require_negative(m: ValidatedMarket):
    if m.regime is not Regime.NEGATIVE:
        raise ValueError("operation needs a negative-regime market")


def _revenue(p, m: ValidatedMarket):
    """Good-type revenue as a monopolist believed to be good."""
    return np.asarray(p, dtype=float) * monopoly_demand(p, 1.0, m)


def _indifference_level(m: ValidatedMarket) -> float:
    # profit a good type earns at cB, where only a bad rival leaves it demand
    return float(m.c_b * (1 - m.mu0) * monopoly_demand(m.c_b, 1.0, m))


def _invert_revenue(y, m: ValidatedMarket) -> np.ndarray:
    """Vectorised bisection for p in [0, cB] with revenue(p) = y."""
    y = np.asarray(y, dtype=float)
    lo = np.zeros(y.shape)
    hi = np.full(y.shape, m.c_b)
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        below = _revenue(mid, m) < y
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def lower_support_price(m: ValidatedMarket) -> float:
    """Bottom of the good type's mixing support."""
    _require_negative(m)
    k = _indifference_level(m)
    try:
        return bisect_root(lambda p: float(_revenue(p, m)) - k, 0.0, m.c_b, xtol=ROOT_TOL)
    except ValueError as exc:
        raise NoRoot("no lower support price in (0, cB)") from exc


def _cdf_formula(p, m: ValidatedMarket):
    mu0 = m.mu0
    with np.errstate(divide="ignore"):
        return 1.0 / mu0 - _indifference_level(m) / (mu0 * _revenue(p, m))


def good_type_cdf(p, m: ValidatedMarket, p_low: float | None = None):
    """Equilibrium price cdf of the good type on ``[P_low, cB)``."""
    _require_negative(m)
    p_low = lower_support_price(m) if p_low is None else p_low
    arr = np.asarray(p, dtype=float)
    if np.any(arr < p_low - 1e-12) or np.any(arr >= m.c_b):
        raise OutOfSupport(f"price outside the good type's support [{p_low}, {m.c_b})")
    out = np.clip(_cdf_formula(arr, m), 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def good_price_quantile(u, m: ValidatedMarket) -> np.ndarray:
    """Inverse of the good-type cdf: revenue(P) = level / (1 - mu0 u)."""
    u = np.asarray(u, dtype=float)
    return _invert_revenue(_indifference_level(m) / (1.0 - m.mu0 * u), m)


def sample_good_price(m: ValidatedMarket, seed: int, size: int | None = None):
    """Inverse-cdf draws of the good type's price, deterministic in ``seed``.

    Draws come from ``numpy.random.default_rng(seed)`` in order, so draw k of
    a batch equals draw k of any longer batch with the same seed.
    """
    _require_negative(m)
    u = np.random.default_rng(seed).random(size)
    out = good_price_quantile(u, m)
    return float(out) if size is None else out


@dataclass(frozen=True)
class NegCorrEquilibrium:
    p_b: float
    p_g_low: float
    g_cdf: Piece
    belief: BeliefRule

    def __post_init__(self):
        if not 0.0 < self.p_g_low < self.p_b:
            raise ValueError("lower support price must lie in (0, cB)")
        if abs(self.g_cdf.cdf[0]) > 1e-9 or abs(self.g_cdf.cdf[-1] - 1.0) > 1e-9:
            raise ValueError("good-type cdf must run from 0 to 1")


def theorem_equilibrium(m: ValidatedMarket, below_support_belief: float = 0.0,
                        n: int = PIECE_SAMPLES) -> NegCorrEquilibrium:
    _require_negative(m)
    p_low = lower_support_price(m)
    # demand kinks inside the support become samples so interpolation is exact there
    kinks = np.asarray(m.h(np.array([0.0, *m.dist.kinks, m.v_bar])), dtype=float)
    kinks = kinks[(kinks > p_low) & (kinks < m.c_b)]
    prices = np.union1d(np.linspace(p_low, m.c_b, n - len(kinks)), kinks)
    cdf = np.empty(n)
    cdf[:-1] = good_type_cdf(prices[:-1], m, p_low)
    cdf[-1] = 1.0
    cdf[0] = 0.0
    cdf = np.maximum.accumulate(cdf)
    belief = BeliefRule(0.0, ((p_low, m.c_b, 1.0), (m.c_b, m.c_b, 0.0), (0.0, p_low, below_support_belief)))
    return NegCorrEquilibrium(m.c_b, p_low, Piece(p_low, m.c_b, prices, cdf), belief)


def construct_theorem_equilibrium(m: ValidatedMarket, below_support_belief: float = 0.0) -> StrategyProfile:
    """Both firms: bad type at cB, good type mixing on [P_low, cB).

    Beliefs are 1 on the mixing interval, 0 at cB and above.  Below the
    support the belief is ``below_support_belief`` (worst by default).
    """
    eq = theorem_equilibrium(m, below_support_belief)
    good = PricingStrategy(pieces=(eq.g_cdf,))
    bad = PricingStrategy.atom(m.c_b)
    meta = {"pGLow": eq.p_g_low, "pB": eq.p_b, "gProfit": _indifference_level(m)}
    return symmetric_profile(m, good, bad, eq.belief, "theorem", meta)


def good_type_interim_profit(p, m: ValidatedMarket):
    """Good-type profit at ``p`` on the support, rival playing the mixed equilibrium.

    A good rival undercuts with probability sigma(p); a bad rival at cB never does.
    """
    sigma = good_type_cdf(p, m)
    return np.asarray(p) * (1 - m.mu0 * sigma) * monopoly_demand(p, 1.0, m)


def _pooling_passes(m: ValidatedMarket, n: int, eps: float) -> bool:
    return verify_pbe(pooling_profile(m, m.c_b, label="pooling-cB"), n, eps).passed


def pooling_cutoff(m: ValidatedMarket, n: int = 2048, eps: float = 1e-6, tol: float = 1e-6) -> float:
    """Largest cB (other parameters fixed) at which pooling on cB is a PBE.

    Bisects between the smallest valid cB and the largest; raises
    ``PoolingInfeasible`` when pooling fails even at the smallest.
    """
    _require_negative(m)
    p = m.params

    def valid(cb):
        try:
            return validate(p.replace(c_b=cb))
        except ValueError:
            return None

    lo = max(m.h(0.0), 1e-9)
    hi = m.v_bar * (1 - 1e-9)
    while valid(lo) is None and lo < hi:
        lo += 1e-3 * m.v_bar
    lm = valid(lo)
    if lm is None or not _pooling_passes(lm, n, eps):
        raise PoolingInfeasible("pooling on cB fails for every valid cB")
    while valid(hi) is None:
        hi = 0.5 * (lo + hi)
    if _pooling_passes(valid(hi), n, eps):
        return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        mm = valid(mid)
        if mm is not None and _pooling_passes(mm, n, eps):
            lo = mid
        else:
            hi = mid
    return lo


def construct_pooling_cB(m: ValidatedMarket, n: int = 2048, eps: float = 1e-6) -> StrategyProfile:
    """All types of both firms at cB with the prior as belief there.

    Raises ``PoolingInfeasible`` when cB lies above the located cutoff or the
    profile fails verification.
    """
    _require_negative(m)
    cutoff = pooling_cutoff(m, n, eps)
    prof = pooling_profile(m, m.c_b, label="pooling-cB")
    if m.c_b > cutoff or not verify_pbe(prof, n, eps).passed:
        raise PoolingInfeasible(f"cB = {m.c_b} exceeds the pooling cutoff {cutoff}")
    return StrategyProfile(m, prof.strategies, prof.beliefs, prof.label, {"cutoff": cutoff})


@dataclass(frozen=True)
class AuditReport:
    passed: bool
    violations: tuple[str, ...] = ()
    witness: tuple[float, float] | None = None
    details: dict | None = None


def support_samples(s: PricingStrategy, q: int = 64) -> np.ndarray:
    """Every atom plus ``q`` interior quantiles of each piece."""
    pts = [p for p, w in s.atoms if w > 1e-12]
    u = (np.arange(q) + 0.5) / q
    for pc in s.pieces:
        if pc.mass > 1e-12:
            pts.extend(pc.quantile(u))
    return np.array(sorted(pts))


def support_demands(profile: StrategyProfile, n: int = 2048, q: int = 64, game: GridGame | None = None):
    """Per firm and type: sampled support prices and the expected demand there."""
    g = game or discretize(profile, n)
    beliefs = posterior_beliefs(g)
    out = {}
    for f in FirmId:
        rival_mu = beliefs[f.rival][0]
        for t in FirmType:
            p = support_samples(profile.strategy(f, t), q)
            mu = profile.posterior(f, p)
            out[(f, t)] = (p, expected_demand(g, f, p, mu, rival_mu))
    return out


def _monotonicity(profile: StrategyProfile, bad_lower: bool, n: int, tol: float = 1e-9) -> AuditReport:
    sd = support_demands(profile, n)
    for f in FirmId:
        pg, dg = sd[(f, FirmType.G)]
        pb, db = sd[(f, FirmType.B)]
        for i, p_b in enumerate(pb):
            for j, p_g in enumerate(pg):
                if bad_lower:
                    # bad type sells more and, when it sells, charges less
                    if db[i] < dg[j] - tol:
                        return AuditReport(False, ("demand order",), (p_g, p_b))
                    if db[i] > tol and p_g < p_b - tol:
                        return AuditReport(False, ("price order",), (p_g, p_b))
                else:
                    if dg[j] < db[i] - tol:
                        return AuditReport(False, ("demand order",), (p_g, p_b))
                    if db[i] > tol and p_g > p_b + tol:
                        return AuditReport(False, ("price order",), (p_g, p_b))
    return AuditReport(True)


def audit_neg_monotonicity(profile: StrategyProfile, n: int = 2048) -> AuditReport:
    """Good types sell weakly more and, where bad types sell, price weakly lower."""
    _require_negative(profile.market)
    return _monotonicity(profile, bad_lower=False, n=n)


def audit_belief_threat_bounds(profile: StrategyProfile, n: int = 2048, tol: float = 1e-9) -> AuditReport:
    """Profit pattern every equilibrium must show when good types are cheaper.

    Some good type earns a positive profit; a good type without demand leaves
    the rival's two types above cB with positive profit; symmetric profiles
    give both good types positive profit.
    """
    m = profile.market
    _require_negative(m)
    g = discretize(profile, n)
    sc = scan(g)
    pi = sc.eq_profit
    viol = []
    if not any(pi[(f, FirmType.G)] > tol for f in FirmId):
        viol.append("no good type earns positive profit")
    for f in FirmId:
        d_g = float(g.prob(f, FirmType.G) @ sc.demand[f])
        if d_g <= tol:
            r = f.rival
            for t in FirmType:
                s = profile.strategy(r, t)
                if s.lower <= m.c_b or pi[(r, t)] <= tol:
                    viol.append(f"{f.value}G has no demand but {r.value}{t.value} is not above cB with profit")
    if profile.is_symmetric and any(pi[(f, FirmType.G)] <= tol for f in FirmId):
        viol.append("symmetric profile with a zero-profit good type")
    details = {f"{k[0].value}{k[1].value}": v for k, v in pi.items()}
    return AuditReport(not viol, tuple(viol), None, details)


def two_good_rivals_demand(p, m: ValidatedMarket):
    """Demand of a good type at ``p`` when the rival is the other good type
    at its equilibrium mix (no ties: the rival is atomless)."""
    return (1 - good_type_cdf(p, m)) * monopoly_demand(p, 1.0, m)


def pooling_deviation_ratio(m: ValidatedMarket, delta: float) -> float:
    """Demand gain factor of a good type undercutting a cB pool to cB - delta
    when believed good (the rival pooling at cB with the prior)."""
    d_dev, _ = split_masses(m.c_b - delta, 1.0, m.c_b, m.mu0, m)
    d_eq, _ = split_masses(m.c_b, m.mu0, m.c_b, m.mu0, m)
    return float(d_dev / d_eq)


# --- exhaustive search over a restricted symmetric family --------------------

SWEEP_WEIGHTS = tuple(np.arange(1, 10) / 10)


@dataclass(frozen=True)
class GridCandidate:
    """Symmetric grid profile: B at ``p_b``; G at ``p_g1`` w.p. ``w``, else ``p_g2``."""

    p_b: float
    p_g1: float
    p_g2: float
    w: float
    gain_g: float
    gain_b: float
    ic: str = ""
    near_theorem: bool = False


@dataclass(frozen=True)
class UniquenessSweep:
    grid: np.ndarray
    cell: float
    eps: float
    checked: int
    equilibria: tuple[GridCandidate, ...]

    @property
    def survivors(self) -> tuple[GridCandidate, ...]:
        return tuple(c for c in self.equilibria if c.ic != ELIMINATED)

    @property
    def stray(self) -> tuple[GridCandidate, ...]:
        """Surviving equilibria that are not close to the mixed equilibrium."""
        return tuple(c for c in self.survivors if not c.near_theorem)


def sweep_grid(m: ValidatedMarket, n: int = 64) -> np.ndarray:
    """``n`` even prices on [0, h(v_bar)] with the nearest one moved to cB."""
    grid = np.linspace(0.0, float(m.h(m.v_bar)), n)
    grid[int(np.argmin(np.abs(grid - m.c_b)))] = m.c_b
    return np.sort(grid)


def _sweep_game(m, grid, i_b, i1, i2, w) -> GridGame:
    pg = np.zeros(len(grid))
    pg[i1] += w
    pg[i2] += 1 - w
    pb = np.zeros(len(grid))
    pb[i_b] = 1.0
    probs = {(f, t): (pg if t is FirmType.G else pb) for f in FirmId for t in FirmType}
    rule = BeliefRule.worst()
    return GridGame(grid, m, probs, {f: rule for f in FirmId})


def uniqueness_sweep(m: ValidatedMarket, n: int = 64, eps: float | None = None,
                     weights=SWEEP_WEIGHTS) -> UniquenessSweep:
    """Every symmetric profile with B on one grid price and G on one or two grid
    prices (mixing weights ``weights``), off-path belief worst.

    A vectorized scan finds the epsilon-equilibria; each one is re-verified
    through ``verify_game`` (which must agree on the gains) and then put to
    the Intuitive Criterion.
    """
    _require_negative(m)
    eps = 1e-6 * m.v_bar if eps is None else eps
    grid = sweep_grid(m, n)
    cell = float(grid[-1] / (n - 1))
    mu0 = m.mu0
    ws = np.array(sorted(set(weights) | {1.0}))
    shared = mu0 * ws / (mu0 * ws + 1 - mu0)
    mus = np.concatenate([[0.0, 1.0], shared])
    k = len(mus)
    # S[a, i, b, j]: own demand at grid[i] with belief mus[a] against a rival at grid[j] with belief mus[b]
    S, _ = split_masses(grid[None, :, None, None], mus[:, None, None, None],
                        grid[None, None, None, :], mus[None, None, :, None], m)
    S = np.broadcast_to(S, (k, n, k, n))

    def widx(x):
        return 2 + np.searchsorted(ws, np.round(x, 12))

    i1s, i2s, wl = [], [], []
    for i in range(n):
        i1s.append(i); i2s.append(i); wl.append(1.0)
        for j in range(i + 1, n):
            for w in ws[:-1]:
                i1s.append(i); i2s.append(j); wl.append(w)
    i1s, i2s, wl = np.array(i1s), np.array(i2s), np.array(wl)
    rows = np.arange(len(wl))
    cols = np.arange(n)
    found = []
    for ib in range(n):
        # belief index at each support price
        a1 = np.where(i1s == ib, widx(np.where(i2s == i1s, 1.0, wl)), 1)
        a2 = np.where(i2s == ib, widx(np.where(i2s == i1s, 1.0, 1 - wl)), 1)
        ab = np.where(i1s == ib, a1, np.where(i2s == ib, a2, 0))
        A = np.zeros((len(wl), n), dtype=int)
        A[rows, i2s] = a2
        A[rows, i1s] = a1
        A[rows, ib] = ab
        D = (mu0 * wl)[:, None] * S[A, cols[None, :], a1[:, None], i1s[:, None]]
        D += np.where(i2s == i1s, 0.0, mu0 * (1 - wl))[:, None] * S[A, cols[None, :], a2[:, None], i2s[:, None]]
        D += (1 - mu0) * S[A, cols[None, :], ab[:, None], ib]
        pi_g = (grid - m.c_g)[None, :] * D
        pi_b = (grid - m.c_b)[None, :] * D
        eq_g = wl * pi_g[rows, i1s] + np.where(i2s == i1s, 0.0, (1 - wl) * pi_g[rows, i2s])
        gain_g = pi_g.max(axis=1) - eq_g
        gain_b = pi_b.max(axis=1) - pi_b[:, ib]
        for r in np.flatnonzero((gain_g <= eps) & (gain_b <= eps)):
            found.append((ib, int(i1s[r]), int(i2s[r]), float(wl[r]), float(gain_g[r]), float(gain_b[r])))

    p_low = lower_support_price(m)
    out = []
    for ib, i1, i2, w, gg, gb in found:
        rep = verify_game(_sweep_game(m, grid, ib, i1, i2, w), eps, ic=True)
        ref_g = max(rep.max_gain[(f, FirmType.G)] for f in FirmId)
        ref_b = max(rep.max_gain[(f, FirmType.B)] for f in FirmId)
        if not rep.passed or abs(ref_g - gg) > 1e-12 or abs(ref_b - gb) > 1e-12:
            raise AssertionError(f"vectorized scan and verify_game disagree at B={grid[ib]}, "
                                 f"G=({grid[i1]}, {grid[i2]}, {w})")
        near = abs(grid[ib] - m.c_b) <= cell + 1e-12 and \
            min(grid[i1], grid[i2]) >= p_low - cell - 1e-12 and max(grid[i1], grid[i2]) <= m.c_b + cell + 1e-12
        out.append(GridCandidate(float(grid[ib]), float(grid[i1]), float(grid[i2]), w, gg, gb,
                                 rep.ic.status, bool(near)))
    return UniquenessSweep(grid, cell, eps, n * len(wl), tuple(out))
