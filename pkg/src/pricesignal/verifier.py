"""Finite price-grid games: Bayes beliefs, deviation gains, epsilon-PBE and the
Intuitive Criterion.

A profile is discretised onto a grid that always contains the special prices
(0, both costs, the price cap and every atom).  Continuous pieces are binned
into cells whose centres join the grid, each carrying its exact cell mass, so
that ties at a shared cell split the cell mass in half and reproduce the
continuous tie-free demand to second order in the cell width.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .demand import split_masses
from .errors import GridTooCoarse
from .market import FirmId, FirmType, ValidatedMarket
from .profile import MASS_EPS, BeliefRule, StrategyProfile

REPORT_SCHEMA = "report.v1"
MIN_N, MAX_N = 64, 65536
BELIEF_TOL = 1e-9
# largest number of (own price, rival price) pairs evaluated at once
CHUNK = 1 << 22
# bisection steps when locating payoff crossings between grid prices
REFINE_STEPS = 60

SURVIVES = "survives"
ELIMINATED = "eliminated"
NOT_APPLICABLE = "not-applicable"

Key = tuple[FirmId, FirmType]


@dataclass(frozen=True, eq=False)
class GridGame:
    """A profile restricted to a finite price grid."""

    grid: np.ndarray
    market: ValidatedMarket
    probs: dict[Key, np.ndarray]
    beliefs: dict[FirmId, BeliefRule]

    def __post_init__(self):
        if not MIN_N <= len(self.grid) <= MAX_N:
            raise ValueError(f"grid size {len(self.grid)} outside [{MIN_N}, {MAX_N}]")
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        for key, vec in self.probs.items():
            if vec.shape != self.grid.shape or abs(vec.sum() - 1.0) > 1e-12 or np.any(vec < 0):
                raise ValueError(f"bad probability vector for {key[0].value}{key[1].value}")

    def prob(self, firm: FirmId, theta: FirmType) -> np.ndarray:
        return self.probs[(FirmId(firm), FirmType(theta))]

    def index(self, p: float) -> int:
        return int(np.argmin(np.abs(self.grid - p)))

    def mixture(self, firm: FirmId) -> np.ndarray:
        mu0 = self.market.mu0
        return mu0 * self.prob(firm, FirmType.G) + (1 - mu0) * self.prob(firm, FirmType.B)


def _merge(intervals):
    out = []
    for lo, hi in sorted(intervals):
        if out and lo <= out[-1][1]:
            out[-1][1] = max(out[-1][1], hi)
        else:
            out.append([lo, hi])
    return out


def discretize(profile: StrategyProfile, n: int = 2048) -> GridGame:
    """Snap atoms onto the grid and bin pieces by cell mass."""
    if n < MIN_N:
        raise ValueError(f"grid size must be at least {MIN_N}")
    m = profile.market
    p_max = m.p_max
    spacing = p_max / n
    atoms = sorted({p for key in profile.keys() for p, w in profile.strategies[key].atoms if w > MASS_EPS})
    for a, b in zip(atoms, atoms[1:]):
        if b - a < spacing * 1e-3:
            raise GridTooCoarse(f"atoms {a} and {b} are closer than the grid resolution")
    segments = _merge(
        (pc.lo, pc.hi) for key in profile.keys() for pc in profile.strategies[key].pieces if pc.mass > MASS_EPS
    )
    total_len = sum(hi - lo for lo, hi in segments)
    # just below each price that ties a rival atom at some pair of beliefs,
    # so that undercutting an atom is always among the scanned deviations
    nu = m.premium.nu0
    levels = sorted({0.0, m.mu0, 1.0})
    ties = {a + (mu - mu_a) * nu for a in atoms for mu in levels for mu_a in levels}
    under = {t - 1e-9 * max(1.0, p_max) for t in ties if 0.0 < t <= p_max} if m.premium.is_constant else set()
    special = np.array(sorted({0.0, m.c_b, m.c_g, p_max, *atoms} | under))
    # demand kinks and special prices inside a piece become cell edges, where
    # the binned cdf is exact
    knots = np.array([0.0, *m.dist.kinks, m.v_bar])
    forced = np.concatenate([knots, np.asarray(m.h(knots), dtype=float), special])
    cell_edges = []
    n_cells = n // 2 if segments else 0
    for lo, hi in segments:
        k = max(8, int(round(n_cells * (hi - lo) / total_len)))
        inner = np.unique(forced[(forced > lo) & (forced < hi)])
        cell_edges.append(np.union1d(np.linspace(lo, hi, max(k + 1 - len(inner), 2)), inner))
    centres = [0.5 * (e[1:] + e[:-1]) for e in cell_edges]
    n_bg = max(n - len(special) - sum(len(c) for c in centres), 16)
    bg = np.linspace(0.0, p_max, n_bg)
    for lo, hi in segments:
        bg = bg[(bg < lo) | (bg > hi)]
    pts = np.sort(np.concatenate([special, bg, *centres]))
    keep = np.concatenate([[True], np.diff(pts) > 1e-12 * max(1.0, p_max)])
    grid = pts[keep]

    def nearest(p):
        return int(np.argmin(np.abs(grid - p)))

    probs = {}
    for key in profile.keys():
        s = profile.strategies[key]
        vec = np.zeros(len(grid))
        for p, w in s.atoms:
            vec[nearest(p)] += w
        for pc in s.pieces:
            for edges, ctr in zip(cell_edges, centres):
                if pc.lo >= edges[0] - 1e-15 and pc.hi <= edges[-1] + 1e-15:
                    mass = np.diff(pc.cum(edges))
                    idx = np.searchsorted(grid, ctr - 1e-12 * max(1.0, p_max))
                    np.add.at(vec, idx, mass)
        vec[np.abs(vec) < 1e-300] = 0.0
        vec /= vec.sum()
        probs[key] = vec
    return GridGame(grid, m, probs, dict(profile.beliefs))


def posterior_beliefs(g: GridGame) -> dict[FirmId, tuple[np.ndarray, np.ndarray]]:
    """Per firm: (belief at every grid price, on-path mask).

    Bayes' rule where the firm's total mass is positive; the firm's belief
    rule elsewhere.
    """
    mu0 = g.market.mu0
    out = {}
    for f in FirmId:
        wg = mu0 * g.prob(f, FirmType.G)
        wb = (1 - mu0) * g.prob(f, FirmType.B)
        on = wg + wb > MASS_EPS
        with np.errstate(divide="ignore", invalid="ignore"):
            bayes = np.where(on, wg / (wg + wb), 0.0)
        out[f] = (np.where(on, bayes, g.beliefs[f](g.grid)), on)
    return out


def expected_demand(g: GridGame, firm: FirmId, prices, mu, rival_mu: np.ndarray | None = None,
                    tie_share: float = 0.5) -> np.ndarray:
    """Expected demand of ``firm`` at ``prices`` with beliefs ``mu`` against
    the rival's grid mixture (indifferent buyers give ``tie_share`` to ``firm``)."""
    firm = FirmId(firm)
    rival = firm.rival
    if rival_mu is None:
        rival_mu = posterior_beliefs(g)[rival][0]
    w = g.mixture(rival)
    sel = w > 0
    q, mq, w = g.grid[sel], rival_mu[sel], w[sel]
    prices = np.atleast_1d(np.asarray(prices, dtype=float))
    mu = np.broadcast_to(np.asarray(mu, dtype=float), prices.shape)
    out = np.empty(prices.shape)
    step = max(1, CHUNK // max(1, len(q)))
    for s in range(0, len(prices), step):
        d_own, _ = split_masses(prices[s:s + step, None], mu[s:s + step, None], q[None, :], mq[None, :], g.market,
                                tie_share)
        out[s:s + step] = d_own @ w
    return out


@dataclass(frozen=True)
class ICVerdict:
    status: str
    witness_price: float | None = None
    deviating_type: FirmType | None = None
    firm: FirmId | None = None

    @property
    def eliminated(self) -> bool:
        return self.status == ELIMINATED

    def to_dict(self) -> dict[str, Any]:
        return {
            "status": self.status,
            "witnessPrice": self.witness_price,
            "deviatingType": self.deviating_type.value if self.deviating_type else None,
            "firm": self.firm.value if self.firm else None,
        }


@dataclass(frozen=True)
class GameScan:
    """Demand and profits of every type at every grid price."""

    game: GridGame
    mu: dict[FirmId, np.ndarray]
    on_path: dict[FirmId, np.ndarray]
    demand: dict[FirmId, np.ndarray]
    profit: dict[Key, np.ndarray]
    eq_profit: dict[Key, float]


def scan(g: GridGame) -> GameScan:
    beliefs = posterior_beliefs(g)
    mu = {f: beliefs[f][0] for f in FirmId}
    on = {f: beliefs[f][1] for f in FirmId}
    demand = {}
    symmetric = all(np.array_equal(g.prob(FirmId.X, t), g.prob(FirmId.Y, t)) for t in FirmType) and \
        np.array_equal(mu[FirmId.X], mu[FirmId.Y])
    for f in FirmId:
        if symmetric and f is FirmId.Y:
            demand[f] = demand[FirmId.X]
        else:
            demand[f] = expected_demand(g, f, g.grid, mu[f], mu[f.rival])
    profit, eq = {}, {}
    for f in FirmId:
        for t in FirmType:
            prof = (g.grid - g.market.cost(t)) * demand[f]
            profit[(f, t)] = prof
            eq[(f, t)] = float(g.prob(f, t) @ prof)
    return GameScan(g, mu, on, demand, profit, eq)


def deviation_gain(g: GridGame | GameScan, firm: FirmId, theta: FirmType) -> tuple[float, float]:
    """Best grid deviation gain over the equilibrium profit, and its (lowest) price."""
    sc = g if isinstance(g, GameScan) else scan(g)
    key = (FirmId(firm), FirmType(theta))
    prof = sc.profit[key]
    i = int(np.argmax(prof))
    return float(prof[i] - sc.eq_profit[key]), float(sc.game.grid[i])


def _belief_residual(sc: GameScan) -> float:
    """Largest gap between a belief the profile states explicitly for an
    on-path price and the Bayes posterior there."""
    worst = 0.0
    g = sc.game
    for f in FirmId:
        rule = g.beliefs[f]
        if not rule.table:
            continue
        on = sc.on_path[f]
        p = g.grid[on]
        stated = np.full(p.shape, np.nan)
        for lo, hi, mu in reversed(rule.table):
            hit = np.abs(p - lo) <= 1e-12 if lo == hi else (p >= lo - 1e-12) & (p < hi - 1e-12)
            stated = np.where(hit, mu, stated)
        has = ~np.isnan(stated)
        if has.any():
            worst = max(worst, float(np.max(np.abs(stated[has] - sc.mu[f][on][has]))))
    return worst


def _past_crossings(phi_grid: np.ndarray, grid: np.ndarray, phi, off: np.ndarray) -> np.ndarray:
    """For every sign change of ``phi`` between off-path grid neighbours, a
    price within about 1e-15 of the change on the side where ``phi <= 0``
    (by bisection)."""
    pos = phi_grid > 0
    k = np.flatnonzero((pos[:-1] != pos[1:]) & off[:-1] & off[1:])
    if not len(k):
        return np.empty(0)
    a = np.where(pos[k], grid[k], grid[k + 1])
    b = np.where(pos[k], grid[k + 1], grid[k])
    for _ in range(REFINE_STEPS):
        mid = 0.5 * (a + b)
        up = phi(mid) > 0
        a, b = np.where(up, mid, a), np.where(up, b, mid)
    return b


def ic_from_scan(sc: GameScan, eps: float = 1e-6) -> ICVerdict:
    """Intuitive Criterion on every off-path price, rival held fixed.

    At an off-path price a type is excluded when even the most favourable
    belief (good quality) cannot lift it above its equilibrium payoff.  If B
    is excluded while G gains at belief 1, or G is excluded while B gains at
    belief 0, the profile is eliminated.  The lowest witness price wins.

    Buyers left indifferent by a deviation may respond either way: exclusion
    uses the response most favourable to the deviator (all of them buy from
    it), a gain must hold under the least favourable one (none do).

    Besides the grid prices, the tester checks the prices just past each
    point where the excluded type's best payoff crosses its equilibrium
    payoff, since the window where only one type gains can be narrower than
    a grid cell.
    """
    g = sc.game
    m = g.market
    best = None
    for f in FirmId:
        rival_mu = sc.mu[f.rival]
        eq_g, eq_b = sc.eq_profit[(f, FirmType.G)], sc.eq_profit[(f, FirmType.B)]
        most = lambda p, mu: expected_demand(g, f, p, mu, rival_mu, tie_share=1.0)
        least = lambda p, mu: expected_demand(g, f, p, mu, rival_mu, tie_share=0.0)
        excl_b = lambda p: (p - m.c_b) * most(p, 1.0) - eq_b - eps
        excl_g = lambda p: (p - m.c_g) * most(p, 1.0) - eq_g - eps
        gain_g = lambda p: (p - m.c_g) * least(p, 1.0) - eq_g - eps
        gain_b = lambda p: (p - m.c_b) * least(p, 0.0) - eq_b - eps
        off = ~sc.on_path[f]
        d1 = most(g.grid, 1.0)
        phi_b = (g.grid - m.c_b) * d1 - eq_b - eps
        phi_g = (g.grid - m.c_g) * d1 - eq_g - eps
        for excl_grid, excl, gain, theta in ((phi_b, excl_b, gain_g, FirmType.G),
                                             (phi_g, excl_g, gain_b, FirmType.B)):
            extra = _past_crossings(excl_grid, g.grid, excl, off)
            p = np.concatenate([g.grid[off], extra])
            if not len(p):
                continue
            mask = (excl(p) <= 0) & (gain(p) > 0)
            if mask.any():
                cand = (float(p[mask].min()), theta, f)
                if best is None or cand[0] < best[0]:
                    best = cand
    if best is None:
        return ICVerdict(SURVIVES)
    return ICVerdict(ELIMINATED, best[0], best[1], best[2])


@dataclass(frozen=True)
class EquilibriumReport:
    max_gain: dict[Key, float]
    witnesses: dict[Key, float]
    eq_profit: dict[Key, float]
    belief_residual: float
    ic: ICVerdict
    eps: float
    n: int
    label: str = ""
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v <= self.eps for v in self.max_gain.values()) and self.belief_residual <= BELIEF_TOL

    def to_dict(self) -> dict[str, Any]:
        k = lambda key: f"{key[0].value}{key[1].value}"
        return {
            "schema": REPORT_SCHEMA,
            "label": self.label,
            "pass": self.passed,
            "eps": self.eps,
            "gridN": self.n,
            "maxDeviationGain": {k(key): v for key, v in self.max_gain.items()},
            "witness": {k(key): v for key, v in self.witnesses.items()},
            "equilibriumProfit": {k(key): v for key, v in self.eq_profit.items()},
            "beliefResidual": self.belief_residual,
            "icVerdict": self.ic.to_dict(),
            "meta": self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


def _report(sc: GameScan, eps: float, ic: bool, label: str, meta) -> EquilibriumReport:
    gains, wits = {}, {}
    for f in FirmId:
        for t in FirmType:
            gains[(f, t)], wits[(f, t)] = deviation_gain(sc, f, t)
    residual = _belief_residual(sc)
    passed = all(v <= eps for v in gains.values()) and residual <= BELIEF_TOL
    verdict = ic_from_scan(sc, eps) if (ic and passed) else ICVerdict(NOT_APPLICABLE)
    return EquilibriumReport(gains, wits, dict(sc.eq_profit), residual, verdict, eps,
                             len(sc.game.grid), label, dict(meta or {}))


def verify_pbe(profile: StrategyProfile, n: int = 2048, eps: float | None = None,
               ic: bool = False) -> EquilibriumReport:
    """Certify an epsilon-PBE on a grid of about ``n`` prices.

    ``eps`` defaults to ``1e-6 * v_bar``.  With ``ic=True`` the report also
    carries the Intuitive Criterion verdict (only when the profile passes).
    """
    if eps is None:
        eps = 1e-6 * profile.market.v_bar
    if eps <= 0:
        raise ValueError("eps must be positive")
    g = discretize(profile, n)
    return _report(scan(g), eps, ic, profile.label, profile.meta)


def verify_game(g: GridGame, eps: float = 1e-6, ic: bool = False) -> EquilibriumReport:
    return _report(scan(g), eps, ic, "", None)


def intuitive_criterion_test(profile: StrategyProfile, n: int = 2048, eps: float | None = None) -> ICVerdict:
    if eps is None:
        eps = 1e-6 * profile.market.v_bar
    return ic_from_scan(scan(discretize(profile, n)), eps)
