"""Expected transaction prices, dispersion, thresholds in the prior, welfare
and Monte Carlo simulation."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np
from scipy import integrate, optimize

from .complete_info import BenchmarkOutcome, solve
from .demand import choice_regions, cutoff_valuation
from .errors import MultipleIntervals, ProfileRequired
from .market import FirmId, FirmType, Regime, ValidatedMarket
from .profile import StrategyProfile
from .signaling_neg import construct_theorem_equilibrium, good_type_cdf, lower_support_price
from .verifier import discretize, posterior_beliefs

log = logging.getLogger(__name__)

PUBLIC, PRIVATE = "public", "private"
THRESHOLD_GRID = 512
CSV_HEADER = ("regime", "mode", "mu0", "expected_price", "dispersion", "cs", "profit", "welfare")


def type_pair_weights(mu0: float) -> dict[tuple[FirmType, FirmType], float]:
    g, b = FirmType.G, FirmType.B
    return {(g, g): mu0 * mu0, (g, b): mu0 * (1 - mu0), (b, g): mu0 * (1 - mu0), (b, b): (1 - mu0) ** 2}


@dataclass(frozen=True)
class PriceLottery:
    """Transaction prices and their probabilities, plus the welfare terms
    averaged over the same outcomes."""

    prices: np.ndarray
    probs: np.ndarray
    consumer_surplus: float
    profit: float

    @property
    def mean(self) -> float:
        return float(self.probs @ self.prices / self.probs.sum())

    @property
    def sd(self) -> float:
        w = self.probs / self.probs.sum()
        mean = w @ self.prices
        return float(np.sqrt(max(w @ (self.prices - mean) ** 2, 0.0)))


def _surplus(lo, hi, w, p, theta: FirmType, m: ValidatedMarket):
    """Realised surplus of consumers in [lo, hi] buying true type ``theta`` at ``p``."""
    g = 1.0 if theta is FirmType.G else 0.0
    prem = m.premium
    mass = m.dist.cdf(hi) - m.dist.cdf(lo)
    first = m.dist.first_moment(lo, hi)
    return w * ((1 + g * prem.nu1) * first + (g * prem.nu0 - p) * mass)


def _outcome_terms(p_x, mu_x, t_x, p_y, mu_y, t_y, m: ValidatedMarket):
    lo1, hi1, w1, lo2, hi2, w2 = choice_regions(p_x, mu_x, p_y, mu_y, m)
    F = m.dist.cdf
    d_x = w1 * (F(hi1) - F(lo1))
    d_y = w2 * (F(hi2) - F(lo2))
    cs = _surplus(lo1, hi1, w1, p_x, t_x, m) + _surplus(lo2, hi2, w2, p_y, t_y, m)
    profit = (p_x - m.cost(t_x)) * d_x + (p_y - m.cost(t_y)) * d_y
    return d_x, d_y, cs, profit


def benchmark_terms(out: BenchmarkOutcome, m: ValidatedMarket) -> tuple[float, float]:
    """Consumer surplus and total profit of a public-type outcome.

    Demands come from the outcome (where the serving firm takes tied buyers),
    so surplus is computed on the serving firm's buyer interval.
    """
    cs = 0.0
    demands = (out.demands.d_x, out.demands.d_y)
    for k in (0, 1):
        if demands[k] <= 0:
            continue
        theta, p = out.type_pair[k], out.prices[k]
        mu = 1.0 if theta is FirmType.G else 0.0
        if demands[1 - k] <= 0:
            lo, hi, w = cutoff_valuation(p, mu, m), m.v_bar, 1.0
        else:
            other = out.type_pair[1 - k]
            lo, hi, w, *_ = choice_regions(p, mu, out.prices[1 - k], 1.0 if other is FirmType.G else 0.0, m)
        cs += float(_surplus(lo, hi, w, p, theta, m))
    return cs, float(sum(out.profits))


def public_lottery(m: ValidatedMarket) -> PriceLottery:
    prices, probs = [], []
    cs = profit = 0.0
    for pair, w in type_pair_weights(m.mu0).items():
        out = solve(pair, m)
        if out.demands.d_x + out.demands.d_y <= 0:
            continue
        prices.append(out.trade_price)
        probs.append(w)
        c, pr = benchmark_terms(out, m)
        cs += w * c
        profit += w * pr
    return PriceLottery(np.array(prices), np.array(probs), cs, profit)


def profile_lottery(profile: StrategyProfile, n: int = 2048) -> PriceLottery:
    """Transaction-price lottery of a profile on its discretised grid.

    Within a realised price pair the transaction price is the demand-weighted
    mean of the two prices; pairs with no sale are dropped.
    """
    m = profile.market
    g = discretize(profile, n)
    mu = {f: b[0] for f, b in posterior_beliefs(g).items()}
    prices, probs = [], []
    cs = profit = 0.0
    for (t_x, t_y), w in type_pair_weights(m.mu0).items():
        px, py = g.prob(FirmId.X, t_x), g.prob(FirmId.Y, t_y)
        ix, iy = np.flatnonzero(px), np.flatnonzero(py)
        qx, qy = g.grid[ix][:, None], g.grid[iy][None, :]
        d_x, d_y, c, pr = _outcome_terms(qx, mu[FirmId.X][ix][:, None], t_x, qy, mu[FirmId.Y][iy][None, :], t_y, m)
        weight = w * px[ix][:, None] * py[iy][None, :]
        sold = d_x + d_y
        ok = sold > 0
        with np.errstate(invalid="ignore", divide="ignore"):
            t = np.where(ok, (qx * d_x + qy * d_y) / np.where(ok, sold, 1.0), 0.0)
        prices.append(t[ok])
        probs.append(np.broadcast_to(weight, t.shape)[ok])
        cs += float(np.sum(weight * c))
        profit += float(np.sum(weight * pr))
    return PriceLottery(np.concatenate(prices), np.concatenate(probs), cs, profit)


def _theorem_moments(m: ValidatedMarket) -> tuple[float, float]:
    """First two moments of the transaction price in the mixed equilibrium
    with negatively related cost and quality, by adaptive quadrature.

    Both good: the lower of two draws trades.  One good: the good draw trades.
    Both bad: trade at cB.
    """
    mu0, c_b = m.mu0, m.c_b
    lo = lower_support_price(m)
    pts = [float(k) for k in m.h(np.array([0.0, *m.dist.kinks])) if lo < k < c_b]
    sig = lambda p: good_type_cdf(min(p, np.nextafter(c_b, 0)), m, lo)
    quad = lambda f: integrate.quad(f, lo, c_b, points=pts or None, epsabs=1e-14, epsrel=1e-12, limit=200)[0]
    s1 = quad(sig)
    s2 = quad(lambda p: 2 * p * sig(p))
    u1 = quad(lambda p: (1 - sig(p)) ** 2)
    u2 = quad(lambda p: 2 * p * (1 - sig(p)) ** 2)
    e_one, e_one2 = c_b - s1, c_b * c_b - s2
    e_min, e_min2 = lo + u1, lo * lo + u2
    w_gg, w_gb, w_bb = mu0 * mu0, 2 * mu0 * (1 - mu0), (1 - mu0) ** 2
    mean = w_gg * e_min + w_gb * e_one + w_bb * c_b
    second = w_gg * e_min2 + w_gb * e_one2 + w_bb * c_b * c_b
    return mean, second


def expected_transaction_price(mode: str, m: ValidatedMarket, profile: StrategyProfile | None = None,
                               n: int = 2048) -> float:
    if mode == PUBLIC:
        return public_lottery(m).mean
    if mode != PRIVATE:
        raise ValueError(f"unknown information mode {mode!r}")
    if profile is not None:
        return profile_lottery(profile, n).mean
    if m.regime is Regime.POSITIVE:
        raise ProfileRequired("private prices with positive correlation need a verified profile")
    return _theorem_moments(m)[0]


def price_dispersion(mode: str, m: ValidatedMarket, profile: StrategyProfile | None = None,
                     n: int = 2048) -> float:
    if mode == PUBLIC:
        return public_lottery(m).sd
    if mode != PRIVATE:
        raise ValueError(f"unknown information mode {mode!r}")
    if profile is not None:
        return profile_lottery(profile, n).sd
    if m.regime is Regime.POSITIVE:
        raise ProfileRequired("private prices with positive correlation need a verified profile")
    mean, second = _theorem_moments(m)
    return float(np.sqrt(max(second - mean * mean, 0.0)))


def transaction_price_cdf(t, m: ValidatedMarket):
    """Cdf of the transaction price in the mixed equilibrium with negatively
    related cost and quality."""
    t = np.asarray(t, dtype=float)
    mu0 = m.mu0
    lo = lower_support_price(m)
    inside = (t >= lo) & (t < m.c_b)
    sig = np.where(t >= m.c_b, 1.0, 0.0)
    if inside.any():
        sig = sig.copy()
        sig[inside] = good_type_cdf(t[inside], m, lo)
    bad = (t >= m.c_b).astype(float)
    return mu0 * mu0 * (1 - (1 - sig) ** 2) + 2 * mu0 * (1 - mu0) * sig + (1 - mu0) ** 2 * bad


def price_gap(m: ValidatedMarket, private: Callable[[ValidatedMarket], float] | None = None) -> float:
    """Private minus public expected transaction price."""
    priv = private(m) if private is not None else expected_transaction_price(PRIVATE, m)
    return priv - expected_transaction_price(PUBLIC, m)


@dataclass(frozen=True)
class Thresholds:
    """Prior values where the price gap changes sign.

    ``status`` is ``"interval"`` (two roots), ``"single"`` (one) or
    ``"none"`` (constant sign, reported as ``NoInterval``).
    """

    roots: tuple[float, ...]
    status: str
    grid: np.ndarray
    gaps: np.ndarray

    @property
    def mu_low(self) -> float | None:
        return self.roots[0] if self.roots else None

    @property
    def mu_high(self) -> float | None:
        return self.roots[-1] if len(self.roots) == 2 else None

    @property
    def no_interval(self) -> bool:
        return self.status == "none"


def find_thresholds(m: ValidatedMarket, private: Callable[[ValidatedMarket], float] | None = None,
                    n: int = THRESHOLD_GRID, xtol: float = 1e-14) -> Thresholds:
    """Scan the prior on ``n`` interior points and refine each sign change
    with Brent's method."""
    grid = (np.arange(n) + 0.5) / n
    gap = lambda mu: price_gap(m.with_mu0(float(mu)), private)
    gaps = np.array([gap(mu) for mu in grid])
    s = np.sign(gaps)
    idx = [i for i in range(n - 1) if s[i] * s[i + 1] < 0 or (s[i] == 0 and i > 0)]
    if len(idx) > 2:
        raise MultipleIntervals(f"price gap changes sign {len(idx)} times")
    roots = []
    for i in idx:
        if s[i] == 0:
            roots.append(float(grid[i]))
        else:
            roots.append(float(optimize.brentq(gap, grid[i], grid[i + 1], xtol=xtol, rtol=4 * np.finfo(float).eps)))
    status = {0: "none", 1: "single", 2: "interval"}[len(roots)]
    return Thresholds(tuple(roots), status, grid, gaps)


@dataclass(frozen=True)
class ComparisonRow:
    regime: Regime
    mode: str
    mu0: float
    expected_price: float
    dispersion: float
    consumer_surplus: float
    profit: float

    def __post_init__(self):
        if self.dispersion < 0:
            raise ValueError("dispersion must be non-negative")

    @property
    def welfare(self) -> float:
        return self.consumer_surplus + self.profit

    def as_tuple(self) -> tuple:
        return (Regime(self.regime).value, self.mode, self.mu0, self.expected_price, self.dispersion,
                self.consumer_surplus, self.profit, self.welfare)


def welfare(m: ValidatedMarket, mode: str, profile: StrategyProfile | None = None, n: int = 2048) -> ComparisonRow:
    """Comparison row for one information mode.

    Public rows use the benchmarks; private rows use ``profile`` (or the
    mixed equilibrium when cost and quality are negatively related).
    """
    if mode == PUBLIC:
        lot = public_lottery(m)
    elif profile is not None:
        lot = profile_lottery(profile, n)
    elif m.regime is Regime.NEGATIVE:
        lot = profile_lottery(construct_theorem_equilibrium(m), n)
    else:
        raise ProfileRequired("private welfare with positive correlation needs a verified profile")
    if mode == PRIVATE and profile is None and m.regime is Regime.NEGATIVE:
        mean, second = _theorem_moments(m)
        price, sd = mean, float(np.sqrt(max(second - mean * mean, 0.0)))
    else:
        price, sd = lot.mean, lot.sd
    return ComparisonRow(m.regime, mode, m.mu0, price, sd, lot.consumer_surplus, lot.profit)


def compare(m: ValidatedMarket, profile: StrategyProfile | None = None, n: int = 2048) -> list[ComparisonRow]:
    return [welfare(m, PUBLIC, None, n), welfare(m, PRIVATE, profile, n)]


def rows_to_csv(rows: Iterable[ComparisonRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([f"{x:.12g}" if isinstance(x, float) else x for x in r.as_tuple()])
    return buf.getvalue()


def histogram_csv(prices: np.ndarray, bins: int = 50, weights: np.ndarray | None = None) -> str:
    mass, edges = np.histogram(prices, bins=bins, weights=weights)
    mass = mass / max(mass.sum(), 1e-300)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("price_bin", "mass"))
    for lo, ms in zip(edges[:-1], mass):
        w.writerow((f"{lo:.12g}", f"{ms:.12g}"))
    return buf.getvalue()


@dataclass(frozen=True)
class SimulationRecord:
    """Per-round averages from a Monte Carlo run.

    ``demand`` and ``profit`` map (firm, type) to (mean, standard error) over
    the rounds in which the firm had that type.
    """

    rounds: int
    consumers: int
    seed: int
    type_pair_freq: dict[str, float]
    demand: dict[tuple[FirmId, FirmType], tuple[float, float]]
    profit: dict[tuple[FirmId, FirmType], tuple[float, float]]
    trade_prices: np.ndarray

    def to_dict(self) -> dict:
        k = lambda key: f"{key[0].value}{key[1].value}"
        return {
            "rounds": self.rounds,
            "consumers": self.consumers,
            "seed": self.seed,
            "typePairFreq": self.type_pair_freq,
            "demand": {k(key): list(v) for key, v in self.demand.items()},
            "profit": {k(key): list(v) for key, v in self.profit.items()},
            "meanTradePrice": float(np.nanmean(self.trade_prices)),
            "sdTradePrice": float(np.nanstd(self.trade_prices)),
        }


SIM_CHUNK = 1000


def simulate_market(profile: StrategyProfile, rounds: int, consumers: int, seed: int,
                    chunk: int = SIM_CHUNK) -> SimulationRecord:
    """Play ``rounds`` independent markets with ``consumers`` buyers each.

    Chunk k of rounds uses the k-th child of ``SeedSequence(seed)``, so the
    record depends only on the seed and the chunk size.
    """
    if rounds < 1 or consumers < 1:
        raise ValueError("need at least one round and one consumer")
    m = profile.market
    prem = m.premium
    children = np.random.SeedSequence(seed).spawn((rounds + chunk - 1) // chunk)
    keys = [(f, t) for f in FirmId for t in FirmType]
    sums = {k: np.zeros(5) for k in keys}  # count, sum d, sum d^2, sum pi, sum pi^2
    pair_counts = np.zeros(4)
    trade = np.empty(rounds)
    for c, ss in enumerate(children):
        rng = np.random.default_rng(ss)
        k = min(chunk, rounds - c * chunk)
        types, prices, beliefs = {}, {}, {}
        for f in FirmId:
            good = rng.random(k) < m.mu0
            p = np.empty(k)
            for t, sel in ((FirmType.G, good), (FirmType.B, ~good)):
                if sel.any():
                    p[sel] = profile.strategy(f, t).sample(rng, int(sel.sum()))
            types[f], prices[f], beliefs[f] = good, p, profile.posterior(f, p)
        v = m.dist.ppf(rng.random((k, consumers)))
        sx = (1 + beliefs[FirmId.X][:, None] * prem.nu1) * v + beliefs[FirmId.X][:, None] * prem.nu0 - prices[FirmId.X][:, None]
        sy = (1 + beliefs[FirmId.Y][:, None] * prem.nu1) * v + beliefs[FirmId.Y][:, None] * prem.nu0 - prices[FirmId.Y][:, None]
        best = np.maximum(sx, sy)
        buys = best >= 0
        tie = np.abs(sx - sy) <= 1e-12
        share_x = np.where(buys, np.where(tie, 0.5, (sx > sy).astype(float)), 0.0)
        share_y = np.where(buys, np.where(tie, 0.5, (sy > sx).astype(float)), 0.0)
        d = {FirmId.X: share_x.mean(axis=1), FirmId.Y: share_y.mean(axis=1)}
        sold = d[FirmId.X] + d[FirmId.Y]
        # written as an offset from X's price so equal prices trade exactly there
        with np.errstate(invalid="ignore", divide="ignore"):
            trade[c * chunk:c * chunk + k] = np.where(
                sold > 0, prices[FirmId.X] + (prices[FirmId.Y] - prices[FirmId.X]) * d[FirmId.Y] / sold, np.nan)
        gx, gy = types[FirmId.X], types[FirmId.Y]
        pair_counts += [np.sum(gx & gy), np.sum(gx & ~gy), np.sum(~gx & gy), np.sum(~gx & ~gy)]
        for f in FirmId:
            for t in FirmType:
                sel = types[f] if t is FirmType.G else ~types[f]
                dd = d[f][sel]
                pi = (prices[f][sel] - m.cost(t)) * dd
                sums[(f, t)] += [sel.sum(), dd.sum(), (dd * dd).sum(), pi.sum(), (pi * pi).sum()]

    def mean_se(cnt, s, s2):
        if cnt == 0:
            return (float("nan"), float("nan"))
        mean = s / cnt
        var = max(s2 / cnt - mean * mean, 0.0)
        return (float(mean), float(np.sqrt(var / cnt)))

    demand = {k: mean_se(v[0], v[1], v[2]) for k, v in sums.items()}
    profit = {k: mean_se(v[0], v[3], v[4]) for k, v in sums.items()}
    freq = dict(zip(("GG", "GB", "BG", "BB"), (pair_counts / rounds).tolist()))
    return SimulationRecord(rounds, consumers, seed, freq, demand, profit, trade)
