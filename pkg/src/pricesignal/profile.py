"""Mixed price strategies, belief rules and strategy profiles (``profile.v1``)."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

import numpy as np

from .market import FirmId, FirmType, MarketParams, ValidatedMarket, validate

SCHEMA = "profile.v1"
# masses below this are treated as zero when reading off supports
MASS_EPS = 1e-12
PIECE_SAMPLES = 4096


@dataclass(frozen=True, eq=False)
class Piece:
    """Absolutely continuous part of a strategy on ``[lo, hi)``.

    ``cdf`` holds cumulative mass (not normalised) at the sample ``prices``;
    values in between are interpolated linearly.
    """

    lo: float
    hi: float
    prices: np.ndarray
    cdf: np.ndarray

    def __post_init__(self):
        if len(self.prices) > PIECE_SAMPLES or len(self.prices) < 2:
            raise ValueError("a piece needs between 2 and 4096 cdf samples")
        if np.any(np.diff(self.cdf) < 0):
            raise ValueError("piece cdf must be weakly increasing")
        if self.prices[0] != self.lo or self.prices[-1] != self.hi:
            raise ValueError("piece samples must span [lo, hi]")

    @classmethod
    def from_function(cls, f: Callable[[np.ndarray], np.ndarray], lo: float, hi: float,
                      n: int = PIECE_SAMPLES) -> "Piece":
        prices = np.linspace(lo, hi, n)
        cdf = np.maximum.accumulate(np.asarray(f(prices), dtype=float))
        cdf -= cdf[0]
        return cls(float(lo), float(hi), prices, cdf)

    @property
    def mass(self) -> float:
        return float(self.cdf[-1])

    def cum(self, p):
        """Mass of the piece strictly below ``p``."""
        return np.interp(p, self.prices, self.cdf, left=0.0, right=self.mass)

    def density(self, p):
        p = np.asarray(p, dtype=float)
        slopes = np.diff(self.cdf) / np.diff(self.prices)
        idx = np.clip(np.searchsorted(self.prices, p, side="right") - 1, 0, len(slopes) - 1)
        return np.where((p >= self.lo) & (p < self.hi), slopes[idx], 0.0)

    def quantile(self, q):
        """Inverse of the normalised cdf (``q`` in [0, 1])."""
        return np.interp(np.asarray(q) * self.mass, self.cdf, self.prices)


@dataclass(frozen=True)
class PricingStrategy:
    atoms: tuple[tuple[float, float], ...] = ()
    pieces: tuple[Piece, ...] = ()

    def __post_init__(self):
        if abs(self.total_mass - 1.0) > 1e-9:
            raise ValueError(f"strategy mass is {self.total_mass}, not 1")
        if any(m < 0 for _, m in self.atoms):
            raise ValueError("negative atom mass")

    @classmethod
    def atom(cls, price: float) -> "PricingStrategy":
        return cls(atoms=((float(price), 1.0),))

    @property
    def total_mass(self) -> float:
        return sum(m for _, m in self.atoms) + sum(pc.mass for pc in self.pieces)

    def support_atoms(self) -> list[float]:
        return sorted(p for p, m in self.atoms if m > MASS_EPS)

    @property
    def lower(self) -> float:
        lows = self.support_atoms() + [pc.lo for pc in self.pieces if pc.mass > MASS_EPS]
        return min(lows)

    @property
    def upper(self) -> float:
        highs = self.support_atoms() + [pc.hi for pc in self.pieces if pc.mass > MASS_EPS]
        return max(highs)

    @property
    def is_pure(self) -> bool:
        return not self.pieces and len(self.support_atoms()) == 1

    def atom_mass(self, p, tol: float = 1e-12):
        p = np.asarray(p, dtype=float)
        out = np.zeros(p.shape)
        for q, mass in self.atoms:
            out = out + np.where(np.abs(p - q) <= tol, mass, 0.0)
        return out

    def density(self, p):
        p = np.asarray(p, dtype=float)
        out = np.zeros(p.shape)
        for pc in self.pieces:
            out = out + pc.density(p)
        return out

    def cdf(self, p):
        """Probability of a price strictly below ``p``."""
        p = np.asarray(p, dtype=float)
        out = np.zeros(p.shape)
        for q, mass in self.atoms:
            out = out + np.where(q < p, mass, 0.0)
        for pc in self.pieces:
            out = out + pc.cum(p)
        return out

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        comps = [("atom", q, mass) for q, mass in self.atoms if mass > 0]
        comps += [("piece", pc, pc.mass) for pc in self.pieces if pc.mass > 0]
        weights = np.array([c[2] for c in comps])
        which = rng.choice(len(comps), size=size, p=weights / weights.sum())
        u = rng.random(size)
        out = np.empty(size)
        for k, (kind, obj, _) in enumerate(comps):
            sel = which == k
            out[sel] = obj if kind == "atom" else obj.quantile(u[sel])
        return out

    def to_dict(self) -> dict[str, Any]:
        return {
            "atoms": [[p, m] for p, m in self.atoms],
            "pieces": [
                {"lo": pc.lo, "hi": pc.hi, "prices": pc.prices.tolist(), "cdf": pc.cdf.tolist()}
                for pc in self.pieces
            ],
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "PricingStrategy":
        return cls(
            atoms=tuple((float(p), float(m)) for p, m in d.get("atoms", [])),
            pieces=tuple(
                Piece(float(pc["lo"]), float(pc["hi"]), np.array(pc["prices"]), np.array(pc["cdf"]))
                for pc in d.get("pieces", [])
            ),
        )


@dataclass(frozen=True)
class BeliefRule:
    """Consumer belief that a firm is good, as a function of its price.

    ``table`` entries ``(lo, hi, mu)`` cover ``lo <= p < hi``; an entry with
    ``lo == hi`` covers that single price.  The first matching entry wins;
    prices matched by none get ``default`` (0 is the worst belief).
    """

    default: float = 0.0
    table: tuple[tuple[float, float, float], ...] = ()

    def __post_init__(self):
        if not 0.0 <= self.default <= 1.0 or any(not 0.0 <= mu <= 1.0 for *_, mu in self.table):
            raise ValueError("beliefs must lie in [0, 1]")

    @classmethod
    def worst(cls, table=()) -> "BeliefRule":
        return cls(0.0, tuple(table))

    @classmethod
    def best(cls, table=()) -> "BeliefRule":
        return cls(1.0, tuple(table))

    def __call__(self, p, tol: float = 1e-12):
        p = np.asarray(p, dtype=float)
        out = np.full(p.shape, self.default)
        done = np.zeros(p.shape, dtype=bool)
        for lo, hi, mu in self.table:
            if lo == hi:
                hit = np.abs(p - lo) <= tol
            else:
                hit = (p >= lo - tol) & (p < hi - tol)
            hit &= ~done
            out = np.where(hit, mu, out)
            done |= hit
        return out

    def to_dict(self) -> dict[str, Any]:
        return {"default": self.default, "table": [list(t) for t in self.table]}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "BeliefRule":
        return cls(float(d.get("default", 0.0)), tuple(tuple(map(float, t)) for t in d.get("table", [])))


Key = tuple[FirmId, FirmType]


@dataclass(frozen=True)
class StrategyProfile:
    market: ValidatedMarket
    strategies: dict[Key, PricingStrategy]
    beliefs: dict[FirmId, BeliefRule]
    label: str = ""
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        for f in FirmId:
            if f not in self.beliefs:
                raise ValueError(f"missing belief rule for firm {f.value}")
            for t in FirmType:
                if (f, t) not in self.strategies:
                    raise ValueError(f"missing strategy for {f.value}{t.value}")

    def strategy(self, firm: FirmId, theta: FirmType) -> PricingStrategy:
        return self.strategies[(FirmId(firm), FirmType(theta))]

    def keys(self) -> Iterable[Key]:
        return ((f, t) for f in FirmId for t in FirmType)

    @property
    def is_symmetric(self) -> bool:
        return all(
            self.strategy(FirmId.X, t).to_dict() == self.strategy(FirmId.Y, t).to_dict()
            for t in FirmType
        ) and self.beliefs[FirmId.X] == self.beliefs[FirmId.Y]

    def posterior(self, firm: FirmId, p):
        """Bayes belief at prices ``p`` (atoms first, then densities), falling
        back to the firm's belief rule where the strategy puts no weight."""
        mu0 = self.market.mu0
        g = self.strategy(firm, FirmType.G)
        b = self.strategy(firm, FirmType.B)
        p = np.asarray(p, dtype=float)
        ag, ab = mu0 * g.atom_mass(p), (1 - mu0) * b.atom_mass(p)
        dg, db = mu0 * g.density(p), (1 - mu0) * b.density(p)
        atom = ag + ab > MASS_EPS
        dens = ~atom & (dg + db > 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(atom, ag / (ag + ab), np.where(dens, dg / (dg + db), 0.0))
        rule = self.beliefs[FirmId(firm)](p)
        return np.where(atom | dens, out, rule)

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema": SCHEMA,
            "label": self.label,
            "market": self.market.params.to_dict(),
            "strategies": {
                f.value: {t.value: self.strategy(f, t).to_dict() for t in FirmType} for f in FirmId
            },
            "beliefs": {f.value: self.beliefs[f].to_dict() for f in FirmId},
            "meta": self.meta,
        }

    def to_json(self, indent: int | None = 1) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "StrategyProfile":
        if d.get("schema") != SCHEMA:
            raise ValueError(f"expected schema {SCHEMA!r}, got {d.get('schema')!r}")
        market = validate(MarketParams.from_dict(d["market"]))
        strategies = {
            (FirmId(f), FirmType(t)): PricingStrategy.from_dict(d["strategies"][f][t])
            for f in ("X", "Y")
            for t in ("G", "B")
        }
        beliefs = {FirmId(f): BeliefRule.from_dict(d["beliefs"][f]) for f in ("X", "Y")}
        return cls(market, strategies, beliefs, d.get("label", ""), d.get("meta", {}))

    @classmethod
    def from_json(cls, text: str) -> "StrategyProfile":
        return cls.from_dict(json.loads(text))


def pooling_profile(m: ValidatedMarket, p_x: float, p_y: float | None = None,
                    label: str = "pooling") -> StrategyProfile:
    """Both types of X price at ``p_x``, both types of Y at ``p_y``.

    Belief is the prior at each pooled price and worst everywhere else.  No
    feasibility check: feed the result to the verifier.
    """
    p_y = p_x if p_y is None else p_y
    strategies = {}
    beliefs = {}
    for firm, p in ((FirmId.X, p_x), (FirmId.Y, p_y)):
        for t in FirmType:
            strategies[(firm, t)] = PricingStrategy.atom(p)
        beliefs[firm] = BeliefRule.worst([(p, p, m.mu0)])
    return StrategyProfile(m, strategies, beliefs, label)


def symmetric_profile(m: ValidatedMarket, good: PricingStrategy, bad: PricingStrategy,
                      belief: BeliefRule, label: str = "", meta=None) -> StrategyProfile:
    strategies = {(f, FirmType.G): good for f in FirmId} | {(f, FirmType.B): bad for f in FirmId}
    return StrategyProfile(m, strategies, {f: belief for f in FirmId}, label, dict(meta or {}))
