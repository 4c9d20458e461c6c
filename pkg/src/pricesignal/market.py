"""Market primitives: firm/consumer types, parameters and their validation.

A market is a two-firm, two-type Bertrand game.  Consumers with valuation
``v`` value a bad product at ``v`` and a good one at ``h(v) = v + nu0 + nu1*v``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Any

import numpy as np

from .errors import (
    ConfigError,
    CostOrder,
    InvalidPrior,
    MarketError,
    SinglePeakViolation,
    SupportViolation,
    TrivialSeparation,
)
from .numerics import grid_argmax


class FirmType(str, enum.Enum):
    G = "G"
    B = "B"


class FirmId(str, enum.Enum):
    X = "X"
    Y = "Y"

    @property
    def rival(self) -> "FirmId":
        return FirmId.Y if self is FirmId.X else FirmId.X


class Regime(str, enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"


@dataclass(frozen=True)
class QualityPremium:
    """Affine valuation of good quality, ``h(v) = v + nu0 + nu1*v``."""

    nu0: float
    nu1: float = 0.0

    def __post_init__(self):
        if self.nu0 < 0 or self.nu1 < 0:
            raise SupportViolation("premium coefficients must be non-negative")

    @property
    def is_constant(self) -> bool:
        return self.nu1 == 0.0

    @property
    def slope(self) -> float:
        """h'(v)."""
        return 1.0 + self.nu1

    def h(self, v):
        return v + self.nu0 + self.nu1 * v

    def h_inv(self, p):
        return (p - self.nu0) / (1.0 + self.nu1)

    def premium(self, v):
        """Extra willingness to pay for good quality, h(v) - v."""
        return self.nu0 + self.nu1 * v


@dataclass(frozen=True)
class ValuationDistribution:
    """Consumer valuations on ``[0, v_bar]``: uniform or piecewise-linear cdf.

    ``knots`` are ``(valuation, cdf)`` pairs; for the uniform kind they are
    ``((0, 0), (v_bar, 1))``.
    """

    kind: str
    v_bar: float
    knots: tuple[tuple[float, float], ...]

    @classmethod
    def uniform(cls, v_bar: float = 1.0) -> "ValuationDistribution":
        return cls("uniform", float(v_bar), ((0.0, 0.0), (float(v_bar), 1.0)))

    @classmethod
    def piecewise(cls, knots) -> "ValuationDistribution":
        knots = tuple((float(v), float(F)) for v, F in knots)
        return cls("piecewise-linear-cdf", knots[-1][0], knots)

    def __post_init__(self):
        if self.kind not in ("uniform", "piecewise-linear-cdf"):
            raise SupportViolation(f"unknown distribution kind {self.kind!r}")
        if not self.v_bar > 0:
            raise SupportViolation("v_bar must be positive")
        vs = np.array([k[0] for k in self.knots])
        fs = np.array([k[1] for k in self.knots])
        if len(vs) < 2 or vs[0] != 0.0 or fs[0] != 0.0 or fs[-1] != 1.0:
            raise SupportViolation("knots must start at (0, 0) and end at (v_bar, 1)")
        if not math.isclose(vs[-1], self.v_bar):
            raise SupportViolation("last knot must sit at v_bar")
        if np.any(np.diff(vs) <= 0) or np.any(np.diff(fs) <= 0):
            raise SupportViolation("cdf must be strictly increasing (positive density)")

    @cached_property
    def _v(self) -> np.ndarray:
        return np.array([k[0] for k in self.knots])

    @cached_property
    def _F(self) -> np.ndarray:
        return np.array([k[1] for k in self.knots])

    @cached_property
    def _dens(self) -> np.ndarray:
        return np.diff(self._F) / np.diff(self._v)

    @property
    def kinks(self) -> tuple[float, ...]:
        """Interior knots, where the density jumps."""
        return tuple(self._v[1:-1])

    def cdf(self, x):
        if self.kind == "uniform":
            return np.clip(np.asarray(x, dtype=float) / self.v_bar, 0.0, 1.0)
        return np.interp(x, self._v, self._F, left=0.0, right=1.0)

    def ppf(self, q):
        if self.kind == "uniform":
            return np.clip(np.asarray(q, dtype=float), 0.0, 1.0) * self.v_bar
        return np.interp(q, self._F, self._v)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(self._v, x, side="right") - 1, 0, len(self._dens) - 1)
        return np.where((x >= 0) & (x <= self.v_bar), self._dens[idx], 0.0)

    def first_moment(self, lo, hi):
        """Integral of ``v dF(v)`` over ``[lo, hi]`` (clipped to the support)."""
        lo = np.clip(np.asarray(lo, dtype=float), 0.0, self.v_bar)
        hi = np.clip(np.asarray(hi, dtype=float), 0.0, self.v_bar)
        hi = np.maximum(hi, lo)
        total = np.zeros(np.broadcast(lo, hi).shape)
        for a, b, d in zip(self._v[:-1], self._v[1:], self._dens):
            l = np.clip(lo, a, b)
            u = np.clip(hi, a, b)
            total = total + 0.5 * d * (u * u - l * l)
        return total

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "v_bar": self.v_bar, "knots": [list(k) for k in self.knots]}


@dataclass(frozen=True)
class MarketParams:
    mu0: float
    c_g: float
    c_b: float
    premium: QualityPremium
    dist: ValuationDistribution = field(default_factory=ValuationDistribution.uniform)
    p_max: float | None = None
    regime: Regime = Regime.POSITIVE

    def __post_init__(self):
        object.__setattr__(self, "regime", Regime(self.regime))
        for name in ("mu0", "c_g", "c_b"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def v_bar(self) -> float:
        return self.dist.v_bar

    @property
    def price_cap(self) -> float:
        if self.p_max is not None:
            return float(self.p_max)
        return 2.0 * float(self.premium.h(self.v_bar))

    def replace(self, **changes) -> "MarketParams":
        """Copy with some fields changed; ``nu0``/``nu1``/``v_bar`` are accepted too."""
        premium = self.premium
        if "nu0" in changes or "nu1" in changes:
            premium = QualityPremium(
                changes.pop("nu0", premium.nu0), changes.pop("nu1", premium.nu1)
            )
            changes["premium"] = premium
        if "v_bar" in changes:
            v_bar = changes.pop("v_bar")
            if self.dist.kind != "uniform":
                raise ValueError("v_bar can only be changed for the uniform kind")
            changes["dist"] = ValuationDistribution.uniform(v_bar)
        return replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return {
            "mu0": self.mu0,
            "c_g": self.c_g,
            "c_b": self.c_b,
            "nu0": self.premium.nu0,
            "nu1": self.premium.nu1,
            "dist": self.dist.to_dict(),
            "p_max": self.price_cap,
            "regime": self.regime.value,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "MarketParams":
        dd = d["dist"]
        dist = (
            ValuationDistribution.uniform(dd["v_bar"])
            if dd["kind"] == "uniform"
            else ValuationDistribution.piecewise(dd["knots"])
        )
        return cls(
            mu0=d["mu0"],
            c_g=d["c_g"],
            c_b=d["c_b"],
            premium=QualityPremium(d["nu0"], d["nu1"]),
            dist=dist,
            p_max=d.get("p_max"),
            regime=Regime(d["regime"]),
        )


def _monopoly_demand(params: MarketParams, p, mu: float):
    prem = params.premium
    cut = (np.asarray(p, dtype=float) - mu * prem.nu0) / (1.0 + mu * prem.nu1)
    return 1.0 - params.dist.cdf(np.clip(cut, 0.0, params.v_bar))


def _count_peaks(y: np.ndarray, tol: float = 1e-9) -> int:
    d = np.diff(y)
    s = np.sign(np.where(np.abs(d) <= tol, 0.0, d))
    s = s[s != 0]
    return int(np.sum((s[:-1] > 0) & (s[1:] < 0)) + (1 if len(s) and s[-1] > 0 else 0))


SINGLE_PEAK_GRID = 10_000


@dataclass(frozen=True)
class ValidatedMarket:
    """A market that passed :func:`validate`; all downstream code takes one."""

    params: MarketParams

    # thin accessors, used everywhere
    @property
    def mu0(self) -> float:
        return self.params.mu0

    @property
    def c_g(self) -> float:
        return self.params.c_g

    @property
    def c_b(self) -> float:
        return self.params.c_b

    @property
    def premium(self) -> QualityPremium:
        return self.params.premium

    @property
    def dist(self) -> ValuationDistribution:
        return self.params.dist

    @property
    def v_bar(self) -> float:
        return self.params.v_bar

    @property
    def p_max(self) -> float:
        return self.params.price_cap

    @property
    def regime(self) -> Regime:
        return self.params.regime

    def cost(self, theta: FirmType) -> float:
        return self.c_g if FirmType(theta) is FirmType.G else self.c_b

    def h(self, v):
        return self.premium.h(v)

    def h_inv(self, p):
        return self.premium.h_inv(p)

    def with_mu0(self, mu0: float) -> "ValidatedMarket":
        return validate(self.params.replace(mu0=mu0))


def _check(params: MarketParams) -> list[tuple[type[MarketError], str]]:
    errs: list[tuple[type[MarketError], str]] = []
    prem, v_bar = params.premium, params.v_bar
    if not 0.0 < params.mu0 < 1.0:
        errs.append((InvalidPrior, f"mu0={params.mu0} not in (0, 1)"))
    if not prem.premium(v_bar) > 0:
        errs.append((SupportViolation, "h(v_bar) must exceed v_bar"))
    if not params.price_cap > prem.h(v_bar):
        errs.append((SupportViolation, f"p_max={params.price_cap} must exceed h(v_bar)"))
    h0 = prem.h(0.0)
    if params.regime is Regime.POSITIVE:
        if not params.c_g > params.c_b > 0:
            errs.append((CostOrder, "positive regime needs c_g > c_b > 0"))
        if not v_bar > params.c_g >= h0:
            errs.append((SupportViolation, "positive regime needs v_bar > c_g >= h(0)"))
    else:
        if params.c_g != 0.0 or not 0.0 < params.c_b < v_bar:
            errs.append((CostOrder, "negative regime needs c_g = 0 < c_b < v_bar"))
        if not params.c_b >= h0:
            errs.append((SupportViolation, "negative regime needs c_b >= h(0)"))
        elif params.c_b > 0:
            p = np.linspace(0.0, params.c_b, SINGLE_PEAK_GRID)
            rev = p * _monopoly_demand(params, p, 1.0)
            if np.any(np.diff(rev) <= 0):
                errs.append(
                    (SupportViolation, "P*[1-F(h^-1(P))] must strictly increase on [0, c_b]")
                )
    if errs:
        return errs

    p = np.linspace(0.0, params.price_cap, SINGLE_PEAK_GRID)
    for mu, c, name in ((0.0, params.c_b, "B"), (1.0, params.c_g, "G")):
        prof = (p - c) * _monopoly_demand(params, p, mu)
        if _count_peaks(prof) != 1:
            errs.append((SinglePeakViolation, f"monopoly profit of type {name} is not single-peaked"))
    if errs:
        return errs

    if params.regime is Regime.POSITIVE:
        p_bm, pi_bm = grid_argmax(
            lambda q: (q - params.c_b) * _monopoly_demand(params, q, 0.0), 0.0, params.price_cap
        )
        bound = (params.c_g - params.c_b) * float(_monopoly_demand(params, params.c_g, 1.0))
        if not (p_bm >= params.c_g or pi_bm < bound):
            errs.append((TrivialSeparation, "need P_B^m >= c_g or pi_B^m < (c_g-c_b) D^1(c_g)"))
    return errs


def validate(params: MarketParams) -> ValidatedMarket:
    """Check every regime-specific assumption; raise listing all violations."""
    errs = _check(params)
    if errs:
        cls = errs[0][0]
        names = tuple(dict.fromkeys(e[0].__name__ for e in errs))
        raise cls("; ".join(msg for _, msg in errs), names)
    return ValidatedMarket(params)


# --- config files -----------------------------------------------------------

CONFIG_KEYS = (
    "mu0", "c_g", "c_b", "nu0", "nu1", "v_bar", "dist_kind", "dist_knots", "p_max", "regime",
)
_REQUIRED = ("mu0", "c_g", "c_b", "nu0", "regime")


def _parse_knots(raw: str) -> list[tuple[float, float]]:
    out = []
    for item in raw.split(","):
        v, F = item.split(":")
        out.append((float(v), float(F)))
    return out


def parse_market(text: str) -> MarketParams:
    """Parse the flat ``key = value`` market format (``#`` starts a comment)."""
    raw: dict[str, tuple[str, int]] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = (value, lineno)
    for key in _REQUIRED:
        if key not in raw:
            raise ConfigError(f"missing required key {key!r}")

    def num(key: str, default=None):
        if key not in raw:
            return default
        value, lineno = raw[key]
        try:
            return float(value)
        except ValueError:
            raise ConfigError(f"line {lineno}: key {key!r}: not a number: {value!r}") from None

    kind = raw.get("dist_kind", ("uniform", 0))[0]
    try:
        if kind == "uniform":
            dist = ValuationDistribution.uniform(num("v_bar", 1.0))
        elif kind in ("piecewise", "piecewise-linear-cdf"):
            if "dist_knots" not in raw:
                raise ConfigError("key 'dist_knots' required for piecewise kind")
            value, lineno = raw["dist_knots"]
            try:
                dist = ValuationDistribution.piecewise(_parse_knots(value))
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: key 'dist_knots': {exc}") from None
        else:
            raise ConfigError(f"line {raw['dist_kind'][1]}: key 'dist_kind': unknown kind {kind!r}")
    except MarketError as exc:
        raise ConfigError(str(exc)) from None

    value, lineno = raw["regime"]
    aliases = {"positive": Regime.POSITIVE, "positivecorrelation": Regime.POSITIVE,
               "negative": Regime.NEGATIVE, "negativecorrelation": Regime.NEGATIVE}
    if value.lower() not in aliases:
        raise ConfigError(f"line {lineno}: key 'regime': expected positive|negative, got {value!r}")
    try:
        premium = QualityPremium(num("nu0"), num("nu1", 0.0))
    except MarketError as exc:
        raise ConfigError(f"line {raw['nu0'][1]}: key 'nu0'/'nu1': {exc}") from None
    return MarketParams(
        mu0=num("mu0"),
        c_g=num("c_g"),
        c_b=num("c_b"),
        premium=premium,
        dist=dist,
        p_max=num("p_max"),
        regime=aliases[value.lower()],
    )


def load_market(path: str | Path) -> MarketParams:
    return parse_market(Path(path).read_text())


def dump_market(params: MarketParams) -> str:
    lines = [
        f"mu0 = {params.mu0!r}",
        f"c_g = {params.c_g!r}",
        f"c_b = {params.c_b!r}",
        f"nu0 = {params.premium.nu0!r}",
        f"nu1 = {params.premium.nu1!r}",
        f"v_bar = {params.v_bar!r}",
        f"dist_kind = {'uniform' if params.dist.kind == 'uniform' else 'piecewise'}",
    ]
    if params.dist.kind != "uniform":
        lines.append("dist_knots = " + ", ".join(f"{v!r}:{F!r}" for v, F in params.dist.knots))
    if params.p_max is not None:
        lines.append(f"p_max = {params.p_max!r}")
    lines.append(f"regime = {params.regime.value}")
    return "\n".join(lines) + "\n"
