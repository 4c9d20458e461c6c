"""Command-line front end.

Exit status: 0 on success, 1 when a verification or audit fails, 2 on
invalid input (the message names the violated invariant).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analysis import PRIVATE, PUBLIC, compare, expected_transaction_price, histogram_csv, price_dispersion, \
    rows_to_csv, simulate_market
from .complete_info import solve as solve_benchmark
from .errors import PriceSignalError
from .market import FirmType, MarketParams, Regime, ValidatedMarket, load_market, validate
from .profile import StrategyProfile
from .signaling_neg import construct_theorem_equilibrium
from .signaling_pos import construct_symmetric_pooling
from .verifier import MAX_N, MIN_N, intuitive_criterion_test, verify_pbe

log = logging.getLogger("pricesignal")

COMMANDS = ("solve", "verify", "ic", "compare", "sweep", "simulate")
SWEEP_PARAMS = ("mu0", "c_g", "c_b", "nu0", "nu1", "v_bar")
BENCHMARK_SCHEMA = "benchmark.v1"
IC_SCHEMA = "ic.v1"
SWEEP_HEADER = ("param", "value", "public_price", "private_price", "delta", "public_dispersion",
                "private_dispersion")

EXIT_OK, EXIT_FAIL, EXIT_INVALID = 0, 1, 2


class InvalidInput(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    market: Path
    command: str
    grid_n: int = 2048
    eps: float | None = None
    seed: int = 0
    out: Path | None = None
    profile: Path | None = None
    sweep_param: str | None = None
    sweep_lo: float = 0.0
    sweep_hi: float = 0.0
    sweep_steps: int = 0
    rounds: int = 10_000
    consumers: int = 1_000
    hist: Path | None = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise InvalidInput(f"unknown command {self.command!r}")
        if not MIN_N <= self.grid_n <= MAX_N:
            raise InvalidInput(f"grid-n must lie in [{MIN_N}, {MAX_N}], got {self.grid_n}")
        if self.eps is not None and not self.eps > 0:
            raise InvalidInput(f"eps must be positive, got {self.eps}")
        if self.command == "sweep":
            if self.sweep_param not in SWEEP_PARAMS:
                raise InvalidInput(f"sweep parameter must be one of {', '.join(SWEEP_PARAMS)}, "
                                   f"got {self.sweep_param!r}")
            if self.sweep_steps < 1:
                raise InvalidInput("sweep steps must be at least 1")
        if self.command == "simulate" and (self.rounds < 1 or self.consumers < 1):
            raise InvalidInput("rounds and consumers must be at least 1")


# --- helpers -----------------------------------------------------------------

def _dumps(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def _emit(text: str, out: Path | None):
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def _load_profile(path: Path) -> StrategyProfile:
    try:
        return StrategyProfile.from_json(path.read_text())
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise InvalidInput(f"malformed profile {path}: {exc}") from None


def _benchmarks(m: ValidatedMarket) -> dict:
    return {f"{a.value}{b.value}": solve_benchmark((a, b), m).to_dict() for a in FirmType for b in FirmType}


def default_profile(m: ValidatedMarket, n: int, eps: float | None) -> StrategyProfile | None:
    """The mixed equilibrium for negatively related cost and quality; pooling
    at the good type's cost otherwise (None if that pool is not an equilibrium)."""
    if m.regime is Regime.NEGATIVE:
        return construct_theorem_equilibrium(m)
    try:
        return construct_symmetric_pooling(m.c_g, m, n, 1e-6 * m.v_bar if eps is None else eps)
    except PriceSignalError as exc:
        log.info("no pooling profile at cG: %s", exc)
        return None


def _profile_for(cfg: RunConfig, m: ValidatedMarket) -> StrategyProfile:
    if cfg.profile is not None:
        return _load_profile(cfg.profile)
    prof = default_profile(m, cfg.grid_n, cfg.eps)
    if prof is None:
        raise InvalidInput("pooling at cG is not an equilibrium of this market; pass --profile")
    return prof


# --- commands ------------------------------------------------------------------

def cmd_solve(cfg: RunConfig, m: ValidatedMarket) -> int:
    prof = default_profile(m, cfg.grid_n, cfg.eps)
    if prof is None:
        _emit(_dumps({"schema": BENCHMARK_SCHEMA, "market": m.params.to_dict(), "benchmarks": _benchmarks(m)}),
              cfg.out)
        return EXIT_OK
    meta = dict(prof.meta, benchmarks=_benchmarks(m))
    prof = StrategyProfile(prof.market, prof.strategies, prof.beliefs, prof.label, meta)
    _emit(prof.to_json() + "\n", cfg.out)
    return EXIT_OK


def cmd_verify(cfg: RunConfig, m: ValidatedMarket) -> int:
    prof = _profile_for(cfg, m)
    rep = verify_pbe(prof, cfg.grid_n, cfg.eps, ic=True)
    _emit(rep.to_json() + "\n", cfg.out)
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_ic(cfg: RunConfig, m: ValidatedMarket) -> int:
    prof = _profile_for(cfg, m)
    rep = verify_pbe(prof, cfg.grid_n, cfg.eps)
    doc = {"schema": IC_SCHEMA, "label": prof.label, "equilibrium": rep.passed}
    if rep.passed:
        doc["verdict"] = intuitive_criterion_test(prof, cfg.grid_n, rep.eps).to_dict()
    else:
        doc["verdict"] = rep.ic.to_dict()
    _emit(_dumps(doc), cfg.out)
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_compare(cfg: RunConfig, m: ValidatedMarket) -> int:
    prof = _profile_for(cfg, m)
    _emit(rows_to_csv(compare(m, prof, cfg.grid_n)), cfg.out)
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, m: ValidatedMarket) -> int:
    base = m.params
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for value in np.linspace(cfg.sweep_lo, cfg.sweep_hi, cfg.sweep_steps):
        value = float(value)
        mv = validate(base.replace(**{cfg.sweep_param: value}))
        prof = None
        if mv.regime is Regime.POSITIVE:
            prof = default_profile(mv, cfg.grid_n, cfg.eps)
            if prof is None:
                raise InvalidInput(f"{cfg.sweep_param}={value!r}: pooling at cG is not an equilibrium")
        pub = expected_transaction_price(PUBLIC, mv)
        priv = expected_transaction_price(PRIVATE, mv, prof, cfg.grid_n)
        row = (pub, priv, priv - pub, price_dispersion(PUBLIC, mv),
               price_dispersion(PRIVATE, mv, prof, cfg.grid_n))
        w.writerow([cfg.sweep_param, f"{value:.12g}", *(f"{x:.12g}" for x in row)])
        log.debug("%s=%g done", cfg.sweep_param, value)
    _emit(buf.getvalue(), cfg.out)
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, m: ValidatedMarket) -> int:
    prof = _profile_for(cfg, m)
    rec = simulate_market(prof, cfg.rounds, cfg.consumers, cfg.seed)
    doc = dict(rec.to_dict(), label=prof.label)
    _emit(_dumps(doc), cfg.out)
    if cfg.hist is not None:
        t = rec.trade_prices[np.isfinite(rec.trade_prices)]
        cfg.hist.write_text(histogram_csv(t))
    return EXIT_OK


HANDLERS = {"solve": cmd_solve, "verify": cmd_verify, "ic": cmd_ic, "compare": cmd_compare,
            "sweep": cmd_sweep, "simulate": cmd_simulate}


def run(cfg: RunConfig) -> int:
    """Execute one command; returns the exit status."""
    try:
        m = validate(load_market(cfg.market))
        return HANDLERS[cfg.command](cfg, m)
    except (InvalidInput, PriceSignalError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID


# --- argument parsing ----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--market", type=Path, required=True, help="market file (key = value lines)")
    common.add_argument("--grid-n", type=int, default=2048, help="verification grid size, 64..65536 (default 2048)")
    common.add_argument("--eps", type=float, default=None, help="deviation tolerance (default 1e-6 * v_bar)")
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--out", type=Path, default=None, help="output file (default stdout)")

    with_profile = argparse.ArgumentParser(add_help=False)
    with_profile.add_argument("--profile", type=Path, default=None,
                              help="profile.v1 JSON (default: the profile 'solve' would write)")

    p = argparse.ArgumentParser(
        prog="pricesignal",
        description="Price signalling in a duopoly with private quality and cost.",
        epilog="Set PSL_LOG=DEBUG|INFO|WARNING|ERROR for log verbosity on stderr. "
               "Exit status: 0 success, 1 verification failed, 2 invalid input.",
    )
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")
    sub.add_parser("solve", parents=[common], help="write the equilibrium profile (profile.v1 JSON)")
    sub.add_parser("verify", parents=[common, with_profile], help="certify a profile (report.v1 JSON)")
    sub.add_parser("ic", parents=[common, with_profile], help="Intuitive Criterion verdict (JSON)")
    sub.add_parser("compare", parents=[common, with_profile], help="public vs private rows (CSV)")
    sw = sub.add_parser("sweep", parents=[common], help="expected prices along one parameter (CSV)")
    sw.add_argument("param", help=f"one of {', '.join(SWEEP_PARAMS)}")
    sw.add_argument("lo", type=float)
    sw.add_argument("hi", type=float)
    sw.add_argument("steps", type=int)
    sim = sub.add_parser("simulate", parents=[common, with_profile], help="Monte Carlo record (JSON)")
    sim.add_argument("--rounds", type=int, default=10_000, help="market rounds (default 10000)")
    sim.add_argument("--consumers", type=int, default=1_000, help="consumers per round (default 1000)")
    sim.add_argument("--hist", type=Path, default=None, help="also write a trade-price histogram CSV")
    return p


def _setup_logging():
    level = os.environ.get("PSL_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    return RunConfig(
        market=ns.market, command=ns.command, grid_n=ns.grid_n, eps=ns.eps, seed=ns.seed, out=ns.out,
        profile=getattr(ns, "profile", None),
        sweep_param=getattr(ns, "param", None), sweep_lo=getattr(ns, "lo", 0.0),
        sweep_hi=getattr(ns, "hi", 0.0), sweep_steps=getattr(ns, "steps", 0),
        rounds=getattr(ns, "rounds", 10_000), consumers=getattr(ns, "consumers", 1_000),
        hist=getattr(ns, "hist", None),
    )


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    ns = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(ns)
    except InvalidInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
