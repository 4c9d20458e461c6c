"""Price signalling of quality in a Bertrand duopoly with private types."""

from .analysis import (
    PRIVATE,
    PUBLIC,
    ComparisonRow,
    SimulationRecord,
    Thresholds,
    compare,
    expected_transaction_price,
    find_thresholds,
    price_dispersion,
    price_gap,
    simulate_market,
    transaction_price_cdf,
    welfare,
)
from .complete_info import BenchmarkOutcome, best_response_audit, solve, solve_asym_constant, \
    solve_asym_increasing, solve_symmetric
from .demand import DemandSplit, cutoff_valuation, duopoly_split, indifferent_consumer, monopoly_demand, \
    monopoly_price, monopoly_profit
from .errors import *  # noqa: F401,F403
from .market import FirmId, FirmType, MarketParams, QualityPremium, Regime, ValidatedMarket, \
    ValuationDistribution, load_market, parse_market, validate
from .profile import BeliefRule, Piece, PricingStrategy, StrategyProfile, pooling_profile, symmetric_profile
from .signaling_neg import audit_belief_threat_bounds, audit_neg_monotonicity, construct_pooling_cB, \
    construct_theorem_equilibrium, good_type_cdf, lower_support_price, pooling_cutoff, sample_good_price
from .signaling_pos import audit_separating_bounds, audit_type_monotonicity, construct_asym_pooling, \
    construct_symmetric_pooling, homogeneous_benchmark, pooling_bound
from .verifier import EquilibriumReport, GridGame, ICVerdict, discretize, intuitive_criterion_test, verify_game, \
    verify_pbe

__version__ = "0.1.0"
