import numpy as np
import pytest

from pricesignal.errors import CaseOverlap, PoolingInfeasible
from pricesignal.market import FirmId, FirmType
from pricesignal.profile import BeliefRule, PricingStrategy, pooling_profile, symmetric_profile
from pricesignal.signaling_pos import (
    IC_CONDITION_FAILS, asym_ic_sides, audit_separating_bounds, audit_type_monotonicity, construct_asym_pooling,
    construct_symmetric_pooling, homogeneous_benchmark, pooling_bound, semiseparating_bound_holds,
)
from pricesignal.verifier import ELIMINATED, SURVIVES, discretize, intuitive_criterion_test, scan, verify_pbe
from support import SeparatingCandidate, neg_market, pos_market, random_separating_market

G, B = FirmType.G, FirmType.B
X, Y = FirmId.X, FirmId.Y


def random_pooling_market(rng, increasing=False):
    """Positive-regime uniform market where pooling at cG exists."""
    while True:
        c_b = rng.uniform(0.0, 0.4)
        nu0 = rng.uniform(0.05, 0.4)
        nu1 = rng.uniform(0.05, 0.5) if increasing else 0.0
        mu0 = rng.uniform(0.2, 0.95)
        c_g = rng.uniform(c_b + 0.01, c_b + mu0 * (nu0 + nu1 * c_b))
        try:
            return pos_market(mu0=mu0, c_g=c_g, c_b=c_b, nu0=nu0, nu1=nu1)
        except ValueError:
            continue


def separating_atoms(m, p_b, p_g):
    rule = BeliefRule(0.0, ((p_g, p_g, 1.0),))
    return symmetric_profile(m, PricingStrategy.atom(p_g), PricingStrategy.atom(p_b), rule, "hand-built")


class TestPoolingBound:
    def test_canonical(self):
        # mu0 h(cB) + (1 - mu0) cB = 0.8 * 0.4 + 0.2 * 0.1
        assert pooling_bound(pos_market()) == pytest.approx(0.34, abs=1e-15)

    def test_matches_constant_premium_form(self):
        m = pos_market(mu0=0.37, c_b=0.05, nu0=0.2, c_g=0.3)
        assert pooling_bound(m) == pytest.approx(m.c_b + m.mu0 * m.premium.nu0, abs=1e-15)


class TestSymmetricPooling:
    @pytest.mark.parametrize("p0", [0.3, 0.33])
    def test_exists_below_bound(self, p0):
        m = pos_market()
        prof = construct_symmetric_pooling(p0, m)
        assert all(prof.strategy(f, t).support_atoms() == [p0] for f, t in prof.keys())
        rep = verify_pbe(prof, 2048, 1e-6)
        assert rep.passed
        assert max(rep.max_gain.values()) <= 1e-6

    def test_beliefs_prior_on_path_worst_off(self):
        prof = construct_symmetric_pooling(0.3, pos_market())
        assert prof.posterior(X, 0.3) == pytest.approx(0.8)
        assert prof.beliefs[X](0.31) == 0.0

    def test_low_prior_infeasible(self):
        # bound 0.5 * 0.4 + 0.5 * 0.1 = 0.25 < 0.3
        with pytest.raises(PoolingInfeasible):
            construct_symmetric_pooling(0.3, pos_market(mu0=0.5))

    def test_outside_range(self):
        m = pos_market()
        for p0 in (0.29, 0.341, 0.5):
            with pytest.raises(PoolingInfeasible):
                construct_symmetric_pooling(p0, m)

    def test_negative_regime_rejected(self):
        with pytest.raises(ValueError):
            construct_symmetric_pooling(0.1, neg_market())

    def test_verified_profiles_of_random_markets(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            m = random_pooling_market(rng)
            p0 = rng.uniform(m.c_g, pooling_bound(m))
            assert verify_pbe(construct_symmetric_pooling(p0, m, 1024), 1024).passed


class TestAsymmetricPooling:
    def test_canonical_valid_and_y_sells_nothing(self):
        m = pos_market()
        prof = construct_asym_pooling(0.32, 0.33, m)
        rep = verify_pbe(prof, 2048, 1e-6)
        assert rep.passed
        sc = scan(discretize(prof, 2048))
        assert sc.demand[Y][sc.game.index(0.33)] == 0.0
        assert rep.eq_profit[(Y, G)] == 0.0 and rep.eq_profit[(Y, B)] == 0.0
        assert prof.meta["flags"] == []

    def test_ic_sides_by_hand(self):
        # F uniform on [0, 1], mu0 nu = 0.24, (1 - mu0) nu = 0.06
        lhs, rhs = asym_ic_sides(0.32, 0.33, pos_market())
        assert lhs == pytest.approx((0.33 + 0.06 - 0.1) * (1 - 0.09), abs=1e-15)
        assert rhs == pytest.approx((0.32 - 0.1) * (1 - 0.08), abs=1e-15)

    def test_low_price_above_bound(self):
        with pytest.raises(PoolingInfeasible):
            construct_asym_pooling(0.36, 0.4, pos_market())

    def test_high_not_above_low(self):
        with pytest.raises(PoolingInfeasible):
            construct_asym_pooling(0.32, 0.32, pos_market())

    def test_condition_failure_is_flagged_not_raised(self):
        m = pos_market(mu0=0.9, c_g=0.9, c_b=0.5, nu0=0.5)
        prof = construct_asym_pooling(0.94, 1.2, m)
        lhs, rhs = prof.meta["icLhs"], prof.meta["icRhs"]
        assert lhs <= rhs
        assert prof.meta["flags"] == [IC_CONDITION_FAILS]
        assert verify_pbe(prof).passed

    def test_needs_constant_premium(self):
        with pytest.raises(ValueError):
            construct_asym_pooling(0.32, 0.33, pos_market(nu0=0.25, nu1=0.2))


class TestIntuitiveCriterionPositive:
    def test_asymmetric_pooling_with_condition_survives(self):
        rng = np.random.default_rng(5)
        checked = 0
        while checked < 10:
            m = random_pooling_market(rng)
            p_low = rng.uniform(m.c_g, pooling_bound(m))
            p_high = p_low + rng.uniform(1e-3, 0.05)
            lhs, rhs = asym_ic_sides(p_low, p_high, m)
            if lhs <= rhs:
                continue
            try:
                prof = construct_asym_pooling(p_low, p_high, m, 1024)
            except PoolingInfeasible:
                continue
            assert intuitive_criterion_test(prof, 1024).status == SURVIVES
            checked += 1

    def test_pooling_with_increasing_premium_eliminated(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            m = random_pooling_market(rng, increasing=True)
            p0 = rng.uniform(m.c_g, pooling_bound(m))
            prof = pooling_profile(m, p0)
            if not verify_pbe(prof, 1024).passed:
                continue
            v = intuitive_criterion_test(prof, 1024)
            assert v.status == ELIMINATED
            assert v.deviating_type is G and v.witness_price > p0

    def test_symmetric_pooling_closed_condition_implies_survival(self):
        rng = np.random.default_rng(7)
        checked = 0
        while checked < 10:
            m = random_pooling_market(rng)
            p0 = rng.uniform(m.c_g, pooling_bound(m))
            if not (1 - m.mu0) * m.premium.nu0 > p0 - m.c_b:
                continue
            prof = construct_symmetric_pooling(p0, m, 1024)
            assert intuitive_criterion_test(prof, 1024).status == SURVIVES
            checked += 1

    def test_symmetric_pooling_survives_without_closed_condition(self):
        # With a constant premium a deviation that wins buyers at belief 1 wins
        # the whole market, so the bad type gains whenever the good one does.
        m = pos_market()
        assert not (1 - m.mu0) * m.premium.nu0 > 0.3 - m.c_b
        assert intuitive_criterion_test(construct_symmetric_pooling(0.3, m)).status == SURVIVES


class TestTypeMonotonicity:
    def test_pooling_passes(self):
        assert audit_type_monotonicity(construct_symmetric_pooling(0.3, pos_market())).passed

    def test_asymmetric_pooling_passes(self):
        assert audit_type_monotonicity(construct_asym_pooling(0.32, 0.33, pos_market())).passed

    def test_good_below_bad_fails(self):
        m = pos_market()
        prof = separating_atoms(m, p_b=0.5, p_g=0.4)
        rep = audit_type_monotonicity(prof)
        assert not rep.passed
        assert rep.witness is not None

    def test_verified_separating_profiles_pass(self):
        rng = np.random.default_rng(8)
        for _ in range(5):
            prof = SeparatingCandidate(random_separating_market(rng)).profile()
            if verify_pbe(prof, 1024).passed:
                assert audit_type_monotonicity(prof, 1024).passed

    def test_negative_regime_rejected(self):
        with pytest.raises(ValueError):
            audit_type_monotonicity(pooling_profile(neg_market(), 0.2))


class TestSeparatingBounds:
    def m(self):
        return pos_market(mu0=0.6, c_g=0.7, c_b=0.1, nu0=0.3)

    def test_verified_candidate_passes(self):
        prof = SeparatingCandidate(self.m()).profile()
        assert verify_pbe(prof).passed
        rep = audit_separating_bounds(prof)
        assert rep.passed, rep.violations
        assert rep.slack["X: low G price above high B price plus nu"] > 0

    def test_good_too_close_to_bad_fails(self):
        prof = separating_atoms(self.m(), p_b=0.5, p_g=0.5 + 0.3 / 2)
        rep = audit_separating_bounds(prof)
        assert "X: low G price above high B price plus nu" in rep.violations
        assert rep.slack["X: low G price above high B price plus nu"] == pytest.approx(-0.15)

    def test_bad_above_monopoly_fails(self):
        # uniform F: P_B^m = (1 + cB) / 2 = 0.55
        prof = separating_atoms(self.m(), p_b=0.56, p_g=1.0)
        rep = audit_separating_bounds(prof)
        assert rep.violations == ("X: high B price at most B monopoly price",
                                  "Y: high B price at most B monopoly price")
        assert rep.slack["X: high B price at most B monopoly price"] == pytest.approx(-0.01, abs=1e-6)

    def test_good_profit_bound_only_when_cost_gap_small(self):
        prof = separating_atoms(self.m(), p_b=0.4, p_g=0.9)
        assert "X: G profit positive" not in audit_separating_bounds(prof).slack
        m = pos_market(mu0=0.6, c_g=0.3, c_b=0.1, nu0=0.3)
        assert "X: G profit positive" in audit_separating_bounds(separating_atoms(m, 0.4, 0.9)).slack

    def test_joint_property_on_verified_profiles(self):
        rng = np.random.default_rng(9)
        seen = 0
        for _ in range(12):
            prof = SeparatingCandidate(random_separating_market(rng)).profile()
            if not verify_pbe(prof, 1024).passed:
                continue
            seen += 1
            rep = audit_separating_bounds(prof, 1024)
            assert rep.passed, rep.violations
        assert seen > 0

    def test_needs_constant_premium(self):
        with pytest.raises(ValueError):
            audit_separating_bounds(pooling_profile(pos_market(nu0=0.25, nu1=0.2), 0.31))


class TestSemiseparatingBound:
    def test_threshold(self):
        m = pos_market()
        # P0 + (1 - mu0) nu = 0.3 + 0.06
        assert semiseparating_bound_holds(0.37, 0.3, m)
        assert not semiseparating_bound_holds(0.36, 0.3, m)


class TestHomogeneousBenchmark:
    def test_good_price(self):
        r = homogeneous_benchmark(1.0, 0.6, pos_market())
        assert r.p_g == pytest.approx(0.9)
        assert r.first_case == r.second_case == "a"

    def test_case_b(self):
        r = homogeneous_benchmark(1.0, 0.5, pos_market())
        assert r.first_case == r.second_case == "b"
        assert r.first_p_g == pytest.approx(max(0.3, 0.1 + 2 * 0.5))
        assert r.second_b_interval == pytest.approx((0.1 + 0.8 * 0.4, 0.5))

    def test_degenerate_bad_valuation(self):
        with pytest.raises(ValueError):
            homogeneous_benchmark(1.0, 0.1, pos_market())

    def test_bad_price_may_fall(self):
        m = pos_market(mu0=0.5, c_g=0.3, c_b=0.1)
        r = homogeneous_benchmark(0.25, 0.15, m)
        # cG - cB = 0.2 > vG - vB = 0.1; threshold 0.1 / 0.05
        assert not r.incomplete_raises_p_b
        assert r.mu0_threshold == pytest.approx(2.0)
        assert r.p_b_may_fall

    def test_bad_price_rises_when_cost_gap_small(self):
        r = homogeneous_benchmark(1.0, 0.6, pos_market())
        assert r.incomplete_raises_p_b and not r.p_b_may_fall

    def test_case_lists_disagree_on_boundary(self):
        # vB = cB + vG - vB exactly: 0.5 = 0.25 + 0.25
        with pytest.raises(CaseOverlap):
            homogeneous_benchmark(0.75, 0.5, pos_market(c_g=0.3, c_b=0.25))
