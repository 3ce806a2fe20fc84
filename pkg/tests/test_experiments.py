import math

import numpy as np
import pytest

from shrinkage_priors.exceptions import PreconditionError
from shrinkage_priors.experiments import (
    PowerPRule,
    ReplicationPlan,
    SignalSpec,
    SparseMeanProblem,
    TauRule,
    compare_tau_choices,
    generate_problem,
    run_contraction,
    run_risk,
    run_scaling_study,
    run_total_variance,
    select_tau,
    stream,
)
from shrinkage_priors.posterior import PosteriorContext, posterior_mean, posterior_variance
from shrinkage_priors.priors import make_horseshoe, make_tpbn

HS = make_horseshoe()


class TestProblem:
    def test_constant(self):
        pb = generate_problem(10, 2, SignalSpec.constant(5), stream(1, 0))
        theta = pb.theta0
        assert np.sum(theta == 5) == 2 and np.sum(theta == 0) == 8

    def test_zero(self):
        pb = generate_problem(10, 0, SignalSpec.constant(5), stream(1, 0))
        assert not pb.theta0.any()

    def test_scaled(self):
        pb = generate_problem(400, 8, SignalSpec.scaled(1.0), stream(1, 0))
        assert pb.signals[0] == pytest.approx(math.sqrt(2 * math.log(50)), rel=1e-14)
        assert pb.signals[0] == pytest.approx(2.797, abs=1e-3)

    def test_p_too_large(self):
        with pytest.raises(ValueError):
            generate_problem(5, 5, SignalSpec.constant(1), stream(1, 0))

    def test_support_uniform(self):
        counts = np.zeros(20)
        for r in range(2000):
            counts[list(generate_problem(20, 3, SignalSpec.constant(1), stream(r, 0)).support)] += 1
        expected = 2000 * 3 / 20
        assert np.all(np.abs(counts - expected) < 5 * math.sqrt(expected))

    def test_from_theta(self):
        pb = SparseMeanProblem.from_theta([0.0, 2.0, 0.0, -1.0])
        assert pb.p == 2 and pb.support == (1, 3)


class TestTau:
    def test_default_log(self):
        tau = select_tau(TauRule("default_log"), 1000, 10, 0.5)
        assert tau == pytest.approx(0.01 * math.sqrt(math.log(100)), rel=1e-14)
        assert tau == pytest.approx(0.0214596, abs=1e-7)

    def test_power(self):
        assert select_tau(TauRule("power", 1.0), 1000, 10, 0.5) == pytest.approx(0.01)
        with pytest.raises(ValueError):
            TauRule("power", 0.5)

    def test_a_adapted(self):
        a = select_tau(TauRule("a_adapted"), 1000, 10, 0.5)
        b = select_tau(TauRule("default_log"), 1000, 10, 0.5)
        assert a == b
        c = select_tau(TauRule("a_adapted"), 1000, 10, 0.75)
        assert c == pytest.approx(b ** (1 / 1.5), rel=1e-14)

    def test_range_error(self):
        # (p/n) sqrt(ln(n/p)) never exceeds exp(-1/2)/sqrt(2), so only fixed values reach 1
        with pytest.raises(PreconditionError):
            select_tau(TauRule("default_log"), 10, 0, 0.5)
        with pytest.raises(PreconditionError):
            select_tau(TauRule("fixed", 1.5), 10, 1, 0.5)

    @pytest.mark.parametrize("text,expected", [
        ("fixed:0.1", TauRule("fixed", 0.1)), ("power:2", TauRule("power", 2.0)),
        ("default-log", TauRule("default_log")), ("a-adapted", TauRule("a_adapted")),
    ])
    def test_parse(self, text, expected):
        assert TauRule.parse(text) == expected

    def test_parse_errors(self):
        for bad in ("fixed", "default-log:3", "magic"):
            with pytest.raises(ValueError):
                TauRule.parse(bad)


@pytest.fixture(scope="module")
def small_problem():
    return generate_problem(60, 3, SignalSpec.constant(6), stream(5, 0))


class TestRisk:
    def test_deterministic_and_worker_independent(self, small_problem, monkeypatch):
        plan = ReplicationPlan(12, 99)
        monkeypatch.setenv("SHRINKAGE_WORKERS", "1")
        a = run_risk(HS, small_problem, TauRule("default_log"), plan)
        monkeypatch.setenv("SHRINKAGE_WORKERS", "4")
        b = run_risk(HS, small_problem, TauRule("default_log"), plan)
        assert a.to_json_dict() == b.to_json_dict()
        assert np.array_equal(a.per_replication["risk"], b.per_replication["risk"])

    def test_decomposition(self, small_problem):
        rep = run_risk(HS, small_problem, TauRule("default_log"), ReplicationPlan(8, 1))
        per = rep.per_replication
        np.testing.assert_allclose(per["risk"], per["nonzero_risk"] + per["zero_risk"], rtol=1e-12)
        assert rep.mc_risk == pytest.approx(rep.nonzero_risk + rep.zero_risk, rel=1e-12)

    def test_ratios_positive(self, small_problem):
        rep = run_risk(HS, small_problem, TauRule("default_log"), ReplicationPlan(4, 1))
        for key in ("minimax_ratio", "thm31_ratio", "thm32_ratio", "thm35_ratio"):
            value = getattr(rep, key)
            assert value is not None and math.isfinite(value) and value > 0
        assert set(rep.to_json_dict()) == set(rep.JSON_KEYS)

    def test_matches_direct_computation(self, small_problem):
        rep = run_risk(HS, small_problem, TauRule("fixed", 0.05), ReplicationPlan(2, 3))
        theta = small_problem.theta0
        x = theta + stream(3, 1, 1).standard_normal(small_problem.n)
        direct = ((posterior_mean(PosteriorContext(HS, 0.05), x) - theta) ** 2).sum()
        assert rep.per_replication["risk"][1] == pytest.approx(direct, rel=1e-13)

    def test_zero_problem_has_no_minimax_ratio(self):
        pb = generate_problem(50, 0, SignalSpec.constant(0), stream(1, 0))
        rep = run_risk(HS, pb, TauRule("fixed", 0.05), ReplicationPlan(3, 1))
        assert rep.minimax_ratio is None
        assert rep.thm31_ratio > 0

    def test_large_signal_partial_risk_near_one(self):
        pb = generate_problem(40, 4, SignalSpec.constant(30), stream(2, 0))
        rep = run_risk(HS, pb, TauRule("fixed", 0.05), ReplicationPlan(400, 2))
        per_coord = rep.nonzero_risk / 4
        se = rep.per_replication["nonzero_risk"].std(ddof=1) / math.sqrt(400) / 4
        assert abs(per_coord - 1.0) < 4 * se + 0.01

    def test_warns_outside_range(self, small_problem):
        with pytest.warns(Warning):
            low = make_tpbn(0.3, 1.0)
        with pytest.warns(Warning):
            run_risk(low, small_problem, TauRule("fixed", 0.1), ReplicationPlan(1, 1))


class TestTotalVariance:
    def test_noise_free_single_coordinate(self):
        pb = SparseMeanProblem.from_theta([1.7])
        rep = run_total_variance(HS, pb, TauRule("fixed", 0.2), ReplicationPlan(1, 0), noise=False)
        assert rep.total_post_var == posterior_variance(PosteriorContext(HS, 0.2), np.array([1.7])).value[0]

    def test_compare_direction(self):
        pb = generate_problem(400, 8, SignalSpec.constant(7), stream(4, 0))
        out = compare_tau_choices(HS, pb, ReplicationPlan(5, 4))
        assert out["variance_ratio"] > 1
        assert out["plain_minimax_ratio"] < out["default_log_minimax_ratio"]


class TestContraction:
    def test_limits_and_monotone(self, small_problem):
        rep = run_contraction(HS, small_problem, TauRule("default_log"),
                              ReplicationPlan(3, 8, 1000), [0.0, 0.5, 2.0, 1e6])
        for probs in (rep.prob_theta0, rep.prob_mean):
            assert probs[0] == 1.0 and probs[-1] == 0.0
            assert np.all(np.diff(probs) <= 0)

    def test_needs_draws(self, small_problem):
        with pytest.raises(PreconditionError):
            run_contraction(HS, small_problem, TauRule("default_log"), ReplicationPlan(1, 1, 999), 1.0)

    def test_deterministic(self, small_problem, monkeypatch):
        plan = ReplicationPlan(3, 8, 1000)
        monkeypatch.setenv("SHRINKAGE_WORKERS", "3")
        a = run_contraction(HS, small_problem, TauRule("default_log"), plan, 0.5)
        monkeypatch.setenv("SHRINKAGE_WORKERS", "1")
        b = run_contraction(HS, small_problem, TauRule("default_log"), plan, 0.5)
        assert a.to_json_dict() == b.to_json_dict()


class TestScaling:
    def test_p_rule(self):
        rule = PowerPRule(0.25)
        assert [rule(n) for n in (200, 400, 800)] == [4, 5, 6]
        assert rule(16) == 2

    def test_single_n(self):
        table = run_scaling_study(HS, [100], PowerPRule(0.5), TauRule("default_log"),
                                  ReplicationPlan(3, 1), SignalSpec.constant(5))
        assert len(table.rows) == 1 and table.stability == 1.0

    def test_more_reps_consistent(self):
        args = (HS, [120], PowerPRule(0.4), TauRule("default_log"))
        small = run_scaling_study(*args, ReplicationPlan(40, 6), SignalSpec.constant(5))
        big = run_scaling_study(*args, ReplicationPlan(80, 6), SignalSpec.constant(5))
        se = small.rows[0][4] / (2 * math.log(120 / small.rows[0][1]) * small.rows[0][1])
        assert abs(small.rows[0][-1] - big.rows[0][-1]) < 4 * se


class TestPlan:
    def test_validation(self):
        with pytest.raises(ValueError):
            ReplicationPlan(0, 1)
        with pytest.raises(ValueError):
            ReplicationPlan(1, -1)

    def test_bad_worker_env(self, monkeypatch, small_problem):
        monkeypatch.setenv("SHRINKAGE_WORKERS", "many")
        with pytest.raises(ValueError):
            run_risk(HS, small_problem, TauRule("fixed", 0.1), ReplicationPlan(2, 1))
