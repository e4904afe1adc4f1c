import math

import numpy as np
import pytest

from app.core.exceptions import InvalidParameterError
from app.models.domain import Solution
from app.schemas.bench_schemas import ResultRow
from app.schemas.params_schemas import PrivacyParams, SolveParams
from app.services.evaluation_service import (
    bound_bernoulli,
    bound_margin,
    bound_reconnection,
    bound_report,
    check_capacities,
    normalized_cost,
    reconnection_overhead,
    summarize,
    total_cost,
    unit_facility_sum,
)
from app.services.generator_service import STREAM_NOISE, make_rng
from app.services.solver_service import solve_ldp_margin, solve_ldp_reconnection, solve_optimal

P = PrivacyParams(epsilon=0.1, alpha=0.1)


def _solution(assignment, capacities, algorithm="optimal") -> Solution:
    return Solution(algorithm=algorithm, assignment=np.array(assignment), capacities=capacities)


class TestCost:
    def test_hand_evaluated_example(self, matrix_instance):
        inst = matrix_instance([[0.0, 0.5], [0.5, 0.0]], [1.5, 9.0], [1, 1])
        cost = total_cost(inst, _solution([0, 0], {0: 2.0}))
        assert cost.facility_cost == 3.0
        assert cost.connection_cost == 0.5
        assert cost.total == 3.5

    def test_zero_clients_have_no_connection_cost(self, random_instance):
        inst = random_instance(10, 1, b_max=0)
        assert total_cost(inst, solve_optimal(inst)).connection_cost == 0.0

    def test_self_assigned_singleton(self, line_instance):
        inst = line_instance([0.0], [1.25], [4])
        cost = total_cost(inst, _solution([0], {0: 4.0}))
        assert cost.connection_cost == 0.0
        assert cost.total == 5.0

    def test_rejects_assignment_to_closed_facility(self, matrix_instance):
        inst = matrix_instance([[0.0, 1.0], [1.0, 0.0]], [1.0, 1.0], [1, 1])
        with pytest.raises(InvalidParameterError):
            total_cost(inst, _solution([0, 1], {0: 2.0}))
        with pytest.raises(InvalidParameterError):
            check_capacities(inst, _solution([0, 1], {0: 2.0}))

    def test_cost_is_additive_over_facilities(self, clustered_instance):
        inst = clustered_instance
        sol = solve_ldp_margin(inst, P, make_rng(1, STREAM_NOISE))
        whole = total_cost(inst, sol)
        parts = 0.0
        for v, k in sol.capacities.items():
            members = np.flatnonzero(sol.assignment == v)
            parts += k * inst.facility_costs[v] + float(np.dot(inst.clients[members], inst.distances[members, v]))
        assert parts == pytest.approx(whole.total, rel=1e-12)


class TestCapacities:
    def test_overloaded_facility(self, matrix_instance):
        inst = matrix_instance([[0.0, 1.0], [1.0, 0.0]], [1.0, 1.0], [1, 2])
        report = check_capacities(inst, _solution([0, 0], {0: 2.0}))
        assert report.failed_facilities == [0]
        assert report.any_failure
        assert report.worst_overload == 1.0

    def test_optimal_never_fails(self, random_instance, clustered_instance):
        for seed in range(30):
            inst = random_instance(40, seed, b_max=8)
            assert not check_capacities(inst, solve_optimal(inst)).any_failure
        assert not check_capacities(clustered_instance, solve_optimal(clustered_instance)).any_failure

    def test_margin_with_vanishing_noise_never_fails(self, poisson_instance):
        params = PrivacyParams(epsilon=1e6, alpha=0.1)
        for seed in range(1000):
            sol = solve_ldp_margin(poisson_instance, params, make_rng(seed, STREAM_NOISE))
            assert not check_capacities(poisson_instance, sol).any_failure


class TestNormalization:
    def test_examples(self):
        assert normalized_cost(3.5, 3.5) == 1.0
        assert normalized_cost(7.0, 3.5) == 2.0

    def test_optimal_normalizes_to_one(self, clustered_instance):
        total = total_cost(clustered_instance, solve_optimal(clustered_instance)).total
        assert normalized_cost(total, total) == 1.0

    @pytest.mark.parametrize("opt", [0.0, -1.0])
    def test_rejects_non_positive_opt(self, opt):
        with pytest.raises(InvalidParameterError):
            normalized_cost(1.0, opt)


class TestBounds:
    def test_margin_factor(self):
        assert bound_margin(1000, P, 1.0) == pytest.approx(199.0697, abs=1e-4)
        assert bound_margin(1000, P, 0.0) == 0.0
        assert bound_margin(1000, PrivacyParams(epsilon=1e12, alpha=0.1), 1.0) == pytest.approx(1.0, abs=1e-9)

    def test_reconnection_factor(self):
        mult, additive = bound_reconnection(1000, P, 2.0, 0.2, 2.5, 1.0)
        assert mult == pytest.approx(15.337, abs=1e-3)
        assert additive == pytest.approx(0.2 * 1000 * (4 * 2.5 + 14.337), abs=0.5)
        assert bound_reconnection(1000, P, 2.0, 0.0, 2.5, 1.0)[1] == 0.0

    def test_reconnection_factor_below_margin_factor(self):
        for n in (3, 10, 1000, 100_000):
            for gamma in (1.0, 2.0, 5.0):
                if gamma * math.log(n) > 1:
                    assert bound_reconnection(n, P, gamma, 0.1, 1.0, 1.0)[0] < bound_margin(n, P, 1.0)

    def test_monotone_in_epsilon_and_n(self):
        eps_grid = [0.01, 0.1, 1.0, 10.0]
        margin_vals = [bound_margin(1000, PrivacyParams(epsilon=e, alpha=0.1), 5.0) for e in eps_grid]
        reconn_vals = [sum(bound_reconnection(1000, PrivacyParams(epsilon=e, alpha=0.1), 2.0, 0.2, 2.5, 5.0)) for e in eps_grid]
        assert margin_vals == sorted(margin_vals, reverse=True)
        assert reconn_vals == sorted(reconn_vals, reverse=True)
        n_grid = [10, 100, 1000, 10_000]
        assert [bound_margin(n, P, 5.0) for n in n_grid] == sorted(bound_margin(n, P, 5.0) for n in n_grid)
        reconn_n = [sum(bound_reconnection(n, P, 2.0, 0.2, 2.5, 5.0)) for n in n_grid]
        assert reconn_n == sorted(reconn_n)

    @pytest.mark.parametrize(
        "kwargs",
        [{"n": 1}, {"gamma": 0.5}, {"delta": -0.1}, {"opt": -1.0}, {"b_avg": -1.0}],
    )
    def test_reconnection_domain(self, kwargs):
        args = {"n": 100, "params": P, "gamma": 2.0, "delta": 0.1, "b_avg": 1.0, "opt": 1.0} | kwargs
        with pytest.raises(InvalidParameterError):
            bound_reconnection(**args)

    def test_bernoulli_bound(self):
        mult, additive = bound_bernoulli(1000, P, 0.2, 2.5, 1.0)
        ratio = 20 * math.log(20_000) / math.log(1000)
        assert mult == pytest.approx(1 + ratio)
        assert additive == pytest.approx(1000 * 0.2 * 2.5 * (ratio + 4))

    def test_bound_report(self, clustered_instance):
        report = bound_report(clustered_instance, P, 2.0, 0.2, 100.0)
        assert report.n == clustered_instance.n
        assert report.mult_margin_bound > report.mult_reconn_bound >= 1
        assert report.mult_bernoulli_bound > report.mult_reconn_bound
        assert report.additive_reconn_bound > 0


class TestReconnectionAnalysis:
    @pytest.mark.parametrize("delta", [0.0, 0.05, 0.2, 0.4])
    def test_overhead_within_two_delta_per_client(self, clustered_instance, delta):
        inst = clustered_instance
        opt = total_cost(inst, solve_optimal(inst)).total
        sol = solve_ldp_reconnection(inst, SolveParams(privacy=P, delta=delta), make_rng(2, STREAM_NOISE))
        overhead = reconnection_overhead(inst, sol, opt)
        assert -1e-9 <= overhead <= 2 * delta * inst.n * inst.b_avg + 1e-9

    @pytest.mark.parametrize("delta", [0.0, 0.1, 0.3])
    def test_unit_facility_sum(self, clustered_instance, delta):
        sol = solve_ldp_reconnection(clustered_instance, SolveParams(privacy=P, delta=delta), make_rng(3, STREAM_NOISE))
        lhs, rhs = unit_facility_sum(clustered_instance, sol, delta)
        assert lhs <= rhs + 1e-9


def _row(value, algorithm, total, opt, failed=False, n_open=1) -> ResultRow:
    return ResultRow(
        sweep_kind="delta",
        sweep_value=value,
        trial=0,
        seed=1,
        algorithm=algorithm,
        realized_n=10,
        total_cost=total,
        facility_cost=total,
        connection_cost=0.0,
        opt_cost=opt,
        normalized_cost=total / opt,
        failed=failed,
        n_open_facilities=n_open,
    )


def test_summarize_groups_by_value_and_algorithm():
    rows = [
        _row(0.1, "margin", 2.0, 1.0, n_open=2),
        _row(0.1, "margin", 4.0, 1.0, failed=True, n_open=4),
        _row(0.1, "reconnection", 3.0, 1.0),
        _row(0.2, "margin", 5.0, 1.0),
    ]
    summary = summarize(rows)
    assert [(s.sweep_value, s.algorithm) for s in summary] == [(0.1, "margin"), (0.1, "reconnection"), (0.2, "margin")]
    first = summary[0]
    assert first.trials == 2
    assert first.mean_normalized_cost == 3.0
    assert first.se_normalized_cost == pytest.approx(math.sqrt(2.0) / math.sqrt(2))
    assert first.failure_rate == 0.5
    assert first.mean_open_facilities == 3.0
    assert summary[1].se_normalized_cost == 0.0
