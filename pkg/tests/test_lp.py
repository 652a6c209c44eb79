import math

import numpy as np
import pytest

from src.cover import f_p, tune_c
from src.errors import CapacityError, ValidationError
from src.exact import exact_lp_tsp, exact_multi_lp_tsp
from src.lp import (
    TimeGrid,
    amplify,
    build_lp,
    estimate_coverage,
    expected_sigma_factor,
    latency_terms,
    lp_latency_power,
    lp_round,
    multi_constant,
    reference_objective,
    rounding_runs,
    sigma,
    single_constant,
    solve_lp,
    theta_bound,
)
from src.metric import generate_instance, line_instance
from src.routes import lp_norm, multi_visit_times


@pytest.fixture(scope="module")
def small():
    return generate_instance(7, 5, "random_metric")


@pytest.fixture(scope="module")
def small_solution(small):
    return solve_lp(build_lp(small, 2))


def test_time_grid():
    grid = TimeGrid((0, 3, 7))
    assert grid.index_at(5) == 1
    assert grid.index_at(7) == 2
    assert grid.index_at(-1) == -1
    assert grid.horizon == 7
    assert TimeGrid.geometric(1, 2, 0, 10).times == (0, 1, 2, 4, 8, 16)
    assert TimeGrid.full(3).merge(grid).times == (0, 1, 2, 3, 7)
    with pytest.raises(ValidationError):
        TimeGrid((1, 2))
    with pytest.raises(ValidationError):
        TimeGrid((0, 2, 2))


def test_build_lp_rows(small):
    lp = build_lp(small, 2)
    G = len(lp.grid)
    assert lp.row_kinds.count("coverage") == small.n
    assert lp.row_kinds.count("capacity") == G
    assert lp.row_kinds.count("consistency") == G * small.n
    assert lp.shape == (small.n + G + G * small.n, lp.n_x + len(lp.columns))
    # 各時刻の列は包含極大
    for (i, g), cols in lp.groups.items():
        sets = [set(lp.columns[k].vertices) for k in cols]
        assert all(not a < b for a in sets for b in sets)


@pytest.mark.parametrize("rule", ["bland", "dantzig"])
def test_solve_lp_matches_reference(small, rule):
    lp = build_lp(small, 2)
    sol = solve_lp(lp, rule=rule)
    assert sol.objective == pytest.approx(reference_objective(lp), rel=1e-6)
    assert sol.max_violation() <= 1e-7


def test_breakpoint_grid_matches_full_grid(small, small_solution):
    """木の長さの切れ目だけの格子でも整数時刻すべての格子と同じ最適値"""
    full = build_lp(small, 2, grid=TimeGrid.full(small_solution.lp.grid.horizon))
    assert reference_objective(full) == pytest.approx(small_solution.objective, rel=1e-6)


def test_lp_is_a_relaxation(small, small_solution):
    assert small_solution.norm <= exact_lp_tsp(small, 2).objective * (1 + 1e-9)
    two = small.with_starts((0, 1))
    sol = solve_lp(build_lp(two, 2, K=2))
    assert sol.norm <= exact_multi_lp_tsp(two, 2).objective * (1 + 1e-9)


def test_build_lp_validation(small):
    with pytest.raises(ValidationError):
        build_lp(small, math.inf)
    with pytest.raises(ValidationError):
        build_lp(small, 2, eta=0.5)
    with pytest.raises(ValidationError):
        build_lp(small, 2, K=2)
    with pytest.raises(CapacityError):
        build_lp(small.with_starts((0, 1, 2)), 2, K=3)
    with pytest.raises(ValidationError):
        build_lp(small, 2, grid=TimeGrid((0, 1)))


def test_lp_round_covers_every_vertex(small, small_solution):
    c, _ = tune_c(2)
    routes, diagnostics = lp_round(small_solution, small, c, seed=4)
    again, _ = lp_round(small_solution, small, c, seed=4)
    assert routes == again
    delays = multi_visit_times(routes, small)
    assert delays.n == small.n
    assert diagnostics.samples == 1
    assert 0 <= diagnostics.u < 1


def test_two_vehicle_rounding():
    inst = line_instance([0, 6, -3, 8, -5, 2], starts=(0, 1))
    sol = solve_lp(build_lp(inst, 2, K=2))
    c, _ = multi_constant(2)
    routes, _ = lp_round(sol, inst, c, seed=1)
    assert routes.K == 2
    assert multi_visit_times(routes, inst).n == inst.n


def test_coverage_recurrences_hold(small, small_solution):
    c, _ = tune_c(2)
    diagnostics = estimate_coverage(small_solution, small, c, u=0.3, samples=200, seed=11)
    assert diagnostics.samples == 200
    assert diagnostics.recurrence_violations() == []
    assert np.all((diagnostics.w >= 0) & (diagnostics.w <= 1))


def test_amplify_is_no_worse_than_its_first_run(small, small_solution):
    c, _ = tune_c(2)
    best = amplify(small_solution, small, c, tau=0.5, seed_base=6)
    first, _ = lp_round(small_solution, small, c, seed=6)
    assert lp_norm(multi_visit_times(best, small), 2) <= lp_norm(multi_visit_times(first, small), 2)


def test_rounding_runs():
    assert rounding_runs(10, 0.5) == 10
    assert rounding_runs(1, 0.5) == 1
    with pytest.raises(ValidationError):
        rounding_runs(10, 1.5)


def test_relaxed_capacity_still_rounds(small):
    """η = 2 では木の長さ 2t まで使え、丸めは z/η の分布から引く"""
    sol = solve_lp(build_lp(small, 2, eta=2.0))
    assert sol.eta == 2.0
    routes, diagnostics = lp_round(sol, small, 1.5, seed=2)
    assert multi_visit_times(routes, small).n == small.n
    assert diagnostics.eta == 2.0


def test_latency_terms(small, small_solution):
    c, _ = tune_c(2)
    for v in range(small.n):
        terms = latency_terms(small_solution, c, 0.5, v)
        assert terms.alpha >= terms.times[0] ** 2 - 1e-9
        assert terms.deltas[0] == pytest.approx(terms.times[0] ** 2)
        assert lp_latency_power(small_solution, v) >= 0


def test_sigma_rounds_up_to_the_next_budget():
    for t in (0.5, 1.0, 3.3, 17.0):
        value = sigma(t, 1.0, 2.0, 0.25, 2)
        assert t ** 2 <= value + 1e-9
        assert value <= (2.0 * max(t, 2 ** 0.25)) ** 2 + 1e-9


def test_constants():
    c, value = multi_constant(2)
    assert 1 < c < math.exp(0.5)
    assert value <= 119.8
    assert all(theta_bound(p) <= 17.94 * p for p in range(1, 9))
    assert single_constant(2, 2.0, 1.0) == pytest.approx(f_p(2.0, 2))
    assert expected_sigma_factor(2.0, 1) == pytest.approx(1 / math.log(2))
    with pytest.raises(ValidationError):
        single_constant(2, 2.0, 2.0)


def test_fractional_solution_json(small_solution):
    data = small_solution.to_json()
    assert data["K"] == 1
    assert data["p"] == 2
    assert data["objective"] == pytest.approx(small_solution.objective)
    assert all(entry["value"] > 1e-9 for entry in data["z"])


@pytest.mark.parametrize("seed", range(4))
def test_coincident_starts_each_keep_their_own_route(seed):
    """距離 0 の2つの始点でも、各車両の経路は自分の始点から始まる"""
    inst = line_instance([0, 0, 5, 6], starts=(0, 1))
    sol = solve_lp(build_lp(inst, 1, K=2))
    routes, _ = lp_round(sol, inst, 2.0, seed=seed)
    assert [r.order[0] for r in routes.routes] == [0, 1]
    assert multi_visit_times(routes, inst).per_vertex[:2] == (0, 0)
    diagnostics = estimate_coverage(sol, inst, 2.0, u=0.5, samples=16, seed=seed)
    assert diagnostics.samples == 16
