import math

import pytest

from src.cover import (
    all_norm_route,
    base_unit,
    cover_monte_carlo,
    derandomized_best,
    f_p,
    grid_search,
    lp_cover_route,
    power_ratio,
    repeated_best,
    summarize,
    traversal_power,
    tune_c,
)
from src.errors import ValidationError
from src.exact import exact_line_lp_tsp, exact_lp_tsp, tk_profile
from src.ktree import all_k_trees
from src.metric import generate_instance, line_instance
from src.routes import lp_norm, submajorization_ratio, visit_times


@pytest.fixture(scope="module")
def doubling():
    return line_instance([0, *(2 ** i for i in range(12))], name="doubling")


@pytest.mark.parametrize("seed", range(5))
def test_all_norm_route_is_eight_submajorized(seed):
    inst = generate_instance(seed, 8, "random_metric")
    route, schedule = all_norm_route(inst)
    lower = tk_profile(inst).lengths
    assert sorted(route.order) == list(range(inst.n))
    assert submajorization_ratio(visit_times(route, inst), lower) <= 8
    assert submajorization_ratio(schedule.traversal, lower) <= 8


def test_traversal_never_beats_the_shortcut_route():
    inst = generate_instance(3, 8, "euclidean")
    route, schedule = all_norm_route(inst)
    shortcut_times = visit_times(route, inst).per_vertex
    assert all(a <= b for a, b in zip(shortcut_times, schedule.traversal.per_vertex))


def test_doubling_points_traversal_is_three_times_worse(doubling):
    """0, 1, 2, 4, …, 2^11 では毎回原点に戻るので L1 はほぼ3倍になる"""
    _, schedule = all_norm_route(doubling)
    assert traversal_power(schedule, 1) == 12261
    optimum = exact_line_lp_tsp(doubling, 1).cost
    assert optimum == 4095
    assert 2.5 <= traversal_power(schedule, 1) / optimum <= 3.05
    # 各反復は直前の2倍の予算で1点ずつ先へ進む
    assert [len(s.new_vertices) for s in schedule.subtours] == [1] * 12


def test_zero_distance_vertices_are_visited_first():
    inst = line_instance([0, 0, 3, 5])
    _, schedule = all_norm_route(inst)
    assert schedule.zero_vertices == (1,)
    assert schedule.traversal.per_vertex[1] == 0
    assert schedule.first_cover_iteration(2) == 0


def test_base_unit():
    assert base_unit(line_instance([0, 3, 5])) == 2
    assert base_unit(line_instance([0, 0])) == 1


def test_lp_cover_route_is_seeded():
    inst = generate_instance(7, 8, "random_metric")
    c, _ = tune_c(2)
    a, _ = lp_cover_route(inst, 2, c, 0.25, seed=5)
    b, _ = lp_cover_route(inst, 2, c, 0.25, seed=5)
    assert a == b
    with pytest.raises(ValidationError):
        lp_cover_route(inst, 2, 3.0, 0.25, seed=5)
    with pytest.raises(ValidationError):
        lp_cover_route(inst, 2, c, 1.0, seed=5)


def test_grid_search_improves_on_nested_grids():
    inst = generate_instance(8, 7, "random_metric")
    c, _ = tune_c(2)
    trees = all_k_trees(inst, inst.start)
    objectives = [grid_search(inst, 2, c, m, trees=trees).objective for m in (1, 2, 4, 8)]
    assert all(b <= a + 1e-12 for a, b in zip(objectives, objectives[1:]))
    assert derandomized_best(inst, 2, c, 8, trees=trees) == grid_search(inst, 2, c, 8, trees=trees).route


def test_derandomized_ratio_on_small_instances():
    c, _ = tune_c(2)
    for seed in range(3):
        inst = generate_instance(seed, 6, "random_metric")
        best = grid_search(inst, 2, c, 8)
        assert best.objective / exact_lp_tsp(inst, 2).objective <= 4.27


def test_cover_monte_carlo_expectation():
    inst = generate_instance(2, 7, "random_metric")
    c, constant = tune_c(2)
    reference = exact_lp_tsp(inst, 2).objective
    summary = cover_monte_carlo(inst, 2, c, 64, seed=3, reference=reference)
    assert summary.samples == 64
    assert summary.mean >= 1.0 - 1e-12
    assert summary.mean <= constant + 3 * summary.stderr
    with pytest.raises(ValidationError):
        cover_monte_carlo(inst, 2, c, 0, seed=3, reference=reference)


def test_repeated_best_is_no_worse_than_one_run():
    inst = generate_instance(4, 7, "random_metric")
    c, _ = tune_c(1)
    route, objective = repeated_best(inst, 1, c, runs=6, seed=9)
    assert objective == pytest.approx(lp_norm(visit_times(route, inst), 1))
    single, _ = repeated_best(inst, 1, c, runs=1, seed=9)
    assert objective <= lp_norm(visit_times(single, inst), 1)


def test_f_p_and_tuning():
    assert f_p(math.e - 1e-9, 2) <= 18.155
    c_star, value = tune_c(2)
    assert abs(c_star - math.e) <= 1e-3
    assert value == pytest.approx(f_p(c_star, 2))
    c1, v1 = tune_c(1)
    assert 1 < c1 < math.e
    assert v1 <= f_p(2.0, 1)
    with pytest.raises(ValidationError):
        f_p(2.0, math.inf)


def test_power_ratio_and_summary():
    inst = line_instance([0, 1, 2])
    delays = visit_times(exact_lp_tsp(inst, 2).route, inst)
    assert power_ratio(delays, lp_norm(delays, 2), 2) == pytest.approx(1.0)
    assert summarize([1.0, 3.0]).mean == 2.0
