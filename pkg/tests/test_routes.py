import math
from fractions import Fraction

import pytest
from hypothesis import given
import hypothesis.strategies as st

from src.constants import DEFAULT_NORM_GRID
from src.errors import ValidationError
from src.metric import line_instance
from src.routes import (
    DelayVector,
    KTree,
    MultiRoute,
    Route,
    lp_norm,
    minkowski,
    multi_visit_times,
    norm_dominates,
    parse_p,
    power_sum,
    shortcut,
    submajorization_ratio,
    visit_times,
    walk_arrivals,
)


@pytest.fixture
def line():
    return line_instance([0, 2, -1, 5])


def test_parse_p():
    assert parse_p("inf") == math.inf
    assert parse_p("2") == 2.0
    assert parse_p(1) == 1.0
    with pytest.raises(ValidationError):
        parse_p(0.5)
    with pytest.raises(ValidationError):
        parse_p("two")


def test_route_must_start_at_start():
    with pytest.raises(ValidationError):
        Route(0, (1, 0))
    with pytest.raises(ValidationError):
        Route(0, (0, 1, 1))


def test_visit_times_on_a_line(line):
    delays = visit_times(Route(0, (0, 1, 2, 3)), line)
    # 0 -> 2 -> -1 -> 5
    assert delays.per_vertex == (0, 2, 5, 11)
    assert delays.profile == (0, 2, 5, 11)


def test_visit_times_requires_permutation(line):
    with pytest.raises(ValidationError, match="missing"):
        visit_times(Route(0, (0, 1, 2)), line)


def test_norms_in_original_units():
    d = DelayVector((0, 3, 4), Fraction(1, 2))
    assert lp_norm(d, 1) == pytest.approx(3.5)
    assert lp_norm(d, 2) == pytest.approx(2.5)
    assert lp_norm(d, math.inf) == pytest.approx(2.0)
    assert lp_norm(d, 2, units=True) == pytest.approx(5.0)
    assert power_sum(d, 2) == 25
    assert power_sum(d, math.inf) == 4


def test_minkowski_handles_large_exponents():
    assert minkowski([1e200, 1e200], 4) == pytest.approx(1e200 * 2 ** 0.25)
    assert minkowski([], 3) == 0.0


def test_shortcut_keeps_first_occurrences(line):
    route = shortcut([0, 1, 0, 2, 0, 3], line)
    assert route.order == (0, 1, 2, 3)
    with pytest.raises(ValidationError):
        shortcut([0, 1, 0], line)
    assert shortcut([0, 1, 0], line, require_all=False).order == (0, 1)


def test_walk_arrivals_counts_the_whole_walk(line):
    arrivals = walk_arrivals([0, 1, 0, 2], line)
    assert arrivals == {0: 0, 1: 2, 2: 5}


def test_multi_visit_times_takes_the_first_vehicle():
    inst = line_instance([0, 10, 3, 8], starts=(0, 1))
    routes = MultiRoute((Route(0, (0, 2)), Route(1, (1, 3, 2))))
    assert multi_visit_times(routes, inst).per_vertex == (0, 0, 3, 2)
    with pytest.raises(ValidationError, match="not covered"):
        multi_visit_times(MultiRoute((Route(0, (0, 2)),)), inst)


def test_submajorization_ratio():
    assert submajorization_ratio([0, 4, 2], [0, 1, 2]) == pytest.approx(2.0)
    assert submajorization_ratio([0, 1], [0, 0]) == math.inf
    assert submajorization_ratio([0, 0], [0, 0]) == 1.0
    with pytest.raises(ValidationError):
        submajorization_ratio([0, 1], [2, 1])


def test_doubled_walk_visits_children_in_order():
    tree = KTree(0, (0, 1, 2, 3), ((0, 2, 1), (0, 1, 1), (1, 3, 1)), 3)
    assert tree.doubled_walk() == [0, 1, 3, 1, 0, 2, 0]


def test_ktree_rejects_wrong_length():
    with pytest.raises(ValidationError):
        KTree(0, (0, 1), ((0, 1, 2),), 3)


@given(st.lists(st.integers(0, 100), min_size=1, max_size=12))
def test_norms_decrease_in_p(values):
    """‖x‖_p は p について非増加"""
    norms = [minkowski(values, p) for p in DEFAULT_NORM_GRID]
    for a, b in zip(norms, norms[1:]):
        assert b <= a * (1 + 1e-12) + 1e-12


@given(st.data())
def test_submajorization_implies_norm_domination(data):
    n = data.draw(st.integers(1, 10))
    a = data.draw(st.lists(st.integers(0, 60), min_size=n, max_size=n))
    b = sorted(data.draw(st.lists(st.integers(1, 60), min_size=n, max_size=n)))
    rho = submajorization_ratio(a, b)
    assert norm_dominates(a, b, rho, DEFAULT_NORM_GRID)


@given(st.lists(st.integers(0, 4), min_size=1, max_size=20))
def test_shortcut_never_delays_a_vertex(tail):
    """ショートカットの訪問時刻は歩道での最初の到着以下"""
    inst = line_instance([0, 3, -2, 7, 1])
    walk = [0, *tail]
    route = shortcut(walk, inst, require_all=False)
    arrivals = walk_arrivals(walk, inst)
    clock = 0
    for prev, v in zip(route.order, route.order[1:]):
        clock += inst.d(prev, v)
        assert clock <= arrivals[v]
    assert route.order == tuple(dict.fromkeys(walk))
