import json
import math

import hypothesis.strategies as st
import numpy as np
import pytest
from hypothesis import given

from src.errors import CapacityError, SchemaError, ValidationError
from src.exact import exact_line_lp_tsp, exact_lp_tsp
from src.metric import generate_instance, line_instance
from src.routes import lp_norm, partial_times, visit_times
from src.segmented import (
    SegmentedSpec,
    brute_force_segmented,
    load_segmented_spec,
    opt_prime_loss,
    opt_prime_profile,
    reduce_lp_tsp,
    segmented_feasible,
    segments_needed,
)


def _random_spec(inst, rng):
    others = [v for v in range(inst.n) if v != inst.start]
    order = (inst.start, *rng.permutation(others).tolist())
    times = sorted(partial_times(order, inst).values())
    counts = sorted(int(x) for x in rng.integers(1, inst.n + 1, size=int(rng.integers(1, 4))))
    deadlines = np.maximum.accumulate([max(0, times[c - 1] + int(rng.integers(-3, 2))) for c in counts])
    return SegmentedSpec(tuple(zip(counts, deadlines.tolist())))


def test_spec_validation_and_deadlines():
    spec = SegmentedSpec(((2, 5), (4, 9)))
    assert spec.k == 2
    deadlines = spec.count_deadlines(5)
    assert deadlines[:5].tolist() == [math.inf, 5, 5, 9, 9]
    assert math.isinf(deadlines[5])
    with pytest.raises(ValidationError):
        SegmentedSpec(((3, 5), (2, 9)))
    with pytest.raises(ValidationError):
        SegmentedSpec(((1, 5), (2, 4)))
    with pytest.raises(ValidationError):
        SegmentedSpec(((-1, 5),))
    with pytest.raises(ValidationError):
        spec.count_deadlines(3)


def test_line_feasibility():
    inst = line_instance([0, 10, -10])
    assert segmented_feasible(inst, SegmentedSpec(((2, 10), (3, 30)))) is not None
    assert segmented_feasible(inst, SegmentedSpec(((2, 10), (3, 29)))) is None
    assert segmented_feasible(inst, SegmentedSpec(((2, 9),))) is None


@pytest.mark.parametrize("seed", range(24))
def test_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    kind = ("random_metric", "line", "tree", "euclidean")[seed % 4]
    inst = generate_instance(seed, int(rng.integers(3, 8)), kind)
    spec = _random_spec(inst, rng)
    found = segmented_feasible(inst, spec)
    oracle = brute_force_segmented(inst, spec)
    assert (found is None) == (oracle is None)
    if found is not None:
        assert spec.satisfied_by(found, inst)


def test_load_segmented_spec(tmp_path):
    good = tmp_path / "spec.json"
    good.write_text(json.dumps({"segments": [[2, 4], [3, 8]]}), encoding="utf-8")
    assert load_segmented_spec(good).segments == ((2, 4), (3, 8))

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"segments": [[1, "x"]]}), encoding="utf-8")
    with pytest.raises(SchemaError) as excinfo:
        load_segmented_spec(bad)
    assert excinfo.value.pointer == "/segments/0/1"

    unordered = tmp_path / "unordered.json"
    unordered.write_text(json.dumps({"segments": [[3, 4], [2, 8]]}), encoding="utf-8")
    with pytest.raises(SchemaError):
        load_segmented_spec(unordered)


def test_segments_needed():
    big = segments_needed(2, 0.5)
    assert big.k == 216
    assert not big.within_budget
    small = segments_needed(1, 1.0)
    assert small.k == 6
    assert small.within_budget


@pytest.mark.parametrize("seed", range(3))
def test_reduction_on_lines(seed):
    inst = generate_instance(seed, 7, "line")
    exact = exact_line_lp_tsp(inst, 2).objective
    r2 = reduce_lp_tsp(inst, 2, k=2)
    r3 = reduce_lp_tsp(inst, 2, k=3)
    assert sorted(r2.route.order) == list(range(inst.n))
    assert r2.objective == pytest.approx(lp_norm(visit_times(r2.route, inst), 2))
    assert exact <= r2.objective * (1 + 1e-9)
    assert r2.objective <= r2.bound * (1 + 1e-9)
    assert r3.objective <= r2.objective + 1e-9
    assert r2.table.is_monotone()
    assert r2.calls > 0


def test_reduction_on_a_general_metric():
    inst = generate_instance(3, 6, "random_metric")
    result = reduce_lp_tsp(inst, 1, k=2)
    assert result.objective >= exact_lp_tsp(inst, 1).objective * (1 - 1e-9)
    assert result.objective <= result.bound * (1 + 1e-9)
    assert result.to_json()["segmented_calls"] == result.calls


def test_reduction_with_a_custom_solver():
    inst = generate_instance(1, 5, "tree")
    calls = []

    def solver(inst, spec):
        calls.append(spec)
        return brute_force_segmented(inst, spec)

    result = reduce_lp_tsp(inst, 2, k=2, seg_solver=solver)
    assert len(calls) == result.calls
    assert sorted(result.route.order) == list(range(inst.n))


def test_reduction_validation(monkeypatch):
    inst = generate_instance(0, 5, "line")
    with pytest.raises(ValidationError):
        reduce_lp_tsp(inst, math.inf)
    with pytest.raises(ValidationError):
        reduce_lp_tsp(inst, 2, eps=0.1, k=2)
    monkeypatch.setattr("src.segmented.REDUCTION_WORK_CAP", 5)
    with pytest.raises(CapacityError):
        reduce_lp_tsp(inst, 2, k=2)


def test_opt_prime_loss_is_within_its_bound():
    inst = generate_instance(2, 7, "line")
    route = exact_line_lp_tsp(inst, 2).route
    eps = 3 ** 0.5 - 1
    loss = opt_prime_loss(inst, 2, eps, 2, route)
    assert len(loss.ratios) == 2
    assert all(r >= 1 - 1e-12 for r in loss.ratios)
    assert loss.best <= loss.mean <= loss.bound
    profile = opt_prime_profile(route, inst, eps, 2, 0)
    assert all(a >= b for a, b in zip(profile, visit_times(route, inst).per_vertex))


@given(
    seed=st.integers(0, 200),
    n=st.integers(3, 7),
    slack=st.integers(0, 20),
    kind=st.sampled_from(["random_metric", "line", "tree"]),
)
def test_loosening_deadlines_keeps_a_spec_feasible(seed, n, slack, kind):
    inst = generate_instance(seed, n, kind)
    spec = _random_spec(inst, np.random.default_rng(seed))
    if segmented_feasible(inst, spec) is None:
        return
    looser = SegmentedSpec(tuple((count, t + slack) for count, t in spec.segments))
    route = segmented_feasible(inst, looser)
    assert route is not None
    assert looser.satisfied_by(route, inst)
