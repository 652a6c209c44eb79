from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
import hypothesis.strategies as st

from src.constants import SHARED_INSTANCES_DIR, get_cap
from src.errors import SchemaError, ValidationError
from src.metric import (
    WeightedGraph,
    as_graph,
    circle_instance,
    four_point_instance,
    generate_instance,
    instance_checksum,
    instance_from_json,
    line_instance,
    load_instance,
    metric_closure,
    save_instance,
    tree_instance,
    turnpoint_instance,
    validate_metric,
)


def test_validate_metric_reports_first_triangle_witness():
    """三角不等式の違反は i→k→j の証拠付きで報告される"""
    report = validate_metric([[0, 1, 5], [1, 0, 1], [5, 1, 0]])
    assert not report.ok
    assert report.axioms == {"triangle"}
    assert report.violations[0].witness == (0, 1, 2)


def test_validate_metric_symmetry_and_identity():
    report = validate_metric([[1, 2], [3, 0]])
    assert report.axioms == {"identity", "symmetry"}
    assert report.to_json()["ok"] is False


def test_validate_metric_rejects_negative_and_ragged():
    with pytest.raises(ValidationError):
        validate_metric([[0, -1], [-1, 0]])
    with pytest.raises(ValidationError):
        validate_metric([[0, 1, 2], [1, 0, 3]])


def test_metric_closure_shortest_paths():
    inst = metric_closure(WeightedGraph(3, ((0, 1, 1), (1, 2, 2))))
    assert inst.d(0, 2) == 3
    assert inst.scale == 1


def test_metric_closure_rational_weights_share_a_unit():
    """有理数の重みは共通単位で整数化される"""
    inst = metric_closure(WeightedGraph(3, ((0, 1, "1/2"), (1, 2, 1))))
    assert inst.scale == Fraction(1, 2)
    assert inst.d(0, 2) == 3
    assert inst.real(inst.d(0, 2)) == pytest.approx(1.5)


def test_metric_closure_disconnected():
    with pytest.raises(ValidationError, match="disconnected"):
        metric_closure(WeightedGraph(3, ((0, 1, 1),)))


def test_line_instance_exact_units():
    inst = line_instance([0, "-1.01", 1, 2])
    assert inst.scale == Fraction(1, 100)
    assert inst.positions == (0, -101, 100, 200)
    assert inst.d(1, 3) == 301


def test_four_point_file_matches_constructor():
    """同梱の4点インスタンスは four_point_instance と同じ距離を持つ"""
    shipped = load_instance(SHARED_INSTANCES_DIR / "four_point.json")
    built = four_point_instance()
    assert np.array_equal(shipped.dist, built.dist)
    assert shipped.scale == built.scale
    assert shipped.start == 0


def test_turnpoint_instance_shape():
    inst = turnpoint_instance()
    assert inst.n == 150
    assert inst.start == 1
    assert inst.positions[1] == 200
    assert inst.positions.count(316) == 11
    assert sum(1 for x in inst.positions if x < 200) == 1


def test_tree_instance_distances():
    inst = tree_instance(4, ((0, 1, 2), (1, 2, 3), (1, 3, 1)))
    assert inst.geometry == "tree"
    assert inst.d(2, 3) == 4
    assert inst.d(0, 2) == 5


def test_instance_json_round_trip(tmp_path):
    inst = generate_instance(3, 6, "random_metric")
    path = tmp_path / "inst.json"
    save_instance(inst, path)
    loaded = load_instance(path)
    assert np.array_equal(loaded.dist, inst.dist)
    assert instance_checksum(loaded) == instance_checksum(inst)


def test_schema_errors_carry_pointers():
    with pytest.raises(SchemaError) as excinfo:
        instance_from_json({"n": 2, "starts": [5], "dist": [[0, 1], [1, 0]]})
    assert excinfo.value.pointer == "/starts/0"

    with pytest.raises(SchemaError) as excinfo:
        instance_from_json({"n": 2, "dist": [[0, 1], [1, "x"]]})
    assert excinfo.value.pointer == "/dist/1/1"


def test_non_metric_file_is_rejected_with_report():
    with pytest.raises(ValidationError) as excinfo:
        instance_from_json({"n": 3, "dist": [[0, 1, 5], [1, 0, 1], [5, 1, 0]]})
    assert excinfo.value.report.axioms == {"triangle"}


@pytest.mark.parametrize("kind", ["random_metric", "line", "tree", "euclidean"])
def test_generate_instance_is_deterministic(kind):
    a = generate_instance(11, 7, kind)
    b = generate_instance(11, 7, kind)
    assert a.n == 7
    assert instance_checksum(a) == instance_checksum(b)
    assert validate_metric(a.dist).ok


def test_generate_instance_rejects_unknown_kind():
    with pytest.raises(ValidationError):
        generate_instance(1, 4, "grid")


def test_work_cap_override(monkeypatch):
    """LPTSP_WORK_CAP はすべての頂点数上限を置き換える"""
    monkeypatch.setenv("LPTSP_WORK_CAP", "5")
    assert get_cap("EXACT_DP_CAP") == 5
    assert get_cap("LP_VERTEX_CAP") == 5
    monkeypatch.delenv("LPTSP_WORK_CAP")
    assert get_cap("EXACT_DP_CAP") == 12


@given(st.data())
def test_metric_closure_is_idempotent(data):
    """閉包を完全グラフとしてもう一度閉じても変わらない"""
    n = data.draw(st.integers(2, 6))
    weights = data.draw(st.lists(st.integers(0, 20), min_size=n * (n - 1) // 2, max_size=n * (n - 1) // 2))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    inst = metric_closure(WeightedGraph(n, tuple((i, j, w) for (i, j), w in zip(pairs, weights))))
    again = metric_closure(as_graph(inst))
    assert np.array_equal(again.dist * again.scale.numerator * inst.scale.denominator,
                          inst.dist * inst.scale.numerator * again.scale.denominator)
    assert validate_metric(inst.dist).ok


def test_seeded_instance_checksum(golden):
    """seed 42, n = 7 のランダムメトリックは記録したチェックサムと一致する"""
    golden("random_metric_42_7", instance_checksum(generate_instance(42, 7, "random_metric")))


def test_circle_instance():
    """m 個の点が同じ位置に重なり、始点は角度 0"""
    inst = circle_instance(6, 5)
    assert inst.n == 10
    assert inst.geometry == "euclidean"
    assert inst.start == 0
    cluster = list(range(5, 10))
    assert all(inst.dist[u, v] == 0 for u in cluster for v in cluster)
    assert all(inst.dist[0, v] > 0 for v in range(1, 10))
    with pytest.raises(ValidationError):
        circle_instance(6, 0)
