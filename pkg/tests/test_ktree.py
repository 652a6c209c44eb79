import logging

import pytest

from src.errors import ValidationError
from src.exact import min_k_tree, tk_profile
from src.ktree import all_k_trees, good_k_tree, heuristic_k_tree, heuristic_ratio
from src.metric import WeightedGraph, generate_instance, line_instance, metric_closure


@pytest.mark.parametrize("seed", range(4))
def test_heuristic_tree_contains_root_and_enough_vertices(seed):
    inst = generate_instance(seed, 7, "random_metric")
    for k in range(1, inst.n + 1):
        tree = heuristic_k_tree(inst, inst.start, k)
        assert inst.start in tree.vertices
        assert tree.size >= k
        assert tree.total_length >= min_k_tree(inst, inst.start, k).total_length


def test_heuristic_certified_flag_is_consistent():
    """certified は L_k 以下のときだけ立つ"""
    inst = line_instance([0, 1, 3, 6, 10, -4])
    profile = tk_profile(inst)
    single = heuristic_k_tree(inst, 0, 1)
    assert single.size == 1 and single.certified
    for k in range(2, inst.n + 1):
        tree = heuristic_k_tree(inst, 0, k)
        assert tree.certified == (tree.total_length <= profile.length(k))


def test_good_k_tree_dispatch():
    inst = generate_instance(1, 6, "tree")
    assert good_k_tree(inst, inst.start, 3).certified
    with pytest.raises(ValidationError):
        good_k_tree(inst, inst.start, 3, provider="greedy")
    with pytest.raises(ValidationError):
        heuristic_k_tree(inst, inst.start, 0)


def test_all_k_trees_lengths_are_monotone():
    inst = generate_instance(9, 8, "euclidean")
    trees = all_k_trees(inst, inst.start)
    lengths = [t.total_length for t in trees]
    assert len(trees) == inst.n
    assert all(a <= b for a, b in zip(lengths, lengths[1:]))


@pytest.mark.parametrize("k", range(1, 7))
def test_uniform_metric_tree_has_k_minus_one_edges(k):
    """全距離 1 ならどの木も長さ k-1"""
    inst = metric_closure(WeightedGraph(6, tuple((u, v, 1) for u in range(6) for v in range(u + 1, 6))))
    tree = heuristic_k_tree(inst, 0, k)
    assert tree.total_length == k - 1
    assert tree.total_length == min_k_tree(inst, 0, k).total_length


def test_line_tree_takes_the_nearest_points():
    inst = line_instance(list(range(10)))
    assert heuristic_k_tree(inst, 0, 4).total_length == 3
    assert good_k_tree(inst, 0, 4).total_length == 3


def test_heuristic_sweep_is_logged(caplog):
    """30 個のインスタンスで最小 k 木との比を記録する（上限は観察値で、定理ではない）"""
    kinds = ("random_metric", "euclidean", "tree")
    ratios = []
    with caplog.at_level(logging.INFO, logger="src.ktree"):
        for seed in range(30):
            inst = generate_instance(seed, 5 + seed % 4, kinds[seed % 3])
            ratios.append(heuristic_ratio(inst))
    assert all(r >= 1.0 for r in ratios)
    assert sum("worst length ratio" in rec.getMessage() for rec in caplog.records) == 30
