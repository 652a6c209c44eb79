# -*- coding: utf-8 -*-
"""
ktree.py: good k-tree の提供者

exact は厳密モジュールの最小 k 木（常に certified）。
heuristic は一様ペナルティ λ の二分探索と、根付きの賞金収集型の木成長（主双対法）、
その後の葉の刈り込みによる木で、品質は保証しない。
"""
import logging

import networkx as nx
import numpy as np

from .constants import LAMBDA_SEARCH_ITERATIONS, get_cap
from .errors import StructuralError, ValidationError
from .exact import min_k_tree, min_k_trees, tk_profile
from .routes import KTree

logger = logging.getLogger(__name__)

PROVIDERS = ("exact", "heuristic")


def _grow_forest(dist: np.ndarray, root: int, penalty: float):
    """
    根付きの賞金収集型の森の成長。各頂点のペナルティは penalty。
    根を含まない活性成分が一様に双対変数を増やし、辺が張り詰めたら併合、
    ペナルティを使い切った成分は不活性になる。根を含む成分の頂点集合と木の辺を返す。
    """
    n = dist.shape[0]
    comp = np.arange(n)
    active = np.ones(n, dtype=bool)
    active[root] = False
    budget = np.full(n, float(penalty))
    budget[root] = np.inf
    load = np.zeros(n)
    forest = []
    weights = dist.astype(float)

    while active.any():
        act = active[comp].astype(float)
        rate = act[:, None] + act[None, :]
        apart = comp[:, None] != comp[None, :]
        slack = np.maximum(weights - load[:, None] - load[None, :], 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            edge_time = np.where(apart & (rate > 0), slack / rate, np.inf)
        i, j = np.unravel_index(np.argmin(edge_time), edge_time.shape)
        t_edge = edge_time[i, j]
        labels = np.flatnonzero(active)
        t_dead = budget[labels].min()

        # 同時刻なら不活性化を先に処理する（木が小さくなる側）
        delta = min(t_edge, t_dead)
        members = active[comp]
        load[members] += delta
        budget[labels] -= delta

        if t_dead <= t_edge:
            for c in labels[budget[labels] <= 1e-12]:
                active[c] = False
            continue

        a, b = comp[i], comp[j]
        forest.append((int(i), int(j), int(dist[i, j])))
        merged = min(a, b)
        other = max(a, b)
        comp[comp == other] = merged
        has_root = comp[root] == merged
        budget[merged] = budget[a] + budget[b] if not has_root else np.inf
        active[merged] = not has_root
        active[other] = False

    vertices = set(np.flatnonzero(comp == comp[root]).tolist())
    edges = [e for e in forest if e[0] in vertices and e[1] in vertices]
    return vertices, edges


def _prune_to(vertices: set, edges: list, root: int, k: int):
    """辺の長さが最大の葉から順に取り除き、ちょうど k 頂点にする"""
    graph = nx.Graph()
    graph.add_nodes_from(vertices)
    for u, v, w in edges:
        graph.add_edge(u, v, weight=w)
    while graph.number_of_nodes() > k:
        leaves = [v for v in graph.nodes if v != root and graph.degree(v) == 1]
        if not leaves:
            break
        leaf = max(leaves, key=lambda v: (next(iter(graph[v].values()))["weight"], -v))
        graph.remove_node(leaf)
    kept = [(u, v, d["weight"]) for u, v, d in graph.edges(data=True)]
    return set(graph.nodes), kept


def heuristic_k_tree(inst, s: int, k: int) -> KTree:
    """
    λ を [0, n·最大距離] で二分探索し、根の成分が k 頂点以上になる最小の λ の木を刈り込む。
    厳密オラクルが使える規模なら L_k と比べて certified を設定する。
    """
    if not 1 <= k <= inst.n:
        raise ValidationError(f"k must be in [1, {inst.n}], got {k}")
    if k == 1:
        return KTree(s, (s,), (), 0, certified=True)

    lo, hi = 0.0, float(inst.n * max(inst.max_distance(), 1))
    vertices, edges = _grow_forest(inst.dist, s, hi)
    if len(vertices) < k:
        raise StructuralError(f"prize-collecting growth reached only {len(vertices)} < {k} vertices")
    for _ in range(LAMBDA_SEARCH_ITERATIONS):
        mid = (lo + hi) / 2
        found, found_edges = _grow_forest(inst.dist, s, mid)
        if len(found) >= k:
            hi, vertices, edges = mid, found, found_edges
        else:
            lo = mid
    logger.debug("lambda search for k=%d settled at %.6g with %d vertices", k, hi, len(vertices))

    vertices, edges = _prune_to(vertices, edges, s, k)
    length = sum(w for _, _, w in edges)
    certified = False
    if inst.n <= get_cap("K_PATH_CAP"):
        certified = length <= tk_profile(inst, s).length(k)
    return KTree(s, tuple(vertices), tuple(edges), length, certified)


def good_k_tree(inst, s: int, k: int, provider: str = "exact") -> KTree:
    """k 頂点以上で s を含む木。exact は容量上限を超えると CapacityError"""
    if provider == "exact":
        return min_k_tree(inst, s, k)
    if provider == "heuristic":
        return heuristic_k_tree(inst, s, k)
    raise ValidationError(f"unknown k-tree provider {provider!r}; expected one of {PROVIDERS}")


def all_k_trees(inst, s: int, provider: str = "exact") -> list[KTree]:
    """k = 1..n の木をまとめて用意する（被覆アルゴリズムが走査する）"""
    if provider == "exact":
        return min_k_trees(inst, s)
    if provider == "heuristic":
        return [heuristic_k_tree(inst, s, k) for k in range(1, inst.n + 1)]
    raise ValidationError(f"unknown k-tree provider {provider!r}; expected one of {PROVIDERS}")


def heuristic_ratio(inst, s: int | None = None) -> float:
    """ヒューリスティックの木の長さと最小 k 木の長さの比の、k についての最大値（ログに残すだけで保証はしない）"""
    s = inst.start if s is None else s
    exact = min_k_trees(inst, s)
    worst = 1.0
    for k in range(2, inst.n + 1):
        best = exact[k - 1].total_length
        length = heuristic_k_tree(inst, s, k).total_length
        worst = max(worst, length / best if best > 0 else (1.0 if length == 0 else float("inf")))
    logger.info("heuristic k-tree on %s: worst length ratio %.4f over k = 2..%d",
                inst.name or "instance", worst, inst.n)
    return worst
