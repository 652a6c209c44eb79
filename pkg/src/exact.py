# -*- coding: utf-8 -*-
"""
exact.py: 小規模インスタンス向けの厳密オラクル

最適 Lp 経路、k 点パスの最小長、最小 k 木、直線上の区間 DP、複数車両の全探索。
近似アルゴリズムの主張はすべてここで検証する。
"""
import itertools
import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.sparse.csgraph import minimum_spanning_tree

from .constants import MULTI_VEHICLE_K_CAP, get_cap
from .errors import StructuralError, ValidationError, check_cap
from .routes import (
    DelayVector,
    KTree,
    MultiRoute,
    Route,
    lp_norm,
    multi_visit_times,
    parse_p,
    visit_cost,
    visit_times,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TkProfile:
    """L_k（k = 1..n）: s から k 個の異なる頂点を訪れる最短パスの長さ"""
    start: int
    lengths: tuple[int, ...]

    def length(self, k: int) -> int:
        if not 1 <= k <= len(self.lengths):
            raise ValidationError(f"k must be in [1, {len(self.lengths)}], got {k}")
        return self.lengths[k - 1]


@dataclass(frozen=True)
class ExactResult:
    """厳密解。objective は元の距離単位のノルム、cost は整数単位での Σt^p（p = ∞ では最大時刻）"""
    route: Route
    objective: float
    cost: object
    delays: DelayVector


@dataclass(frozen=True)
class MultiExactResult:
    routes: MultiRoute
    objective: float
    cost: object
    delays: DelayVector


def _extend_cost(cost, t: int, p: float):
    if math.isinf(p):
        return max(cost, t)
    return cost + visit_cost(t, p)


# --- 部分集合 DP（Held-Karp 型） ---

def _popcounts(size: int) -> np.ndarray:
    masks = np.arange(size, dtype=np.int64)
    counts = np.zeros(size, dtype=np.int64)
    while masks.any():
        counts += masks & 1
        masks >>= 1
    return counts


def subset_path_table(dist: np.ndarray, start: int, count_deadlines=None):
    """
    dp[mask, last] = start から mask の頂点をちょうど訪れて last で終わるパスの最短長。
    count_deadlines[c] が与えられれば、c 個目の頂点への到着が c の締切を超える遷移を捨てる。
    """
    n = dist.shape[0]
    size = 1 << n
    dp = np.full((size, n), np.inf)
    parent = np.full((size, n), -1, dtype=np.int16)
    dp[1 << start, start] = 0.0
    weights = dist.astype(float)
    idx = np.arange(n)
    bits = np.left_shift(1, idx)
    counts = _popcounts(size)

    for mask in range(size):
        if not (mask >> start) & 1:
            continue
        row = dp[mask]
        if not np.isfinite(row).any():
            continue
        candidates = row[:, None] + weights
        best_last = np.argmin(candidates, axis=0)
        best = candidates[best_last, idx]
        ok = ((mask & bits) == 0) & np.isfinite(best)
        if count_deadlines is not None:
            ok &= best <= count_deadlines[counts[mask] + 1]
        if not ok.any():
            continue
        targets = mask | bits[ok]
        cols = idx[ok]
        values = best[ok]
        better = values < dp[targets, cols]
        dp[targets[better], cols[better]] = values[better]
        parent[targets[better], cols[better]] = best_last[ok][better]
    return dp, parent


def trace_path(parent: np.ndarray, mask: int, last: int) -> list[int]:
    """subset_path_table の親ポインタから頂点列を復元する"""
    path = [last]
    while True:
        prev = int(parent[mask, last])
        if prev < 0:
            break
        mask ^= 1 << last
        last = prev
        path.append(last)
    return path[::-1]


@lru_cache(maxsize=64)
def _tk_lengths(inst, s: int) -> tuple[int, ...]:
    dp, _ = subset_path_table(inst.dist, s)
    counts = _popcounts(1 << inst.n)
    row_min = dp.min(axis=1)
    lengths = []
    for k in range(1, inst.n + 1):
        values = row_min[counts == k]
        lengths.append(int(values.min()))
    return tuple(lengths)


def tk_profile(inst, s: int | None = None) -> TkProfile:
    """すべての k について L_k を1回の部分集合 DP で求める"""
    s = inst.start if s is None else s
    check_cap("K_PATH_CAP", get_cap("K_PATH_CAP"), inst.n)
    return TkProfile(s, _tk_lengths(inst, s))


def min_k_path(inst, s: int, k: int) -> int:
    """s から k 個の異なる頂点を訪れる単純パスの最短長（L_1 = 0）"""
    if not 1 <= k <= inst.n:
        raise ValidationError(f"k must be in [1, {inst.n}], got {k}")
    return tk_profile(inst, s).length(k)


def shortest_hamiltonian_path(inst, s: int | None = None) -> int:
    s = inst.start if s is None else s
    return tk_profile(inst, s).length(inst.n)


# --- 最小 k 木 ---

def subset_tree(dist: np.ndarray, vertices) -> tuple[int, tuple[tuple[int, int, int], ...]]:
    """
    頂点集合上の最小全域木（長さと辺）。
    全辺に定数 1 を足しても全域木の辺数は一定なので最小木は変わらず、距離 0 の辺も消えない。
    """
    vertices = list(vertices)
    if len(vertices) == 1:
        return 0, ()
    idx = np.asarray(vertices)
    shifted = dist[np.ix_(idx, idx)].astype(float) + 1.0
    np.fill_diagonal(shifted, 0.0)
    tree = minimum_spanning_tree(shifted).tocoo()
    edges = tuple(
        (int(idx[r]), int(idx[c]), int(dist[idx[r], idx[c]])) for r, c in zip(tree.row, tree.col)
    )
    return sum(w for _, _, w in edges), edges


@lru_cache(maxsize=64)
def _subset_trees(inst, required: int) -> dict:
    """required のビットを含むすべての部分集合について最小木を求める"""
    trees = {}
    for mask in range(1, 1 << inst.n):
        if mask & required != required:
            continue
        vertices = [v for v in range(inst.n) if (mask >> v) & 1]
        trees[mask] = subset_tree(inst.dist, vertices)
    logger.debug("enumerated %d subset trees for n=%d", len(trees), inst.n)
    return trees


def all_subset_trees(inst) -> dict:
    """すべての空でない部分集合の最小木（LP の列の列挙に使う）"""
    check_cap("LP_VERTEX_CAP", get_cap("LP_VERTEX_CAP"), inst.n)
    return _subset_trees(inst, 0)


def min_k_trees(inst, s: int | None = None) -> list[KTree]:
    """
    k = 1..n の最小 k 木をまとめて求める。
    同じ長さの木が複数あれば頂点集合が辞書式で最小のものを選ぶ。
    長さが L_k 以下であることを確かめ、certified = True とする。
    """
    s = inst.start if s is None else s
    check_cap("K_TREE_CAP", get_cap("K_TREE_CAP"), inst.n)
    trees = _subset_trees(inst, 1 << s)
    best = {}
    for mask, (length, edges) in trees.items():
        vertices = tuple(v for v in range(inst.n) if (mask >> v) & 1)
        k = len(vertices)
        key = (length, vertices)
        if k not in best or key < best[k][0]:
            best[k] = (key, edges)

    profile = tk_profile(inst, s) if inst.n <= get_cap("K_PATH_CAP") else None
    result = []
    for k in range(1, inst.n + 1):
        (length, vertices), edges = best[k]
        certified = False
        if profile is not None:
            if length > profile.length(k):
                raise StructuralError(f"minimum {k}-tree ({length}) is longer than the {k}-path ({profile.length(k)})")
            certified = True
        result.append(KTree(s, vertices, edges, length, certified))
    return result


def min_k_tree(inst, s: int, k: int) -> KTree:
    """s を含みちょうど k 頂点を持つ最小木"""
    if not 1 <= k <= inst.n:
        raise ValidationError(f"k must be in [1, {inst.n}], got {k}")
    return min_k_trees(inst, s)[k - 1]


# --- 単一車両の最適 Lp 経路 ---

def _pareto(labels: list, prune: bool) -> list:
    """
    (長さ, コスト, 順序) のラベルから支配されたものを除く。
    未完了の状態では、長さもコストも以下のラベルがあれば残りの訪問はすべてそちらが有利になる。
    長さとコストが等しいときは順序が辞書式で小さい方を残す。
    """
    labels.sort()
    if not prune:
        return labels
    kept = []
    best_cost = None
    for label in labels:
        if best_cost is None or label[1] < best_cost:
            kept.append(label)
            best_cost = label[1]
    return kept


def _label_table(inst, start: int, p: float, allowed: int | None = None) -> dict:
    """
    状態 (訪問集合, 最後の頂点) ごとの非支配ラベル (長さ, コスト, 順序)。
    目的関数は各訪問の t^p の和なので、累積長さとコストの組で十分。
    """
    n = inst.n
    dist = inst.dist.tolist()
    allowed = (1 << n) - 1 if allowed is None else allowed
    table = {(1 << start, start): [(0, 0, (start,))]}
    for mask in range(1 << n):
        if not (mask >> start) & 1 or mask & ~allowed:
            continue
        for last in range(n):
            key = (mask, last)
            labels = table.get(key)
            if not labels:
                continue
            labels = _pareto(labels, prune=mask != allowed)
            table[key] = labels
            for nxt in range(n):
                bit = 1 << nxt
                if mask & bit or not allowed & bit:
                    continue
                d = dist[last][nxt]
                bucket = table.setdefault((mask | bit, nxt), [])
                for length, cost, order in labels:
                    t = length + d
                    bucket.append((t, _extend_cost(cost, t, p), order + (nxt,)))
    return table


def _hamiltonian_lexmin(inst, s: int) -> tuple[int, ...]:
    """最短ハミルトンパスのうち辞書式最小の順序"""
    n = inst.n
    full = (1 << n) - 1
    weights = inst.dist.astype(float)
    remain = np.full((1 << n, n), np.inf)
    remain[full, :] = 0.0
    idx = np.arange(n)
    for mask in range(full - 1, 0, -1):
        free = idx[((mask >> idx) & 1) == 0]
        targets = mask | (1 << free)
        remain[mask] = np.min(weights[:, free] + remain[targets, free][None, :], axis=1)
    order = [s]
    mask, clock, target = 1 << s, 0, remain[1 << s, s]
    while mask != full:
        last = order[-1]
        for nxt in range(n):
            if (mask >> nxt) & 1:
                continue
            if clock + weights[last, nxt] + remain[mask | (1 << nxt), nxt] == target:
                clock += weights[last, nxt]
                mask |= 1 << nxt
                order.append(nxt)
                break
        else:
            raise StructuralError("failed to reconstruct the shortest Hamiltonian path")
    return tuple(order)


def _result(route: Route, inst, p: float) -> ExactResult:
    delays = visit_times(route, inst)
    if math.isinf(p):
        cost = max(delays.per_vertex)
    else:
        cost = sum(visit_cost(t, p) for t in delays.per_vertex)
    return ExactResult(route, lp_norm(delays, p), cost, delays)


def exact_lp_tsp(inst, p, start: int | None = None) -> ExactResult:
    """
    Lp ノルムを最小にする経路（同値なら順序が辞書式最小）。
    有限の p では (訪問集合, 最後の頂点) 上のラベル DP、p = ∞ では最短ハミルトンパス。
    """
    p = parse_p(p)
    s = inst.start if start is None else start
    check_cap("EXACT_DP_CAP", get_cap("EXACT_DP_CAP"), inst.n)
    if inst.n == 1:
        return _result(Route(s, (s,)), inst, p)
    if math.isinf(p):
        return _result(Route(s, _hamiltonian_lexmin(inst, s)), inst, p)

    full = (1 << inst.n) - 1
    table = _label_table(inst, s, p)
    finals = []
    for last in range(inst.n):
        for length, cost, order in table.get((full, last), []):
            finals.append((cost, order))
    cost, order = min(finals)
    logger.debug("exact L%s route on n=%d: cost %s", p, inst.n, cost)
    return _result(Route(s, order), inst, p)


def brute_force_lp_tsp(inst, p, start: int | None = None) -> ExactResult:
    """全順列の列挙による検証用オラクル"""
    p = parse_p(p)
    s = inst.start if start is None else start
    check_cap("PERMUTATION_CAP", get_cap("PERMUTATION_CAP"), inst.n)
    others = [v for v in range(inst.n) if v != s]
    dist = inst.dist.tolist()
    best = None
    for perm in itertools.permutations(others):
        clock, cost, last = 0, 0, s
        for v in perm:
            clock += dist[last][v]
            cost = _extend_cost(cost, clock, p)
            last = v
        if best is None or cost < best[0]:
            best = (cost, (s,) + perm)
    return _result(Route(s, best[1]), inst, p)


# --- 直線メトリックの区間 DP ---

def _line_order(inst, s: int):
    order = sorted(range(inst.n), key=lambda v: (inst.positions[v], v))
    xs = np.asarray([inst.positions[v] for v in order], dtype=float)
    return order, xs, order.index(s)


def line_interval_dp(inst, s: int, weights, deadlines=None) -> tuple[int, ...] | None:
    """
    直線上の区間 DP。状態 (左端, 右端, 側) ごとに重み付き移動距離の最小値だけを持つ。
    weights[size] は区間の頂点数が size から size+1 に増える移動に掛ける重み。
    deadlines[count] が与えられれば count 個目の頂点への到着がそれを超える遷移を捨てる
    （このとき重みは 1 で、値は到着時刻そのもの）。到達できなければ None。
    """
    order, xs, q = _line_order(inst, s)
    n = inst.n
    left = np.full(n, np.inf)
    right = np.full(n, np.inf)
    left[q] = right[q] = 0.0
    choices = {}
    for size in range(1, n):
        weight = float(weights[size])
        lo, hi = max(0, q - size), min(q, n - size - 1)
        ls = np.arange(lo, hi + 1)
        rs = ls + size
        ext_left = ls < q
        ext_right = rs > q
        nxt = np.minimum(ls + 1, n - 1)
        a = np.where(ext_left, left[nxt] + (xs[nxt] - xs[ls]) * weight, np.inf)
        b = np.where(ext_left, right[nxt] + (xs[rs] - xs[ls]) * weight, np.inf)
        c = np.where(ext_right, left[ls] + (xs[rs] - xs[ls]) * weight, np.inf)
        d = np.where(ext_right, right[ls] + (xs[rs] - xs[rs - 1]) * weight, np.inf)
        new_left = np.full(n, np.inf)
        new_right = np.full(n, np.inf)
        new_left[ls] = np.minimum(a, b)
        new_right[ls] = np.minimum(c, d)
        if deadlines is not None:
            limit = deadlines[size + 1]
            new_left[new_left > limit + 1e-9] = np.inf
            new_right[new_right > limit + 1e-9] = np.inf
        choices[size + 1] = (lo, b < a, d < c)
        left, right = new_left, new_right

    if n == 1:
        return (s,)
    if not (np.isfinite(left[0]) or np.isfinite(right[0])):
        return None
    # 復元: 区間 [l, r] の側から1つずつ戻る
    side = "right" if right[0] < left[0] else "left"
    l, r = 0, n - 1
    visits = []
    for size in range(n, 1, -1):
        lo, from_right_l, from_right_r = choices[size]
        if side == "left":
            visits.append(order[l])
            side = "right" if from_right_l[l - lo] else "left"
            l += 1
        else:
            visits.append(order[r])
            side = "right" if from_right_r[l - lo] else "left"
            r -= 1
    return (s,) + tuple(reversed(visits))


def _line_weighted(inst, s: int, p: float) -> tuple[int, ...]:
    """
    p = 1 と p = ∞ の区間 DP。移動距離に「まだ訪れていない頂点数」（p = 1）または 1（p = ∞）を
    掛けた和が目的関数になる。
    """
    n = inst.n
    weights = [1.0 if math.isinf(p) else float(n - size) for size in range(n)]
    return line_interval_dp(inst, s, weights)


def _line_labels(inst, s: int, p: float) -> tuple[int, ...]:
    """一般の p の区間 DP。状態 (左端, 右端, 側) ごとに (時刻, コスト) の非支配ラベルを持つ"""
    order, xs, q = _line_order(inst, s)
    n = inst.n
    states = {(q, q, 0): [(0, 0, (s,))]}
    for size in range(1, n):
        nxt_states = {}
        for (l, r, side), labels in states.items():
            here = xs[l] if side == 0 else xs[r]
            moves = []
            if l > 0:
                moves.append((l - 1, r, 0, l - 1))
            if r < n - 1:
                moves.append((l, r + 1, 1, r + 1))
            for nl, nr, nside, pos in moves:
                d = int(abs(xs[pos] - here))
                bucket = nxt_states.setdefault((nl, nr, nside), [])
                for t, cost, seq in labels:
                    arrive = t + d
                    bucket.append((arrive, _extend_cost(cost, arrive, p), seq + (order[pos],)))
        states = {key: _pareto(labels, prune=size < n - 1) for key, labels in nxt_states.items()}
    finals = [(cost, seq) for labels in states.values() for _, cost, seq in labels]
    return min(finals)[1]


def exact_line_lp_tsp(inst, p, start: int | None = None) -> ExactResult:
    """
    直線メトリック上の最適 Lp 経路。
    最適経路は訪問済み区間を常に広げる: 区間の内側への寄り道は何も訪れず、
    以後の訪問時刻をすべて弱く増やすだけなので、p ≥ 1 でも p = ∞ でも得にならない。
    """
    p = parse_p(p)
    if inst.geometry != "line":
        raise ValidationError(f"line interval DP requires line geometry, got {inst.geometry}")
    s = inst.start if start is None else start
    check_cap("LINE_DP_CAP", get_cap("LINE_DP_CAP"), inst.n)
    if inst.n == 1:
        return _result(Route(s, (s,)), inst, p)
    if p == 1 or math.isinf(p):
        order = _line_weighted(inst, s, p)
    else:
        order = _line_labels(inst, s, p)
    return _result(Route(s, order), inst, p)


# --- 複数車両 ---

def exact_multi_lp_tsp(inst, p, starts=None) -> MultiExactResult:
    """
    K 台の車両の最適経路。
    車両ごとに各部分集合の最良コストをラベル DP で求め、始点以外の頂点の車両への割り当てを全列挙する。
    """
    p = parse_p(p)
    starts = tuple(inst.starts if starts is None else starts)
    check_cap("MULTI_VEHICLE_K_CAP", MULTI_VEHICLE_K_CAP, len(starts))
    check_cap("MULTI_VEHICLE_CAP", get_cap("MULTI_VEHICLE_CAP"), inst.n)

    best_by_mask = []
    for s in starts:
        table = _label_table(inst, s, p)
        best = {}
        for (mask, _), labels in table.items():
            for _, cost, order in labels:
                if mask not in best or (cost, order) < best[mask]:
                    best[mask] = (cost, order)
        best_by_mask.append(best)

    start_set = set(starts)
    others = [v for v in range(inst.n) if v not in start_set]
    best = None
    for assignment in itertools.product(range(len(starts)), repeat=len(others)):
        masks = [1 << s for s in starts]
        for v, i in zip(others, assignment):
            masks[i] |= 1 << v
        parts = [best_by_mask[i][m] for i, m in enumerate(masks)]
        costs = [c for c, _ in parts]
        total = max(costs) if math.isinf(p) else sum(costs)
        if best is None or total < best[0]:
            best = (total, tuple(order for _, order in parts))

    routes = MultiRoute(tuple(Route(order[0], order) for order in best[1]))
    delays = multi_visit_times(routes, inst)
    return MultiExactResult(routes, lp_norm(delays, p), best[0], delays)
