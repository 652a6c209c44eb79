# -*- coding: utf-8 -*-
"""
cover.py: 部分被覆による経路構成

- all_norm_route: 決定的な All-Norm 版（b = 最小の正の距離、c = 2）
- lp_cover_route: b = base·c^u の乱択版。各部分巡回の向きをシード付きの硬貨で決める
- grid_search / derandomized_best: u の格子と向きの組合せを尽くす脱乱択化
- f_p / tune_c: 期待値の定数
"""
import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .constants import FLIP_EXHAUSTIVE_LIMIT, get_cap
from .errors import StructuralError, ValidationError
from .exact import tk_profile
from .ktree import all_k_trees
from .routes import (
    DelayVector,
    Route,
    lp_norm,
    parse_p,
    power_sum,
    shortcut,
    submajorization_ratio,
    visit_times,
    walk_arrivals,
    walk_length,
)

logger = logging.getLogger(__name__)

ALL_NORM_FACTOR = 8


@dataclass(frozen=True)
class Subtour:
    """1回の反復で走る閉路（二重化した木の深さ優先巡回）"""
    iteration: int
    budget: float
    tree_size: int
    tree_length: int
    walk: tuple[int, ...]
    length: int
    reversed: bool
    new_vertices: tuple[int, ...]

    def to_json(self) -> dict:
        return {
            "iteration": self.iteration,
            "budget": self.budget,
            "tree_size": self.tree_size,
            "tree_length": self.tree_length,
            "walk": list(self.walk),
            "length": self.length,
            "reversed": self.reversed,
            "new_vertices": list(self.new_vertices),
        }


@dataclass(frozen=True)
class CoverSchedule:
    """
    b, c と部分巡回の列。final_route は連結した歩道のショートカット、
    traversal はショートカットせずに歩道を走ったときの最初の到着時刻。
    """
    b: float
    c: float
    zero_vertices: tuple[int, ...]
    subtours: tuple[Subtour, ...]
    final_route: Route
    traversal: DelayVector

    def first_cover_iteration(self, k: int) -> int:
        """k 個目の頂点を初めて覆った反復の番号"""
        seen = 1 + len(self.zero_vertices)
        if k <= seen:
            return 0
        for sub in self.subtours:
            seen += len(sub.new_vertices)
            if seen >= k:
                return sub.iteration
        raise ValidationError(f"schedule never covers {k} vertices")

    def to_json(self) -> dict:
        return {
            "b": self.b,
            "c": self.c,
            "zero_vertices": list(self.zero_vertices),
            "subtours": [s.to_json() for s in self.subtours],
            "final_route": self.final_route.to_json(),
            "traversal": self.traversal.to_json(),
        }


def _iteration_cap(inst, b: float, c: float) -> int:
    top = inst.n * inst.max_distance()
    if top <= b:
        return 2
    return math.ceil(math.log(top / b, c)) + 2


def _cover(inst, trees, b: float, c: float, flip) -> CoverSchedule:
    """
    反復 j で長さ b·c^j 以下の最大の木を選び、二重化した巡回を flip(j) の向きで走る。
    始点から距離 0 の頂点は最初にまとめて訪れる。
    """
    s = inst.start
    zero = tuple(v for v in range(inst.n) if v != s and inst.d(s, v) == 0)
    seen = {s, *zero}
    walk_total = [s, *zero]
    subtours = []
    cap = _iteration_cap(inst, b, c)
    j = 0
    while len(seen) < inst.n:
        if j > cap:
            raise StructuralError(f"covering did not finish within {cap} iterations")
        budget = b * c ** j
        tree = max(
            (t for t in trees if t.total_length <= budget * (1 + 1e-12)),
            key=lambda t: t.size,
        )
        walk = tree.doubled_walk()
        reverse = bool(flip(j))
        if reverse:
            walk = walk[::-1]
        length = walk_length(walk, inst)
        if length > 2 * budget * (1 + 1e-12):
            raise StructuralError(f"subtour {j} has length {length} > 2·{budget}")
        new = tuple(v for v in dict.fromkeys(walk) if v not in seen)
        seen.update(new)
        walk_total.extend(walk[1:])
        subtours.append(Subtour(j, budget, tree.size, tree.total_length, tuple(walk), length, reverse, new))
        j += 1

    arrivals = walk_arrivals(walk_total, inst)
    traversal = DelayVector(tuple(arrivals[v] for v in range(inst.n)), inst.scale)
    route = shortcut(walk_total, inst)
    return CoverSchedule(b, c, zero, tuple(subtours), route, traversal)


def _check_c(c: float, upper: float = math.e) -> None:
    if not 1 < c < upper:
        raise ValidationError(f"c must lie in (1, {upper:.6g}), got {c}")


def base_unit(inst) -> int:
    """幾何的な予算列の基準（最小の正の距離、なければ 1）"""
    return max(inst.min_positive_distance(), 1)


def all_norm_route(inst, provider: str = "exact", trees=None) -> tuple[Route, CoverSchedule]:
    """
    All-Norm 経路: 反復 i で長さ 2^i·b 以下の最大の木 G_i の二重巡回を連結する。
    exact 提供者なら T_k ≤ 8·L_k をすべての k で確かめる。
    """
    trees = trees if trees is not None else all_k_trees(inst, inst.start, provider)
    schedule = _cover(inst, trees, float(base_unit(inst)), 2.0, lambda j: False)
    if provider == "exact" and inst.n <= get_cap("K_PATH_CAP"):
        lower = tk_profile(inst, inst.start).lengths
        for label, delays in (("route", visit_times(schedule.final_route, inst)), ("traversal", schedule.traversal)):
            rho = submajorization_ratio(delays, lower)
            if rho > ALL_NORM_FACTOR + 1e-9:
                raise StructuralError(f"all-norm {label} is only {rho:.4f}-submajorized by the k-path profile")
    return schedule.final_route, schedule


def lp_cover_route(inst, p, c: float, u: float, seed: int, provider: str = "exact", trees=None):
    """
    b = base·c^u とし、反復 j の木を長さ b·c^j 以下で選び、シード付きの硬貨で向きを決める。
    """
    parse_p(p)
    _check_c(c)
    if not 0 <= u < 1:
        raise ValidationError(f"u must lie in [0, 1), got {u}")
    trees = trees if trees is not None else all_k_trees(inst, inst.start, provider)
    rng = np.random.default_rng(seed)
    coins = {}

    def flip(j):
        if j not in coins:
            coins[j] = rng.random() < 0.5
        return coins[j]

    schedule = _cover(inst, trees, base_unit(inst) * c ** u, c, flip)
    return schedule.final_route, schedule


# --- 脱乱択化 ---

@dataclass(frozen=True)
class GridSearchResult:
    """格子上の最良経路と、期待値と比べるための格子平均（‖T‖_p^p、元の単位）"""
    route: Route
    objective: float
    grid_mean: float
    candidates: int
    best_u: float
    best_flips: tuple[bool, ...]
    schedule: CoverSchedule

    def to_json(self) -> dict:
        return {
            "route": self.route.to_json(),
            "objective": self.objective,
            "grid_mean": self.grid_mean,
            "candidates": self.candidates,
            "best_u": self.best_u,
            "best_flips": list(self.best_flips),
            "schedule": self.schedule.to_json(),
        }


def _powered(objective: float, p: float) -> float:
    return objective if math.isinf(p) else objective ** p


def grid_search(inst, p, c: float, m: int, provider: str = "exact", trees=None,
                flip_limit: int = FLIP_EXHAUSTIVE_LIMIT) -> GridSearchResult:
    """
    u ∈ {0, 1/m, …, (m-1)/m} と部分巡回の向きの組合せを尽くす。
    部分巡回が flip_limit 個以下なら全組合せ、それを超えれば全順方向と全逆方向の2通り。
    """
    p = parse_p(p)
    _check_c(c)
    if m < 1:
        raise ValidationError(f"grid size must be at least 1, got {m}")
    trees = trees if trees is not None else all_k_trees(inst, inst.start, provider)
    base = base_unit(inst)

    best = None
    powers = []
    for idx in range(m):
        u = idx / m
        b = base * c ** u
        forward = _cover(inst, trees, b, c, lambda j: False)
        count = len(forward.subtours)
        if count <= flip_limit:
            patterns = itertools.product((False, True), repeat=count)
        else:
            patterns = ((False,) * count, (True,) * count)
        weights = []
        for pattern in patterns:
            schedule = forward if not any(pattern) else _cover(inst, trees, b, c, lambda j: pattern[j])
            objective = lp_norm(visit_times(schedule.final_route, inst), p)
            weights.append(_powered(objective, p))
            if best is None or objective < best[0] - 1e-12 * max(1.0, best[0]):
                best = (objective, u, tuple(pattern), schedule)
        powers.append(float(np.mean(weights)))

    objective, u, pattern, schedule = best
    logger.info("grid search over m=%d: best %.6g, grid mean %.6g", m, objective, float(np.mean(powers)))
    return GridSearchResult(
        schedule.final_route, objective, float(np.mean(powers)), m, u, pattern, schedule
    )


def derandomized_best(inst, p, c: float, m: int, provider: str = "exact", trees=None) -> Route:
    """格子探索の最良経路"""
    return grid_search(inst, p, c, m, provider, trees).route


# --- モンテカルロと反復 ---

@dataclass(frozen=True)
class MonteCarloSummary:
    """基準値に対する比 ‖T‖_p^p / ref^p の標本平均と標準誤差"""
    mean: float
    stderr: float
    ratios: tuple[float, ...]
    samples: int

    def to_json(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr, "samples": self.samples}


def summarize(ratios) -> MonteCarloSummary:
    values = np.asarray(ratios, dtype=float)
    stderr = float(values.std(ddof=1) / math.sqrt(len(values))) if len(values) > 1 else 0.0
    return MonteCarloSummary(float(values.mean()), stderr, tuple(values.tolist()), len(values))


def cover_monte_carlo(inst, p, c: float, samples: int, seed: int, reference: float,
                      provider: str = "exact", trees=None) -> MonteCarloSummary:
    """標本 i はシード seed ⊕ i から u と向きを引く"""
    p = parse_p(p)
    _check_c(c)
    if samples < 1:
        raise ValidationError("samples must be positive")
    if reference <= 0:
        raise ValidationError("reference objective must be positive")
    trees = trees if trees is not None else all_k_trees(inst, inst.start, provider)
    ratios = []
    for i in range(samples):
        rng = np.random.default_rng(seed ^ i)
        u = float(rng.random())
        route, _ = lp_cover_route(inst, p, c, u, int(rng.integers(2 ** 31)), trees=trees)
        objective = lp_norm(visit_times(route, inst), p)
        ratios.append(_powered(objective / reference, p))
    return summarize(ratios)


def repeated_best(inst, p, c: float, runs: int, seed: int, provider: str = "exact", trees=None):
    """独立な乱択実行の最良経路とその目的値"""
    p = parse_p(p)
    trees = trees if trees is not None else all_k_trees(inst, inst.start, provider)
    best = None
    for i in range(runs):
        rng = np.random.default_rng(seed ^ i)
        route, _ = lp_cover_route(inst, p, c, float(rng.random()), int(rng.integers(2 ** 31)), trees=trees)
        objective = lp_norm(visit_times(route, inst), p)
        if best is None or objective < best[1]:
            best = (route, objective)
    return best


# --- 定数 ---

def f_p(c: float, p: float) -> float:
    """2^{p-1}(c^{2p} - 1) / (p (c-1)^p ln c)"""
    p = parse_p(p)
    if math.isinf(p):
        raise ValidationError("f_p is defined for finite p")
    _check_c(c)
    return 2 ** (p - 1) * (c ** (2 * p) - 1) / (p * (c - 1) ** p * math.log(c))


def tune_c(p: float) -> tuple[float, float]:
    """(1, e) 上で f_p を最小化する（有界 Brent 法、端点も候補に含める）"""
    p = parse_p(p)
    lo, hi = 1 + 1e-9, math.e - 1e-12
    res = minimize_scalar(lambda c: f_p(c, p), bounds=(lo, hi), method="bounded", options={"xatol": 1e-9})
    candidates = [(float(res.fun), float(res.x)), (f_p(hi, p), hi)]
    value, c_star = min(candidates)
    return c_star, value


def power_ratio(delays: DelayVector, reference: float, p: float) -> float:
    """‖T‖_p^p / ref^p（p = ∞ では ‖T‖_∞ / ref）"""
    return _powered(lp_norm(delays, p) / reference, p)


def traversal_power(schedule: CoverSchedule, p: float):
    return power_sum(schedule.traversal, p)
