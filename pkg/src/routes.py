# -*- coding: utf-8 -*-
"""
routes.py: 経路・遅延ベクトル・Lp ノルム・ショートカット・劣多数化の証明書

すべてのアルゴリズムが共有する語彙。p = ∞ は math.inf で表し、各関数で明示的に分岐する。
"""
import logging
import math
from dataclasses import dataclass
from fractions import Fraction

import networkx as nx
import numpy as np

from .constants import NORM_TOLERANCE
from .errors import StructuralError, ValidationError

logger = logging.getLogger(__name__)


def parse_p(value) -> float:
    """ノルムの指数を解釈する。"inf" / "∞" / math.inf は L∞、それ以外は 1 以上の実数"""
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ("inf", "infinity", "∞"):
            return math.inf
        try:
            value = float(text)
        except ValueError as e:
            raise ValidationError(f"p must be a number or 'inf', got {value!r}") from e
    p = float(value)
    if math.isnan(p) or p < 1:
        raise ValidationError(f"p must be >= 1 or inf, got {value}")
    return p


def is_integral_p(p: float) -> bool:
    return math.isfinite(p) and float(p).is_integer()


def visit_cost(t: int, p: float):
    """1回の訪問のコスト t^p（整数 p なら厳密な整数）"""
    if is_integral_p(p):
        return int(t) ** int(p)
    return float(t) ** p


@dataclass(frozen=True)
class Route:
    """始点 s から始まる頂点の順列"""
    start: int
    order: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "order", tuple(int(v) for v in self.order))
        if not self.order or self.order[0] != self.start:
            raise ValidationError(f"route must begin at its start vertex {self.start}")
        if len(set(self.order)) != len(self.order):
            raise ValidationError("route visits a vertex twice")

    @classmethod
    def from_order(cls, order) -> "Route":
        order = tuple(order)
        return cls(order[0], order)

    def __len__(self) -> int:
        return len(self.order)

    def to_json(self) -> list[int]:
        return list(self.order)


@dataclass(frozen=True)
class MultiRoute:
    """K 台の車両の経路。経路 i は s_i から始まり、訪問は最初の到着が有効"""
    routes: tuple[Route, ...]

    @property
    def K(self) -> int:
        return len(self.routes)

    def to_json(self) -> list[list[int]]:
        return [r.to_json() for r in self.routes]


@dataclass(frozen=True)
class DelayVector:
    """頂点ごとの訪問時刻（整数単位）と、それを元の距離に戻す scale"""
    per_vertex: tuple[int, ...]
    scale: Fraction = Fraction(1)

    def __post_init__(self):
        object.__setattr__(self, "per_vertex", tuple(int(x) for x in self.per_vertex))
        if any(x < 0 for x in self.per_vertex):
            raise ValidationError("visit times must be nonnegative")

    @property
    def profile(self) -> tuple[int, ...]:
        return tuple(sorted(self.per_vertex))

    @property
    def n(self) -> int:
        return len(self.per_vertex)

    def real(self) -> np.ndarray:
        return np.asarray(self.per_vertex, dtype=float) * float(self.scale)

    def to_json(self) -> dict:
        return {
            "units": list(self.per_vertex),
            "scale": {"num": self.scale.numerator, "den": self.scale.denominator},
        }


# --- 時刻の計算 ---

def _check_permutation(order, n: int) -> None:
    if sorted(order) != list(range(n)):
        missing = sorted(set(range(n)) - set(order))
        raise ValidationError(f"route is not a permutation of the vertices (missing {missing})")


def visit_times(route: Route, inst) -> DelayVector:
    """単一車両の経路に沿った訪問時刻 ℓ_v（ℓ_s = 0）"""
    _check_permutation(route.order, inst.n)
    order = np.asarray(route.order, dtype=np.int64)
    legs = inst.dist[order[:-1], order[1:]]
    arrival = np.concatenate(([0], np.cumsum(legs)))
    times = np.zeros(inst.n, dtype=np.int64)
    times[order] = arrival
    return DelayVector(tuple(times.tolist()), inst.scale)


def partial_times(order, inst) -> dict[int, int]:
    """部分経路（全頂点を含まなくてよい）の訪問時刻"""
    times = {}
    clock = 0
    for i, v in enumerate(order):
        if i:
            clock += inst.d(order[i - 1], v)
        times.setdefault(v, clock)
    return times


def multi_visit_times(mr: MultiRoute, inst) -> DelayVector:
    """各頂点の最初の訪問時刻（全車両の最小値）"""
    best = [None] * inst.n
    for route in mr.routes:
        for v, t in partial_times(route.order, inst).items():
            if best[v] is None or t < best[v]:
                best[v] = t
    uncovered = [v for v, t in enumerate(best) if t is None]
    if uncovered:
        raise ValidationError(f"vertex {uncovered[0]} is not covered by any vehicle")
    return DelayVector(tuple(best), inst.scale)


def walk_arrivals(seq, inst) -> dict[int, int]:
    """繰り返しを含む歩道に沿った各頂点への最初の到着時刻"""
    return partial_times(list(seq), inst)


# --- ノルム ---

def minkowski(values, p: float) -> float:
    """
    非負ベクトルの Lp ノルム。
    オーバーフローを避けるため max·(Σ (x/max)^p)^{1/p} で計算する。
    """
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        return 0.0
    top = float(x.max())
    if top == 0.0:
        return 0.0
    if math.isinf(p):
        return top
    if p == 1:
        return float(x.sum())
    return top * float(np.sum((x / top) ** p)) ** (1.0 / p)


def lp_norm(d: DelayVector, p: float, units: bool = False) -> float:
    """遅延ベクトルの Lp ノルム（既定では元の距離の単位、units=True なら整数単位）"""
    p = parse_p(p)
    value = minkowski(d.per_vertex, p)
    return value if units else value * float(d.scale)


def power_sum(d: DelayVector, p: float):
    """Σ ℓ_v^p（整数単位、整数 p なら厳密）。p = ∞ では最大値"""
    p = parse_p(p)
    if math.isinf(p):
        return max(d.per_vertex)
    return sum(visit_cost(t, p) for t in d.per_vertex)


def route_objective(route: Route, inst, p: float) -> float:
    return lp_norm(visit_times(route, inst), p)


# --- ショートカット ---

def shortcut(seq, inst, require_all: bool = True) -> Route:
    """
    繰り返しを含む歩道から、最初の出現だけを残した経路を作る。
    三角不等式により各頂点の訪問時刻は歩道での最初の到着時刻以下になる（毎回検査する）。
    """
    seq = [int(v) for v in seq]
    if not seq:
        raise ValidationError("cannot shortcut an empty walk")
    first = list(dict.fromkeys(seq))
    if require_all and len(first) != inst.n:
        missing = sorted(set(range(inst.n)) - set(first))
        raise ValidationError(f"walk does not visit vertex {missing[0]}")
    arrivals = walk_arrivals(seq, inst)
    times = partial_times(first, inst)
    for v, t in times.items():
        if t > arrivals[v]:
            raise StructuralError(
                f"shortcut delayed vertex {v}: {t} > walk arrival {arrivals[v]}"
            )
    return Route(first[0], tuple(first))


# --- 劣多数化 ---

def submajorization_ratio(a, lower) -> float:
    """
    ρ = max_k profile_k / L_k。
    L_k = 0 かつ T_k = 0 の k は飛ばし、L_k = 0 < T_k なら ∞。
    証明書: 任意の対称単調ノルムで ‖a‖ ≤ ρ·‖b‖（b の profile が L 以上のとき）。
    """
    profile = a.profile if isinstance(a, DelayVector) else tuple(sorted(a))
    lower = tuple(lower)
    if len(profile) != len(lower):
        raise ValidationError(f"length mismatch: {len(profile)} visit times vs {len(lower)} bounds")
    if any(lower[i] > lower[i + 1] for i in range(len(lower) - 1)):
        raise ValidationError("lower bounds must be nondecreasing")
    rho = 0.0
    for t, bound in zip(profile, lower):
        if bound == 0:
            if t > 0:
                return math.inf
            continue
        rho = max(rho, float(t) / float(bound))
    # 空ベクトルやすべてゼロの場合は比 1 とする
    return rho if rho > 0 else 1.0


def norm_dominates(a, b, rho: float, grid) -> bool:
    """ノルムのグリッド上で ‖a‖_p ≤ ρ·‖b‖_p + 許容誤差 が成り立つか"""
    va = a.per_vertex if isinstance(a, DelayVector) else a
    vb = b.per_vertex if isinstance(b, DelayVector) else b
    for p in grid:
        lhs, rhs = minkowski(va, p), rho * minkowski(vb, p)
        if lhs > rhs + NORM_TOLERANCE * max(1.0, rhs):
            return False
    return True


# --- 木と二重化した巡回 ---

@dataclass(frozen=True)
class KTree:
    """
    始点 root を含む木。vertices は木の頂点集合、edges は (u, v, w)。
    certified は total_length ≤ min_k_path(k) が確認済みかどうか。
    """
    root: int
    vertices: tuple[int, ...]
    edges: tuple[tuple[int, int, int], ...]
    total_length: int
    certified: bool = False

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(sorted(int(v) for v in self.vertices)))
        object.__setattr__(self, "edges", tuple(sorted(
            (min(int(u), int(v)), max(int(u), int(v)), int(w)) for u, v, w in self.edges
        )))
        if self.root not in self.vertices:
            raise ValidationError(f"tree root {self.root} is not among its vertices")
        if sum(w for _, _, w in self.edges) != self.total_length:
            raise ValidationError("tree length does not equal the sum of its edge weights")
        if not nx.is_tree(self.graph()):
            raise ValidationError("edges do not form a tree spanning the vertex set")

    @property
    def size(self) -> int:
        return len(self.vertices)

    def graph(self) -> nx.Graph:
        """隣接頂点が番号順に並ぶグラフ（DFS で子を番号順にたどるため）"""
        graph = nx.Graph()
        graph.add_nodes_from(self.vertices)
        for u, v, w in self.edges:
            graph.add_edge(u, v, weight=w)
        return graph

    def doubled_walk(self) -> list[int]:
        """root から出て root に戻る深さ優先の二重巡回（子は頂点番号順）"""
        walk = [self.root]
        for u, v, kind in nx.dfs_labeled_edges(self.graph(), source=self.root):
            if u == v:
                continue
            if kind == "forward":
                walk.append(v)
            elif kind == "reverse":
                walk.append(u)
        return walk

    def to_json(self) -> dict:
        return {
            "root": self.root,
            "vertices": list(self.vertices),
            "edges": [list(e) for e in self.edges],
            "total_length": self.total_length,
            "certified": self.certified,
        }


def walk_length(walk, inst) -> int:
    return int(sum(inst.d(walk[i], walk[i + 1]) for i in range(len(walk) - 1)))
