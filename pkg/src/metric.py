# -*- coding: utf-8 -*-
"""
metric.py: メトリックインスタンスの構築・検証・量子化・入出力

距離はすべて整数単位で保持し、有理数の scale で元の距離に戻す。
経路長と訪問時刻は整数のまま厳密に計算され、浮動小数点を使うのはノルム評価だけ。
"""
import logging
import math
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import reduce
from pathlib import Path

import networkx as nx
import numpy as np
from scipy.spatial.distance import cdist

from .constants import SHARED_INSTANCES_DIR
from .errors import SchemaError, ValidationError
from .utils import Utils

logger = logging.getLogger(__name__)

GEOMETRIES = ("general", "line", "tree", "euclidean")
GENERATOR_KINDS = ("random_metric", "line", "tree", "euclidean")


@dataclass(frozen=True)
class Violation:
    """公理違反1件（witness は identity/symmetry では (i, j)、triangle では i→k→j の (i, k, j)）"""
    axiom: str
    witness: tuple[int, ...]
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    """validate_metric の結果。違反した公理ごとに最初の証拠と件数を持つ"""
    violations: tuple[Violation, ...] = ()
    counts: tuple[tuple[str, int], ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def axioms(self) -> set[str]:
        return {v.axiom for v in self.violations}

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "violations": [
                {"axiom": v.axiom, "witness": list(v.witness), "detail": v.detail}
                for v in self.violations
            ],
            "counts": dict(self.counts),
        }


@dataclass(frozen=True)
class WeightedGraph:
    """メトリック閉包の入力となる重み付き無向グラフ"""
    n: int
    edges: tuple[tuple[int, int, object], ...]


@dataclass(frozen=True, eq=False)
class MetricInstance:
    """
    整数単位の距離行列を持つ検証済みメトリック。
    構築後は不変で、複数のワーカーから安全に共有できる。
    """
    dist: np.ndarray
    starts: tuple[int, ...] = (0,)
    geometry: str = "general"
    scale: Fraction = Fraction(1)
    name: str = ""
    positions: tuple[int, ...] | None = None
    edges: tuple[tuple[int, int, int], ...] | None = None
    points: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        raw = np.asarray(self.dist)
        if raw.ndim != 2 or raw.shape[0] != raw.shape[1] or raw.shape[0] == 0:
            raise ValidationError(f"distance matrix must be a nonempty square matrix, got shape {raw.shape}")
        if raw.dtype.kind not in "iu":
            if not np.all(np.isfinite(raw)) or not np.all(np.equal(np.mod(raw, 1), 0)):
                raise ValidationError("distances must be integer units")
        dist = np.array(raw, dtype=np.int64)
        if np.any(dist < 0):
            raise ValidationError("distances must be nonnegative")
        dist.setflags(write=False)
        object.__setattr__(self, "dist", dist)
        object.__setattr__(self, "starts", tuple(int(s) for s in self.starts))
        object.__setattr__(self, "scale", Fraction(self.scale))
        n = dist.shape[0]

        if not self.starts:
            raise ValidationError("at least one start vertex is required")
        for s in self.starts:
            if not 0 <= s < n:
                raise ValidationError(f"start vertex {s} is out of range for n={n}")
        if self.geometry not in GEOMETRIES:
            raise ValidationError(f"unknown geometry {self.geometry!r}")
        if self.scale <= 0:
            raise ValidationError("scale must be positive")

        if self.geometry == "line":
            if self.positions is None or len(self.positions) != n:
                raise ValidationError("line geometry requires one position per vertex")
            pos = np.asarray(self.positions, dtype=np.int64)
            if not np.array_equal(np.abs(pos[:, None] - pos[None, :]), dist):
                raise ValidationError("line distances must equal absolute position differences")
            # 直線上の距離は構成上メトリックなので三角不等式の全検査は省く
            return

        report = validate_metric(dist)
        if not report.ok:
            raise ValidationError(
                f"not a metric: {', '.join(sorted(report.axioms))} violated", report=report
            )

    @property
    def n(self) -> int:
        return int(self.dist.shape[0])

    @property
    def start(self) -> int:
        return self.starts[0]

    @property
    def K(self) -> int:
        return len(self.starts)

    def d(self, i: int, j: int) -> int:
        return int(self.dist[i, j])

    def real(self, units) -> float:
        """整数単位を元の距離に戻す"""
        return float(units) * float(self.scale)

    def min_positive_distance(self) -> int:
        positive = self.dist[self.dist > 0]
        return int(positive.min()) if positive.size else 0

    def max_distance(self) -> int:
        return int(self.dist.max())

    def with_starts(self, starts) -> "MetricInstance":
        return replace(self, starts=tuple(starts))

    def __repr__(self) -> str:
        return f"MetricInstance(name={self.name!r}, n={self.n}, starts={self.starts}, geometry={self.geometry})"


# --- 検証 ---

def validate_metric(dist) -> ValidationReport:
    """
    距離行列がメトリックの公理（同一性・対称性・三角不等式）を満たすかを検査する。
    違反した公理ごとに最初の証拠（辞書式で最小）と違反件数を報告する。
    正方でない行列、負の値、非有限値は ValidationError。
    """
    raw = np.asarray(dist)
    matrix = raw.astype(np.int64) if raw.dtype.kind in "iu" else raw.astype(float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValidationError(f"distance matrix must be square, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise ValidationError("distance matrix must contain only finite values")
    if np.any(matrix < 0):
        i, j = (int(x) for x in np.argwhere(matrix < 0)[0])
        raise ValidationError(f"negative distance at ({i},{j})")

    n = matrix.shape[0]
    tol = 0 if matrix.dtype.kind in "iu" else 1e-12 * max(1.0, float(matrix.max(initial=0.0)))
    violations = []
    counts = []

    diag = np.argwhere(np.abs(np.diag(matrix)) > tol)
    if diag.size:
        i = int(diag[0][0])
        violations.append(Violation("identity", (i, i), f"d({i},{i}) = {matrix[i, i]} != 0"))
        counts.append(("identity", int(diag.size)))

    asym = np.argwhere(np.abs(matrix - matrix.T) > tol)
    if asym.size:
        i, j = (int(x) for x in asym[0])
        violations.append(Violation("symmetry", (i, j), f"d({i},{j}) = {matrix[i, j]} != d({j},{i}) = {matrix[j, i]}"))
        counts.append(("symmetry", int(len(asym))))

    best = None
    total = 0
    for k in range(n):
        broken = matrix > matrix[:, [k]] + matrix[[k], :] + tol
        hits = np.argwhere(broken)
        if hits.size:
            total += len(hits)
            i, j = (int(x) for x in hits[0])
            if best is None or (i, j, k) < best:
                best = (i, j, k)
    if best is not None:
        i, j, k = best
        violations.append(Violation(
            "triangle", (i, k, j),
            f"d({i},{j}) = {matrix[i, j]} > d({i},{k}) + d({k},{j}) = {matrix[i, k] + matrix[k, j]}",
        ))
        counts.append(("triangle", total))

    return ValidationReport(tuple(violations), tuple(counts))


# --- 有理数と整数単位の変換 ---

def _to_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, str):
        return Fraction(value)
    value = float(value)
    if not math.isfinite(value):
        raise ValidationError(f"non-finite value {value}")
    # 10進表記をそのまま有理数にする（1.01 -> 101/100）
    return Fraction(repr(value))


def _common_unit(values: list[Fraction]) -> Fraction:
    """正の値すべてを整数倍として表せる最大の単位（分子の gcd / 分母の lcm）"""
    positive = [abs(v) for v in values if v != 0]
    if not positive:
        return Fraction(1)
    num = reduce(math.gcd, (v.numerator for v in positive))
    den = reduce(math.lcm, (v.denominator for v in positive))
    return Fraction(num, den)


def _floyd_warshall(units: np.ndarray) -> np.ndarray:
    closed = units.copy()
    for k in range(closed.shape[0]):
        np.minimum(closed, closed[:, [k]] + closed[[k], :], out=closed)
    return closed


# --- 構築 ---

def metric_closure(g: WeightedGraph, starts=(0,), name: str = "", geometry: str = "general") -> MetricInstance:
    """
    重み付きグラフの全点対最短路距離をメトリックにする。
    重みは有理数でよく、共通単位で整数化した上で networkx の Dijkstra で閉包を取る。
    """
    if g.n <= 0:
        raise ValidationError("graph must have at least one vertex")
    weights = [_to_fraction(w) for _, _, w in g.edges]
    if any(w < 0 for w in weights):
        raise ValidationError("edge weights must be nonnegative")
    unit = _common_unit(weights)

    graph = nx.Graph()
    graph.add_nodes_from(range(g.n))
    for (u, v, _), w in zip(g.edges, weights):
        if not (0 <= u < g.n and 0 <= v < g.n):
            raise ValidationError(f"edge ({u},{v}) has an endpoint out of range")
        units = int(w / unit)
        if graph.has_edge(u, v) and graph[u][v]["weight"] <= units:
            continue
        graph.add_edge(u, v, weight=units)

    if not nx.is_connected(graph):
        components = sorted((min(c) for c in nx.connected_components(graph)))
        raise ValidationError(
            f"graph is disconnected: no path between {components[0]} and {components[1]}"
        )

    dist = np.zeros((g.n, g.n), dtype=np.int64)
    for u, lengths in nx.all_pairs_dijkstra_path_length(graph, weight="weight"):
        for v, length in lengths.items():
            dist[u, v] = length
    logger.debug("metric closure of %d vertices, %d edges", g.n, len(g.edges))
    edges = None
    if geometry == "tree":
        edges = tuple(sorted((min(u, v), max(u, v), int(w / unit)) for (u, v, _), w in zip(g.edges, weights)))
    return MetricInstance(dist=dist, starts=tuple(starts), geometry=geometry, scale=unit, name=name, edges=edges)


def as_graph(inst: MetricInstance) -> WeightedGraph:
    """インスタンスを完全グラフとして表す（閉包の冪等性の検査用）"""
    edges = tuple(
        (i, j, inst.scale * int(inst.dist[i, j])) for i in range(inst.n) for j in range(i + 1, inst.n)
    )
    return WeightedGraph(inst.n, edges)


def line_instance(positions, start: int = 0, name: str = "", starts=None) -> MetricInstance:
    """
    実数直線上の点からメトリックを作る。
    位置は有理数として扱い、始点からの差の共通単位で整数化する。
    """
    if len(positions) == 0:
        raise ValidationError("a line instance needs at least one position")
    exact = [_to_fraction(x) for x in positions]
    origin = exact[start]
    unit = _common_unit([x - origin for x in exact])
    units = tuple(int((x - origin) / unit) for x in exact)
    pos = np.asarray(units, dtype=np.int64)
    return MetricInstance(
        dist=np.abs(pos[:, None] - pos[None, :]),
        starts=tuple(starts) if starts is not None else (start,),
        geometry="line",
        scale=unit,
        name=name,
        positions=units,
    )


def tree_instance(n: int, edges, starts=(0,), name: str = "") -> MetricInstance:
    """木の辺リストから木メトリックを作る"""
    graph = nx.Graph()
    graph.add_nodes_from(range(n))
    graph.add_edges_from((u, v) for u, v, _ in edges)
    if not nx.is_tree(graph):
        raise ValidationError("tree geometry requires the edges to form a spanning tree")
    return metric_closure(WeightedGraph(n, tuple(edges)), starts=starts, name=name, geometry="tree")


def euclidean_instance(points, starts=(0,), eps: float = 0.01, name: str = "") -> MetricInstance:
    """平面上の点のユークリッド距離を量子化してメトリックにする"""
    coords = np.asarray(points, dtype=float).reshape(-1, 2)
    inst = quantize(cdist(coords, coords), eps, starts=starts, name=name)
    return replace(inst, geometry="euclidean", points=tuple((float(x), float(y)) for x, y in coords))


def quantize(source, eps: float, starts=(0,), name: str = "") -> MetricInstance:
    """
    有理数の距離を整数単位に量子化する。

    各距離は単位 δ = d_min·eps/n² の倍数に切り上げ、その後 Floyd-Warshall で閉包を取り直す。
    結果の距離 q·δ は元の距離 d に対して d ≤ q·δ ≤ d(1 + eps/n²) を満たす。
    すでに共通単位で厳密に表せ、その値域が切り上げ時と同程度に収まる場合は厳密表現を返す。
    """
    if not eps > 0:
        raise ValidationError(f"eps must be positive, got {eps}")
    if isinstance(source, MetricInstance):
        starts, name = source.starts, name or source.name
        exact = [[source.scale * int(x) for x in row] for row in source.dist]
    else:
        exact = [[_to_fraction(x) for x in row] for row in np.asarray(source, dtype=object)]
    n = len(exact)
    flat = [x for row in exact for x in row]
    if any(x < 0 for x in flat):
        raise ValidationError("distances must be nonnegative")
    positive = [x for x in flat if x > 0]
    if not positive:
        return MetricInstance(dist=np.zeros((n, n), dtype=np.int64), starts=starts, name=name)

    d_min, d_max = min(positive), max(positive)
    delta = d_min * _to_fraction(eps) / (n * n)
    budget = math.ceil(d_max / delta)

    unit = _common_unit(flat)
    if d_max / unit <= budget:
        if isinstance(source, MetricInstance) and unit == source.scale:
            return source
        units = np.array([[int(x / unit) for x in row] for row in exact], dtype=np.int64)
        if isinstance(source, MetricInstance) and source.geometry == "line":
            pos = [source.scale * p for p in source.positions]
            lowest = min(pos)
            return replace(
                source, dist=units, scale=unit,
                positions=tuple(int((p - lowest) / unit) for p in pos),
            )
        return MetricInstance(dist=units, starts=starts, scale=unit, name=name)

    rounded = np.array([[math.ceil(x / delta) for x in row] for row in exact], dtype=np.int64)
    closed = _floyd_warshall(rounded)
    logger.debug("quantized %d vertices with unit %s (max %d units)", n, delta, int(closed.max()))
    return MetricInstance(dist=closed, starts=starts, scale=delta, name=name)


def four_point_instance(eps=Fraction(1, 100)) -> MetricInstance:
    """4点の例: S=0, A=-1-ε, B=1, C=2（始点は S）"""
    eps = _to_fraction(eps)
    return line_instance([0, -1 - eps, 1, 2], start=0, name=f"four-point-eps{eps}")


def turnpoint_instance() -> MetricInstance:
    """同梱の150点直線インスタンス（始点は x = 200）"""
    return load_instance(SHARED_INSTANCES_DIR / "turnpoint150.json")


def circle_instance(n: int, m: int, eps: float = 0.25) -> MetricInstance:
    """
    単位円上の例。始点は角度 0、角度 2πk/n (k = 1..n-2) に1点ずつ、
    角度 2π(n-1-ε)/n に m 個の点が重なる。L∞ で最適な経路は反時計回りに一周して重なった点に最後に着く。
    """
    if n < 3:
        raise ValidationError(f"n must be at least 3, got {n}")
    if m < 1:
        raise ValidationError(f"m must be at least 1, got {m}")
    if not 0 < eps < 1:
        raise ValidationError(f"eps must be in (0, 1), got {eps}")
    angles = [0.0] + [2 * math.pi * k / n for k in range(1, n - 1)] + [2 * math.pi * (n - 1 - eps) / n] * m
    points = [(math.cos(a), math.sin(a)) for a in angles]
    return euclidean_instance(points, name=f"circle-n{n}-m{m}")


def generate_instance(seed: int, n: int, kind: str = "random_metric") -> MetricInstance:
    """
    シードから決定的にインスタンスを生成する。
    random_metric はランダムな重み（1〜9）の完全グラフの閉包。
    """
    if n < 1:
        raise ValidationError(f"n must be at least 1, got {n}")
    if kind not in GENERATOR_KINDS:
        raise ValidationError(f"unknown instance kind {kind!r}")
    rng = np.random.default_rng(seed)
    name = f"{kind}-n{n}-seed{seed}"

    if kind == "random_metric":
        weights = rng.integers(1, 10, size=(n, n))
        edges = tuple((i, j, int(weights[i, j])) for i in range(n) for j in range(i + 1, n))
        return metric_closure(WeightedGraph(n, edges), name=name)
    if kind == "line":
        positions = np.sort(rng.integers(0, 10 * n, size=n))
        start = int(rng.integers(n))
        pos = positions.astype(np.int64)
        return MetricInstance(
            dist=np.abs(pos[:, None] - pos[None, :]), starts=(start,), geometry="line",
            name=name, positions=tuple(int(x) for x in pos),
        )
    if kind == "tree":
        edges = tuple((int(rng.integers(v)), v, int(rng.integers(1, 10))) for v in range(1, n))
        return tree_instance(n, edges, name=name)
    points = rng.integers(0, 20, size=(n, 2))
    return euclidean_instance(points, name=name)


def instance_checksum(inst: MetricInstance) -> str:
    return Utils.checksum(instance_to_json(inst))


# --- JSON 入出力 ---

def instance_to_json(inst: MetricInstance) -> dict:
    """正規形の JSON（頂点 0..n-1、行優先の行列）"""
    data = {"name": inst.name, "n": inst.n, "starts": list(inst.starts), "geometry": inst.geometry}
    if inst.geometry == "line":
        data["positions"] = list(inst.positions)
    elif inst.geometry == "tree" and inst.edges is not None:
        data["edges"] = [list(e) for e in inst.edges]
    else:
        if inst.geometry == "euclidean" and inst.points is not None:
            data["points"] = [list(p) for p in inst.points]
        data["dist"] = inst.dist.tolist()
    data["scale"] = {"num": inst.scale.numerator, "den": inst.scale.denominator}
    return data


def _require(condition: bool, message: str, pointer: str) -> None:
    if not condition:
        raise SchemaError(message, pointer)


def _is_int(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value) -> bool:
    return (isinstance(value, (int, float)) and not isinstance(value, bool)
            and math.isfinite(value))


def instance_from_json(data) -> MetricInstance:
    """スキーマを検査して MetricInstance を作る。違反は JSON ポインタ付きの SchemaError"""
    _require(isinstance(data, dict), "instance must be a JSON object", "/")
    n = data.get("n")
    _require(_is_int(n), "n must be an integer", "/n")
    _require(n >= 1, "vertex list must not be empty", "/n")

    starts = data.get("starts", [0])
    _require(isinstance(starts, list) and len(starts) > 0, "starts must be a nonempty list", "/starts")
    for i, s in enumerate(starts):
        _require(_is_int(s) and 0 <= s < n, f"start must be a vertex index in [0, {n})", f"/starts/{i}")

    geometry = data.get("geometry", "general")
    _require(geometry in GEOMETRIES, f"geometry must be one of {', '.join(GEOMETRIES)}", "/geometry")
    name = data.get("name", "")
    _require(isinstance(name, str), "name must be a string", "/name")

    scale_data = data.get("scale", {"num": 1, "den": 1})
    _require(isinstance(scale_data, dict), "scale must be an object", "/scale")
    num, den = scale_data.get("num"), scale_data.get("den")
    _require(_is_int(num) and num > 0, "scale numerator must be a positive integer", "/scale/num")
    _require(_is_int(den) and den > 0, "scale denominator must be a positive integer", "/scale/den")
    scale = Fraction(num, den)

    if geometry == "line":
        positions = data.get("positions")
        _require(isinstance(positions, list), "line geometry requires positions", "/positions")
        _require(len(positions) == n, f"expected {n} positions", "/positions")
        for i, x in enumerate(positions):
            _require(_is_number(x), "position must be a number", f"/positions/{i}")
        if all(_is_int(x) for x in positions):
            pos = np.asarray(positions, dtype=np.int64)
            return MetricInstance(
                dist=np.abs(pos[:, None] - pos[None, :]), starts=tuple(starts), geometry="line",
                scale=scale, name=name, positions=tuple(positions),
            )
        inst = line_instance([_to_fraction(x) * scale for x in positions], start=starts[0], name=name, starts=starts)
        return inst

    if geometry == "tree":
        edges = data.get("edges")
        _require(isinstance(edges, list), "tree geometry requires edges", "/edges")
        parsed = []
        for i, e in enumerate(edges):
            _require(isinstance(e, list) and len(e) == 3, "edge must be [u, v, w]", f"/edges/{i}")
            u, v, w = e
            _require(_is_int(u) and 0 <= u < n, "edge endpoint out of range", f"/edges/{i}/0")
            _require(_is_int(v) and 0 <= v < n, "edge endpoint out of range", f"/edges/{i}/1")
            _require(_is_int(w) and w >= 0, "edge weight must be a nonnegative integer", f"/edges/{i}/2")
            parsed.append((u, v, w))
        inst = tree_instance(n, parsed, starts=tuple(starts), name=name)
        return replace(inst, scale=scale * inst.scale)

    dist = data.get("dist")
    _require(isinstance(dist, list), f"{geometry} geometry requires dist", "/dist")
    _require(len(dist) == n, f"expected {n} rows", "/dist")
    for i, row in enumerate(dist):
        _require(isinstance(row, list) and len(row) == n, f"expected {n} columns", f"/dist/{i}")
        for j, x in enumerate(row):
            _require(_is_int(x), "distance must be an integer", f"/dist/{i}/{j}")
            _require(x >= 0, "distance must be nonnegative", f"/dist/{i}/{j}")
    report = validate_metric(np.asarray(dist, dtype=np.int64))
    if not report.ok:
        raise ValidationError(
            f"not a metric: {', '.join(sorted(report.axioms))} violated", report=report
        )
    points = None
    if geometry == "euclidean" and "points" in data:
        raw = data["points"]
        _require(isinstance(raw, list) and len(raw) == n, f"expected {n} points", "/points")
        for i, p in enumerate(raw):
            _require(isinstance(p, list) and len(p) == 2 and all(_is_number(x) for x in p),
                     "point must be [x, y]", f"/points/{i}")
        points = tuple((float(x), float(y)) for x, y in raw)
    return MetricInstance(
        dist=np.asarray(dist, dtype=np.int64), starts=tuple(starts), geometry=geometry,
        scale=scale, name=name, points=points,
    )


def load_instance(path: str | Path) -> MetricInstance:
    """インスタンス JSON を読み込む"""
    return instance_from_json(Utils.read_json(path))


def save_instance(inst: MetricInstance, path: str | Path) -> None:
    """インスタンスを正規形の JSON で保存する"""
    Utils.write_json(path, instance_to_json(inst))
