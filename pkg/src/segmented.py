# -*- coding: utf-8 -*-
"""
segmented.py: 締切付きの巡回（segmented-TSP）と、Lp TSP からの動的計画法による帰着

segmented_feasible は「時刻 t_i までに n_i 個以上の異なる頂点を訪れる」経路があるかを
部分集合 DP（n ≤ SEGMENTED_BITMASK_CAP）または直線の区間 DP で厳密に判定する。
reduce_lp_tsp は予算 λ_i ごとの部分巡回と原点での待機からなる経路を、
segmented-TSP の呼び出しだけを使って表 D[i][d] で探す。
"""
import itertools
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .constants import REDUCTION_WORK_CAP, get_cap
from .cover import base_unit
from .errors import CapacityError, SchemaError, StructuralError, ValidationError, check_cap
from .exact import line_interval_dp, shortest_hamiltonian_path, subset_path_table, trace_path
from .routes import Route, lp_norm, parse_p, partial_times, power_sum, shortcut, visit_times
from .utils import Utils

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SegmentedSpec:
    """(n_i, t_i) の列。n_i も t_i も非減少、t_i は整数単位"""
    segments: tuple[tuple[int, int], ...]

    def __post_init__(self):
        segments = tuple((int(n), int(t)) for n, t in self.segments)
        object.__setattr__(self, "segments", segments)
        for idx, (count, deadline) in enumerate(segments):
            if count < 0 or deadline < 0:
                raise ValidationError(f"segment {idx} has a negative entry ({count}, {deadline})")
        for idx in range(1, len(segments)):
            if segments[idx][0] < segments[idx - 1][0]:
                raise ValidationError(f"vertex counts must be nondecreasing (segment {idx})")
            if segments[idx][1] < segments[idx - 1][1]:
                raise ValidationError(f"deadlines must be nondecreasing (segment {idx})")

    @property
    def k(self) -> int:
        return len(self.segments)

    def count_deadlines(self, n: int) -> np.ndarray:
        """deadline[c] = c 個目の頂点に到着すべき時刻（制約がなければ ∞）"""
        if self.segments and self.segments[-1][0] > n:
            raise ValidationError(f"spec asks for {self.segments[-1][0]} vertices but the instance has {n}")
        deadline = np.full(n + 1, np.inf)
        for count, t in self.segments:
            deadline[1:count + 1] = np.minimum(deadline[1:count + 1], t)
        return deadline

    def satisfied_by(self, route: Route, inst) -> bool:
        """経路の c 個目の訪問時刻がすべての締切以内か"""
        times = sorted(partial_times(route.order, inst).values())
        return all(count <= len(times) and (count == 0 or times[count - 1] <= t)
                   for count, t in self.segments)

    def to_json(self) -> dict:
        return {"segments": [list(pair) for pair in self.segments]}


def segmented_feasible(inst, spec: SegmentedSpec, start: int | None = None) -> Route | None:
    """
    締切をすべて満たす経路を返す。満たせなければ None。
    直線では区間 DP、それ以外は (訪問集合, 最後の頂点) ごとの最短長を持つ部分集合 DP。
    """
    s = inst.start if start is None else start
    deadlines = spec.count_deadlines(inst.n)
    if inst.geometry == "line" and inst.positions is not None:
        check_cap("LINE_DP_CAP", get_cap("LINE_DP_CAP"), inst.n)
        order = line_interval_dp(inst, s, np.ones(inst.n), deadlines)
        return None if order is None else Route(s, order)

    check_cap("SEGMENTED_BITMASK_CAP", get_cap("SEGMENTED_BITMASK_CAP"), inst.n)
    dp, parent = subset_path_table(inst.dist, s, count_deadlines=deadlines)
    full = (1 << inst.n) - 1
    last = int(np.argmin(dp[full]))
    if not np.isfinite(dp[full, last]):
        return None
    return Route(s, tuple(trace_path(parent, full, last)))


def brute_force_segmented(inst, spec: SegmentedSpec, start: int | None = None) -> Route | None:
    """順列の全列挙による判定（辞書式で最初に見つかった経路）"""
    s = inst.start if start is None else start
    check_cap("PERMUTATION_CAP", get_cap("PERMUTATION_CAP"), inst.n)
    spec.count_deadlines(inst.n)
    others = [v for v in range(inst.n) if v != s]
    for perm in itertools.permutations(others):
        route = Route(s, (s,) + perm)
        if spec.satisfied_by(route, inst):
            return route
    return None


def load_segmented_spec(path) -> SegmentedSpec:
    """{"segments": [[n_i, t_i], ...]} 形式の JSON を読む"""
    data = Utils.read_json(path)
    if not isinstance(data, dict):
        raise SchemaError("expected an object", "/")
    if "segments" not in data:
        raise SchemaError("missing required key 'segments'", "/segments")
    segments = data["segments"]
    if not isinstance(segments, list):
        raise SchemaError("expected an array", "/segments")
    pairs = []
    for idx, pair in enumerate(segments):
        if not isinstance(pair, list) or len(pair) != 2:
            raise SchemaError("expected a [count, deadline] pair", f"/segments/{idx}")
        for pos, value in enumerate(pair):
            if isinstance(value, bool) or not isinstance(value, int):
                raise SchemaError("expected an integer", f"/segments/{idx}/{pos}")
        pairs.append(tuple(pair))
    try:
        return SegmentedSpec(tuple(pairs))
    except ValidationError as e:
        raise SchemaError(str(e), "/segments") from e


# --- 帰着 ---

@dataclass(frozen=True)
class SegmentsNeeded:
    k: int
    work: int
    within_budget: bool


def segments_needed(p, eps: float, n: int = 10) -> SegmentsNeeded:
    """⌈(3p)^p(1+ε)/ε²⌉（少なくとも1）と、n^k の作業量が上限内か"""
    p = parse_p(p)
    if math.isinf(p):
        raise ValidationError("the segment count is defined for finite p")
    if eps <= 0:
        raise ValidationError(f"eps must be positive, got {eps}")
    k = max(1, math.ceil((3 * p) ** p * (1 + eps) / eps ** 2 - 1e-9))
    work = max(n, 1) ** k
    return SegmentsNeeded(k, work, work <= REDUCTION_WORK_CAP)


def _compositions(total: int, parts: int):
    """total を parts 個の非負整数に分ける全通り"""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@dataclass
class ReductionTable:
    """
    剰余 j の表。D[i][d] は予算 λ_i までに d 頂点を訪れるときの Σ T^p の上界（整数単位）。
    parents[(i, d)] = (d', (m_1, ..., m_k), 仕様) で経路を復元する。
    """
    eps: float
    k: int
    j: int
    lambdas: tuple[float, ...]
    zero_count: int
    D: np.ndarray
    parents: dict = field(default_factory=dict)

    @property
    def rows(self) -> int:
        return self.D.shape[0]

    def is_monotone(self) -> bool:
        """d を固定すると有限な値は i について増えない（有限な範囲は広がる）"""
        for i in range(1, self.rows):
            prev, cur = self.D[i - 1], self.D[i]
            finite = np.isfinite(prev)
            if not np.all(np.isfinite(cur[finite])):
                return False
            if np.any(cur[finite] > prev[finite] * (1 + 1e-12) + 1e-9):
                return False
        return True


class _SegmentedOracle:
    """segmented-TSP の呼び出しを仕様ごとにメモ化し、呼び出し回数を数える"""

    def __init__(self, inst, solver, limit: int):
        self.inst = inst
        self.solver = solver
        self.limit = limit
        self.work = 0
        self.calls = 0
        self._memo = {}

    def charge(self, amount: int = 1) -> None:
        self.work += amount
        if self.work > self.limit:
            raise CapacityError("REDUCTION_WORK_CAP", self.limit, self.work)

    def __call__(self, spec: SegmentedSpec):
        key = spec.segments
        if key not in self._memo:
            self.charge()
            self.calls += 1
            self._memo[key] = self.solver(self.inst, spec)
        return self._memo[key]


def _floor(value: float) -> int:
    return int(math.floor(value + 1e-9))


def _segment_spec(lam_prev: float, lam: float, eps: float, k: int, d_prev: int, ms) -> SegmentedSpec:
    """(d', λ_{i-1}), (d' + m_1, λ_i(1+ε)^{1-k}), …, (d' + Σm, λ_i)（部分巡回の出発からの時刻）"""
    pairs = [(d_prev, _floor(lam_prev))]
    count = d_prev
    for r, m in enumerate(ms, start=1):
        count += m
        pairs.append((count, _floor(lam * (1 + eps) ** (r - k))))
    return SegmentedSpec(tuple(pairs))


def _fill_table(inst, p: float, eps: float, k: int, j: int, oracle: _SegmentedOracle) -> ReductionTable:
    n = inst.n
    s = inst.start
    c = (1 + eps) ** k
    base = base_unit(inst)
    horizon = shortest_hamiltonian_path(inst, s) if inst.geometry != "line" else _line_horizon(inst)
    lambdas = []
    i = 0
    while True:
        lam = base * (1 + eps) ** (-j) * c ** i
        lambdas.append(lam)
        if lam >= horizon:
            break
        i += 1

    zero_count = sum(1 for v in range(n) if inst.d(s, v) == 0)
    D = np.full((len(lambdas), n + 1), np.inf)
    previous = np.full(n + 1, np.inf)
    previous[1:zero_count + 1] = 0.0
    parents = {}
    for i, lam in enumerate(lambdas):
        lam_prev = lambdas[i - 1] if i else 0.0
        start_time = 3 * lam_prev
        charges = [(start_time + lam * (1 + eps) ** (r - k)) ** p for r in range(1, k + 1)]
        row = np.full(n + 1, np.inf)
        for d_prev in range(1, n + 1):
            if not np.isfinite(previous[d_prev]):
                continue
            for total in range(0, n - d_prev + 1):
                for ms in _compositions(total, k):
                    oracle.charge()
                    value = previous[d_prev] + sum(m * w for m, w in zip(ms, charges))
                    d = d_prev + total
                    if value >= row[d]:
                        continue
                    spec = _segment_spec(lam_prev, lam, eps, k, d_prev, ms)
                    if oracle(spec) is None:
                        continue
                    row[d] = value
                    parents[(i, d)] = (d_prev, ms, spec)
        D[i] = row
        previous = row
    logger.debug("reduction table k=%d j=%d: %d rows, %d segmented calls", k, j, len(lambdas), oracle.calls)
    return ReductionTable(eps, k, j, tuple(lambdas), zero_count, D, parents)


def _line_horizon(inst) -> int:
    """直線上で全頂点を訪れる最短の長さ（片側へ行ってから反対側へ）"""
    xs = [inst.positions[v] - inst.positions[inst.start] for v in range(inst.n)]
    lo, hi = min(xs + [0]), max(xs + [0])
    return int(min(2 * hi - lo, hi - 2 * lo))


def _reconstruct(inst, table: ReductionTable, oracle: _SegmentedOracle):
    """
    親ポインタから部分巡回を集め、原点での待機を含めて再模擬する。
    部分巡回 i は時刻 3λ_{i-1} に出発し、主張した締切と 3λ_i までの帰還を確かめる。
    """
    s = inst.start
    n = inst.n
    last_row = table.rows - 1
    if not np.isfinite(table.D[last_row, n]):
        raise StructuralError("reduction table never reaches all vertices")
    chain = []
    d = n
    for i in range(last_row, -1, -1):
        d_prev, ms, spec = table.parents[(i, d)]
        chain.append((i, d_prev, ms, spec))
        d = d_prev
    chain.reverse()

    zero = [v for v in range(n) if v != s and inst.d(s, v) == 0]
    walk = [s, *zero]
    first = {v: 0 for v in walk}
    clock = 0.0
    for i, d_prev, ms, spec in chain:
        if sum(ms) == 0:
            continue
        lam_prev = table.lambdas[i - 1] if i else 0.0
        lam = table.lambdas[i]
        witness = oracle(spec)
        prefix = list(witness.order[:d_prev + sum(ms)])
        depart = max(clock, 3 * lam_prev)
        local = partial_times(prefix + [s], inst)
        for v in prefix:
            first.setdefault(v, depart + local[v])
        back = depart + partial_times(prefix, inst)[prefix[-1]] + inst.d(prefix[-1], s)
        if back > 3 * lam + 1e-9:
            raise StructuralError(f"subtour {i} returns at {back:.6g} after 3·λ_{i} = {3 * lam:.6g}")
        clock = back
        walk.extend(prefix[1:] + [s])
        ordered = sorted(first.values())
        for count, deadline in spec.segments[1:]:
            if count and (count > len(ordered) or ordered[count - 1] > depart + deadline + 1e-9):
                raise StructuralError(f"subtour {i} misses its claim of {count} vertices by {depart + deadline:.6g}")
    return shortcut(walk, inst)


@dataclass(frozen=True)
class ReductionResult:
    """最良の経路、その目的値と上界（元の距離の単位）、採用した (k, ε, j) と表"""
    route: Route
    objective: float
    bound: float
    k: int
    eps: float
    residue: int
    table: ReductionTable
    calls: int

    def to_json(self) -> dict:
        return {
            "route": self.route.to_json(),
            "objective": self.objective,
            "bound": self.bound,
            "k": self.k,
            "eps": self.eps,
            "residue": self.residue,
            "segmented_calls": self.calls,
        }


def _eps_for(k: int, eps: float | None) -> float | None:
    """c = (1+ε)^k ≥ 3 となる ε。指定がなければ 3^{1/k} - 1"""
    if eps is None:
        return 3 ** (1.0 / k) - 1
    return eps if (1 + eps) ** k >= 3 - 1e-12 else None


def reduce_lp_tsp(inst, p, eps: float | None = None, k: int = 2, seg_solver=None) -> ReductionResult:
    """
    k' = 1..k とすべての剰余 j で表を作り、実際の目的値が最小の経路を返す。
    上界 (D[最後][n])^{1/p} は返す経路について常に成り立つことを確かめる。
    """
    p = parse_p(p)
    if math.isinf(p):
        raise ValidationError("the reduction is defined for finite p")
    if k < 1:
        raise ValidationError(f"k must be at least 1, got {k}")
    if eps is not None and eps <= 0:
        raise ValidationError(f"eps must be positive, got {eps}")
    if eps is not None and (1 + eps) ** k < 3 - 1e-12:
        raise ValidationError(f"(1+eps)^k = {(1 + eps) ** k:.6g} must be at least 3")
    oracle = _SegmentedOracle(inst, seg_solver or segmented_feasible, REDUCTION_WORK_CAP)
    scale = float(inst.scale)

    best = None
    for k_used in range(1, k + 1):
        eps_used = _eps_for(k_used, eps)
        if eps_used is None:
            continue
        for j in range(k_used):
            table = _fill_table(inst, p, eps_used, k_used, j, oracle)
            route = _reconstruct(inst, table, oracle)
            cost = power_sum(visit_times(route, inst), p)
            bound_units = float(table.D[-1, inst.n])
            if cost > bound_units * (1 + 1e-9) + 1e-9:
                raise StructuralError(f"reduction route cost {cost} exceeds its table bound {bound_units}")
            objective = lp_norm(visit_times(route, inst), p)
            bound = bound_units ** (1.0 / p) * scale
            if best is None or objective < best.objective - 1e-12 * max(1.0, best.objective):
                best = ReductionResult(route, objective, bound, k_used, eps_used, j, table, 0)
    logger.info("reduction (k<=%d): objective %.6g, bound %.6g, %d segmented calls",
                k, best.objective, best.bound, oracle.calls)
    return replace(best, calls=oracle.calls)


# --- 待機つき巡回の損失 ---

def _lambdas_for(base: float, eps: float, k: int, j: int, top: float) -> list[float]:
    c = (1 + eps) ** k
    lambdas = []
    i = 0
    while True:
        lam = base * (1 + eps) ** (-j) * c ** i
        lambdas.append(lam)
        if lam >= top:
            return lambdas
        i += 1


def opt_prime_profile(route: Route, inst, eps: float, k: int, j: int) -> tuple[float, ...]:
    """
    経路を予算 λ_i ごとの部分巡回に分け、部分巡回 i を時刻 3λ_{i-1} に出発させたときの訪問時刻。
    λ_i 以下で初めて訪れる頂点 v は T_v + 3λ_{i-1} に訪れる（λ_{-1} = 0）。
    """
    if (1 + eps) ** k < 3 - 1e-12:
        raise ValidationError("(1+eps)^k must be at least 3")
    times = visit_times(route, inst).per_vertex
    lambdas = _lambdas_for(base_unit(inst), eps, k, j, max(times))
    out = []
    for t in times:
        i = next(idx for idx, lam in enumerate(lambdas) if t <= lam + 1e-9)
        out.append(t + (3 * lambdas[i - 1] if i else 0.0))
    return tuple(out)


@dataclass(frozen=True)
class OptPrimeLoss:
    """剰余ごとの ‖T'‖_p^p / ‖T‖_p^p、その平均と損失の上界 1 + (3p)^p(1+ε)/(kε)"""
    ratios: tuple[float, ...]
    mean: float
    best: float
    bound: float


def opt_prime_loss(inst, p, eps: float, k: int, route: Route) -> OptPrimeLoss:
    p = parse_p(p)
    if math.isinf(p):
        raise ValidationError("the loss ratio is defined for finite p")
    original = sum(float(t) ** p for t in visit_times(route, inst).per_vertex)
    if original == 0:
        return OptPrimeLoss(tuple(1.0 for _ in range(k)), 1.0, 1.0, 1.0)
    ratios = tuple(
        sum(t ** p for t in opt_prime_profile(route, inst, eps, k, j)) / original for j in range(k)
    )
    bound = 1 + (3 * p) ** p * (1 + eps) / (k * eps)
    return OptPrimeLoss(ratios, float(np.mean(ratios)), min(ratios), bound)
