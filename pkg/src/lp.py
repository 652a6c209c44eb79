# -*- coding: utf-8 -*-
"""
lp.py: 時間添字付きの木 LP 緩和と乱択丸め

- build_lp / solve_lp: 木の列を明示的に列挙した LP を改訂単体法で解く
- lp_round / amplify: 幾何的な時刻 t_j = base·c^{u+j} で木を z/η の分布から引いて巡回する
- estimate_coverage / latency_terms: 未訪問確率の漸化式と遅延の関係を確かめるための量
- multi_constant ほか: 近似比の定数
"""
import bisect
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog, minimize_scalar

from .constants import LP_TOLERANCE, LP_VEHICLE_CAP, ROUNDING_ITERATION_CAP
from .cover import base_unit, f_p
from .errors import StructuralError, ValidationError, check_cap
from .exact import all_subset_trees
from .routes import (
    KTree,
    MultiRoute,
    lp_norm,
    multi_visit_times,
    parse_p,
    shortcut,
    walk_length,
)
from .simplex import OPTIMAL, revised_simplex

logger = logging.getLogger(__name__)

THETA = 1.152


# --- 時刻の格子 ---

@dataclass(frozen=True)
class TimeGrid:
    """整数単位の時刻の狭義増加列。どの構成でも 0 を含む"""
    times: tuple[int, ...]

    def __post_init__(self):
        times = tuple(int(t) for t in self.times)
        object.__setattr__(self, "times", times)
        if not times or times[0] != 0:
            raise ValidationError("time grid must start at 0")
        if any(a >= b for a, b in zip(times, times[1:])):
            raise ValidationError("time grid must be strictly increasing")

    @classmethod
    def full(cls, horizon: int) -> "TimeGrid":
        return cls(tuple(range(int(horizon) + 1)))

    @classmethod
    def breakpoints(cls, lengths) -> "TimeGrid":
        """列の集合が変わる時刻（木の長さ）だけを並べた格子"""
        return cls(tuple(sorted({0, *(int(x) for x in lengths)})))

    @classmethod
    def geometric(cls, base: float, c: float, u: float, horizon: int) -> "TimeGrid":
        """⌈base·c^{u+j}⌉ を horizon 以上になるまで"""
        if c <= 1 or base <= 0:
            raise ValidationError("geometric grid needs base > 0 and c > 1")
        times = {0}
        j = 0
        while True:
            t = math.ceil(base * c ** (u + j) - 1e-9)
            times.add(t)
            if t >= horizon:
                break
            j += 1
        return cls(tuple(sorted(times)))

    def merge(self, other: "TimeGrid") -> "TimeGrid":
        return TimeGrid(tuple(sorted(set(self.times) | set(other.times))))

    def index_at(self, t: float) -> int:
        """t 以下で最大の格子時刻の添字（なければ -1）"""
        return bisect.bisect_right(self.times, t + 1e-9) - 1

    @property
    def horizon(self) -> int:
        return self.times[-1]

    def __len__(self) -> int:
        return len(self.times)


@dataclass(frozen=True)
class TreeColumn:
    """車両 vehicle が時刻 times[t_index] に使える木（長さ ≤ η·t、包含極大）"""
    vehicle: int
    t_index: int
    time: int
    vertices: tuple[int, ...]
    length: int
    edges: tuple[tuple[int, int, int], ...]

    def tree(self, root: int) -> KTree:
        return KTree(root, self.vertices, self.edges, self.length)


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """
    min cᵀ(x, z)  s.t.  A_ub (x, z) ≤ b_ub。
    x の列は (車両, 時刻, 頂点) の順で先頭に並び、その後に z の列が続く。
    目的関数の係数は t^p / cost_scale に正規化してある。
    """
    inst: object
    p: float
    starts: tuple[int, ...]
    grid: TimeGrid
    eta: float
    columns: tuple[TreeColumn, ...]
    groups: dict
    c: np.ndarray
    A_ub: np.ndarray
    b_ub: np.ndarray
    cost_scale: float
    row_kinds: tuple[str, ...] = field(repr=False)

    @property
    def K(self) -> int:
        return len(self.starts)

    @property
    def n_x(self) -> int:
        return self.K * len(self.grid) * self.inst.n

    def x_index(self, i: int, g: int, v: int) -> int:
        return (i * len(self.grid) + g) * self.inst.n + v

    @property
    def shape(self) -> tuple[int, int]:
        return self.A_ub.shape


def _maximal(masks: list[int]) -> list[int]:
    """包含極大な集合だけを残す（要素数の多い順に見る）"""
    kept = []
    for mask in sorted(masks, key=lambda m: (-bin(m).count("1"), m)):
        if not any(big & mask == mask for big in kept):
            kept.append(mask)
    return kept


def _vertices(mask: int, n: int) -> tuple[int, ...]:
    return tuple(v for v in range(n) if (mask >> v) & 1)


def build_lp(inst, p, K: int | None = None, grid: TimeGrid | None = None, eta: float = 1.0) -> LinearProgram:
    """
    被覆・容量・整合の3種の制約を持つ LP を組み立てる。
    列は各車両・各時刻について、始点を含み木の長さ ≤ η·t となる包含極大な部分集合。
    格子を省略すると木の長さの切れ目（全頂点を覆える最初の時刻まで）を使う。
    """
    p = parse_p(p)
    if math.isinf(p):
        raise ValidationError("the LP relaxation needs a finite p")
    if eta < 1:
        raise ValidationError(f"eta must be at least 1, got {eta}")
    K = inst.K if K is None else int(K)
    if not 1 <= K <= inst.K:
        raise ValidationError(f"K must be in [1, {inst.K}] for this instance, got {K}")
    check_cap("LP_VEHICLE_CAP", LP_VEHICLE_CAP, K)
    trees = all_subset_trees(inst)
    n = inst.n
    starts = tuple(inst.starts[:K])
    full_mask = (1 << n) - 1

    horizon = math.ceil(trees[full_mask][0] / eta - 1e-9)
    if grid is None:
        lengths = {
            math.ceil(length / eta - 1e-9)
            for mask, (length, _) in trees.items()
            if any((mask >> s) & 1 for s in starts)
        }
        grid = TimeGrid.breakpoints(t for t in lengths if t <= horizon)
    if grid.horizon < horizon:
        raise ValidationError(f"time grid ends at {grid.horizon} before the covering horizon {horizon}")

    columns = []
    groups = {}
    for i, s in enumerate(starts):
        candidates = [m for m in trees if (m >> s) & 1]
        for g, t in enumerate(grid.times):
            feasible = [m for m in candidates if trees[m][0] <= eta * t + 1e-9]
            chosen = sorted(_maximal(feasible), key=lambda m: _vertices(m, n))
            idx = []
            for mask in chosen:
                length, edges = trees[mask]
                idx.append(len(columns))
                columns.append(TreeColumn(i, g, t, _vertices(mask, n), length, edges))
            groups[(i, g)] = tuple(idx)

    G = len(grid)
    n_x = K * G * n
    n_vars = n_x + len(columns)
    n_rows = n + K * G + K * G * n
    A = np.zeros((n_rows, n_vars))
    b = np.zeros(n_rows)
    kinds = []

    def xi(i, g, v):
        return (i * G + g) * n + v

    row = 0
    for v in range(n):
        for i in range(K):
            for g in range(G):
                A[row, xi(i, g, v)] = -1.0
        b[row] = -1.0
        kinds.append("coverage")
        row += 1
    for i in range(K):
        for g in range(G):
            for col in groups[(i, g)]:
                A[row, n_x + col] = 1.0
            b[row] = eta
            kinds.append("capacity")
            row += 1
    for i in range(K):
        for g in range(G):
            for v in range(n):
                for h in range(g + 1):
                    A[row, xi(i, h, v)] = 1.0
                for col in groups[(i, g)]:
                    if v in columns[col].vertices:
                        A[row, n_x + col] = -1.0
                kinds.append("consistency")
                row += 1

    powers = np.array([float(t) ** p for t in grid.times])
    cost_scale = float(powers.max()) if powers.max() > 0 else 1.0
    c = np.zeros(n_vars)
    for i in range(K):
        for g in range(G):
            c[xi(i, g, 0):xi(i, g, 0) + n] = powers[g] / cost_scale

    logger.debug("LP for n=%d K=%d: %d grid times, %d columns, %d rows", n, K, G, len(columns), n_rows)
    return LinearProgram(inst, p, starts, grid, float(eta), tuple(columns), groups, c, A, b, cost_scale, tuple(kinds))


# --- 求解 ---

@dataclass(frozen=True, eq=False)
class FractionalSolution:
    """LP の最適解。x は (車両, 格子時刻, 頂点) の配列、z は列ごとの値。objective は整数単位の Σ t^p x"""
    lp: LinearProgram
    x: np.ndarray
    z: np.ndarray
    objective: float
    iterations: int = 0

    @property
    def eta(self) -> float:
        return self.lp.eta

    @property
    def p(self) -> float:
        return self.lp.p

    @property
    def norm(self) -> float:
        """objective^{1/p} を元の距離の単位で"""
        return max(self.objective, 0.0) ** (1.0 / self.p) * float(self.lp.inst.scale)

    def y(self, v: int, g: int, i: int) -> float:
        """時刻 grid[g] までに車両 i が v を覆う量（x の累積和）"""
        if g < 0:
            return 0.0
        return float(self.x[i, :g + 1, v].sum())

    def column_weights(self, i: int, g: int) -> tuple[tuple[int, ...], np.ndarray]:
        cols = self.lp.groups[(i, g)] if g >= 0 else ()
        return cols, self.z[list(cols)] if cols else np.zeros(0)

    def max_violation(self) -> float:
        """3種の制約の最大違反量"""
        full = np.concatenate([self.x.ravel(), self.z])
        slack = self.lp.A_ub @ full - self.lp.b_ub
        return float(max(slack.max(initial=0.0), -full.min(initial=0.0)))

    def to_json(self) -> dict:
        grid = self.lp.grid.times
        xs = [
            {"vehicle": int(i), "time": grid[g], "vertex": int(v), "value": float(self.x[i, g, v])}
            for i, g, v in zip(*np.nonzero(self.x > 1e-9))
        ]
        zs = [
            {
                "vehicle": col.vehicle,
                "time": col.time,
                "vertices": list(col.vertices),
                "length": col.length,
                "value": float(self.z[k]),
            }
            for k, col in enumerate(self.lp.columns)
            if self.z[k] > 1e-9
        ]
        return {
            "p": self.p,
            "eta": self.eta,
            "K": self.lp.K,
            "objective": self.objective,
            "norm": self.norm,
            "grid": list(grid),
            "x": xs,
            "z": zs,
        }


def solve_lp(lp: LinearProgram, rule: str = "bland") -> FractionalSolution:
    """改訂単体法で解き、制約の充足を許容誤差 LP_TOLERANCE で確かめる"""
    result = revised_simplex(lp.c, lp.A_ub, lp.b_ub, rule=rule)
    if result.status != OPTIMAL:
        raise StructuralError(f"LP from a valid build is {result.status}")
    n_x = lp.n_x
    x = result.x[:n_x].reshape(lp.K, len(lp.grid), lp.inst.n)
    z = result.x[n_x:]
    sol = FractionalSolution(lp, x, z, result.objective * lp.cost_scale, result.iterations)
    violation = sol.max_violation()
    if violation > LP_TOLERANCE:
        raise StructuralError(f"LP solution violates a constraint by {violation:.3g}")
    logger.info("LP solved with %s rule in %d pivots: objective %.6g", rule, result.iterations, sol.objective)
    return sol


def reference_objective(lp: LinearProgram) -> float:
    """HiGHS による独立な再求解（整数単位の Σ t^p x）"""
    res = linprog(lp.c, A_ub=lp.A_ub, b_ub=lp.b_ub, bounds=(0, None), method="highs")
    if not res.success:
        raise StructuralError(f"reference LP solve failed: {res.message}")
    return float(res.fun) * lp.cost_scale


# --- 乱択丸め ---

@dataclass(frozen=True)
class RoundingDiagnostics:
    """
    反復 j の後に頂点 v が未訪問である確率の推定 p_hat[j, v] と、
    LP から厳密に計算した w[j, v] = 1 - Σ_i y_{v,t_j,i}。
    """
    u: float
    times: tuple[float, ...]
    p_hat: np.ndarray
    stderr: np.ndarray
    w: np.ndarray
    samples: int
    eta: float
    K: int

    def recurrence_violations(self, slack: float = 3.0) -> list[tuple[int, int, float, float]]:
        """
        1台: p_j ≤ w_j/η + (1 - 1/η) p_{j-1}、複数台: p_j ≤ (1 - e^{-1/η}) w_j + e^{-1/η} p_{j-1}。
        p_{-1} = 1。右辺に slack·stderr を足しても破れる (v, j, 左辺, 右辺) を返す。
        """
        if self.K == 1:
            a, b = 1.0 / self.eta, 1.0 - 1.0 / self.eta
        else:
            b = math.exp(-1.0 / self.eta)
            a = 1.0 - b
        out = []
        for j in range(self.p_hat.shape[0]):
            for v in range(self.p_hat.shape[1]):
                prev = 1.0 if j == 0 else self.p_hat[j - 1, v]
                rhs = a * self.w[j, v] + b * prev
                if self.p_hat[j, v] > rhs + slack * self.stderr[j, v]:
                    out.append((v, j, float(self.p_hat[j, v]), float(rhs)))
        return out

    def to_json(self) -> dict:
        return {
            "u": self.u,
            "times": list(self.times),
            "p_hat": self.p_hat.tolist(),
            "w": self.w.tolist(),
            "samples": self.samples,
        }


def _check_capacity(sol: FractionalSolution) -> None:
    for (i, g), cols in sol.lp.groups.items():
        total = float(sol.z[list(cols)].sum()) if cols else 0.0
        if total / sol.eta > 1 + LP_TOLERANCE:
            raise ValidationError(
                f"capacity violated at vehicle {i}, time {sol.lp.grid.times[g]}: Σz/η = {total / sol.eta:.6g}"
            )


def _round_once(sol: FractionalSolution, inst, c: float, u: float, rng):
    """丸めを1回行い、車両ごとの経路と各反復後の未訪問フラグを返す"""
    lp = sol.lp
    starts = lp.starts
    base = base_unit(inst)
    covered = np.zeros(inst.n, dtype=bool)
    seqs = []
    for s in starts:
        # 始点から距離 0 の頂点は時刻 0 に訪れる。経路は他の車両が訪れた始点からでも必ず s_i で始める
        zero = [v for v in range(inst.n) if inst.d(s, v) == 0 and not covered[v]]
        covered[zero] = True
        covered[s] = True
        seqs.append([s, *sorted(v for v in zero if v != s)])
    history = []
    times = []
    j = 0
    while not covered.all():
        if j >= ROUNDING_ITERATION_CAP:
            raise StructuralError(f"rounding did not cover every vertex within {j} iterations")
        t_j = base * c ** (u + j)
        g = lp.grid.index_at(t_j)
        before = covered.copy()
        for i, s in enumerate(starts):
            cols, weights = sol.column_weights(i, g)
            draw = rng.random()
            cumulative = np.cumsum(weights / sol.eta) if len(cols) else np.zeros(0)
            hit = np.flatnonzero(draw < cumulative)
            if hit.size == 0:
                # 残りの確率ではこの反復は s_i に留まる
                continue
            column = lp.columns[cols[hit[0]]]
            doubled = column.tree(s).doubled_walk()
            if walk_length(doubled, inst) > 2 * sol.eta * t_j + 1e-9:
                raise StructuralError(f"sampled tree at t={t_j:.6g} is longer than η·t")
            walk = [v for v in doubled if v == s or not before[v]]
            if rng.random() < 0.5:
                walk = walk[::-1]
            seqs[i].extend(walk[1:])
            covered[walk] = True
        history.append(~covered)
        times.append(t_j)
        j += 1

    routes = MultiRoute(tuple(shortcut(seq, inst, require_all=False) for seq in seqs))
    return routes, history, times


def _uncovered_fraction(sol: FractionalSolution, t: float) -> np.ndarray:
    """w_v = 1 - Σ_i y_{v,t,i}（[0, 1] に切り詰める）"""
    g = sol.lp.grid.index_at(t)
    if g < 0:
        return np.ones(sol.lp.inst.n)
    y = sol.x[:, :g + 1, :].sum(axis=(0, 1))
    return np.clip(1.0 - y, 0.0, 1.0)


def _diagnostics(sol, inst, c: float, u: float, histories: list) -> RoundingDiagnostics:
    depth = max(len(h) for h in histories)
    base = base_unit(inst)
    counts = np.zeros((depth, inst.n))
    for history in histories:
        for j, flags in enumerate(history):
            counts[j] += flags
    samples = len(histories)
    p_hat = counts / samples
    stderr = np.maximum(np.sqrt(p_hat * (1 - p_hat) / samples), 1.0 / samples)
    times = tuple(base * c ** (u + j) for j in range(depth))
    w = np.array([_uncovered_fraction(sol, t) for t in times])
    return RoundingDiagnostics(u, times, p_hat, stderr, w, samples, sol.eta, sol.lp.K)


def _check_round_inputs(sol: FractionalSolution, c: float) -> None:
    if not c > 1:
        raise ValidationError(f"c must exceed 1, got {c}")
    _check_capacity(sol)


def lp_round(sol: FractionalSolution, inst, c: float, seed: int, u: float | None = None):
    """
    LP-ROUND。u を省略するとシードの乱数から引く。
    反復 j・車両 i ごとに時刻 t_j での z/η の分布から木を引き、二重化した巡回から既訪問の頂点を飛ばして
    ランダムな向きで走る。すべて覆ったら止める。
    """
    _check_round_inputs(sol, c)
    rng = np.random.default_rng(seed)
    if u is None:
        u = float(rng.random())
    routes, history, _ = _round_once(sol, inst, c, u, rng)
    return routes, _diagnostics(sol, inst, c, u, [history])


def estimate_coverage(sol: FractionalSolution, inst, c: float, u: float, samples: int, seed: int) -> RoundingDiagnostics:
    """u を固定して samples 回丸め、p_{v,j} を推定する（標本 k のシードは seed ⊕ k）"""
    _check_round_inputs(sol, c)
    if samples < 1:
        raise ValidationError("samples must be positive")
    histories = []
    for k in range(samples):
        _, history, _ = _round_once(sol, inst, c, u, np.random.default_rng(seed ^ k))
        histories.append(history)
    return _diagnostics(sol, inst, c, u, histories)


def rounding_runs(n: int, tau: float) -> int:
    """⌈2 ln n / τ⌉（少なくとも1回）"""
    if not 0 < tau < 1:
        raise ValidationError(f"tau must lie in (0, 1), got {tau}")
    return max(1, math.ceil(2 * math.log(max(n, 1)) / tau))


def amplify(sol: FractionalSolution, inst, c: float, tau: float, seed_base: int, runs: int | None = None) -> MultiRoute:
    """独立な丸めを繰り返し、ノルムが最小のものを返す（実行 k のシードは seed_base ⊕ k）"""
    m = rounding_runs(inst.n, tau) if runs is None else int(runs)
    if m < 1:
        raise ValidationError("runs must be positive")
    best = None
    for k in range(m):
        routes, _ = lp_round(sol, inst, c, seed_base ^ k)
        objective = lp_norm(multi_visit_times(routes, inst), sol.p)
        if best is None or objective < best[0]:
            best = (objective, routes)
    logger.info("amplify: best of %d rounding runs has norm %.6g", m, best[0])
    return best[1]


# --- 遅延の関係 ---

@dataclass(frozen=True)
class LatencyTerms:
    """Δ_j = t_j^p - t_{j-1}^p（t_{-1} = 0）、w_{v,j}、α_v = Σ_j w_{v,j-1} Δ_j（w_{v,-1} = 1）"""
    times: tuple[float, ...]
    deltas: tuple[float, ...]
    w: tuple[float, ...]
    alpha: float


def latency_terms(sol: FractionalSolution, c: float, u: float, v: int) -> LatencyTerms:
    inst = sol.lp.inst
    p = sol.p
    base = base_unit(inst)
    times, deltas, ws = [], [], []
    alpha = 0.0
    previous_w, previous_t = 1.0, 0.0
    for j in range(ROUNDING_ITERATION_CAP):
        t = base * c ** (u + j)
        delta = t ** p - previous_t ** p
        alpha += previous_w * delta
        w = float(_uncovered_fraction(sol, t)[v])
        times.append(t)
        deltas.append(delta)
        ws.append(w)
        previous_w, previous_t = w, t
        if w <= 0.0 or t >= sol.lp.grid.horizon:
            break
    return LatencyTerms(tuple(times), tuple(deltas), tuple(ws), alpha)


def lp_latency_power(sol: FractionalSolution, v: int) -> float:
    """(ℓ_v^LP)^p = Σ_{t,i} t^p x_{v,t,i}"""
    powers = np.array([float(t) ** sol.p for t in sol.lp.grid.times])
    return float((sol.x[:, :, v] * powers[None, :]).sum())


def sigma(t: float, base: float, c: float, u: float, p: float) -> float:
    """t 以上で最小の t_j = base·c^{u+j}（j ≥ 0）の p 乗"""
    if t <= base * c ** u:
        return (base * c ** u) ** p
    j = math.ceil(math.log(t / base, c) - u - 1e-12)
    return (base * c ** (u + j)) ** p


# --- 定数 ---

def _g(c: float, p: float) -> float:
    return ((math.e - 1) * 2 ** (p - 1) * (c ** (2 * p) - 1)
            / (p * (c - 1) ** p * (math.e - c ** p) * math.log(c)))


def multi_constant(p) -> tuple[float, float]:
    """
    複数車両の定数 (e-1)2^{p-1}(c^{2p}-1) / (p(c-1)^p(e-c^p) ln c) を c ∈ (1, e^{1/p}) で最小化する。
    """
    p = parse_p(p)
    if math.isinf(p):
        raise ValidationError("the multi-vehicle constant is defined for finite p")
    hi = math.e ** (1.0 / p)
    res = minimize_scalar(lambda c: _g(c, p), bounds=(1 + 1e-9, hi - 1e-9), method="bounded",
                          options={"xatol": 1e-10})
    logger.debug("multi-vehicle constant for p=%g: %.6g at c=%.6g (theta bound %.6g)",
                 p, res.fun, res.x, theta_bound(p))
    return float(res.x), float(res.fun)


def theta_bound(p, theta: float = THETA) -> float:
    """2p/ln θ · ((e-1)(θ²-1) / (2(e-θ) ln θ))^{1/p}"""
    p = parse_p(p)
    inner = (math.e - 1) * (theta ** 2 - 1) / (2 * (math.e - theta) * math.log(theta))
    return 2 * p / math.log(theta) * inner ** (1.0 / p)


def single_constant(p, c: float, eta: float = 1.0) -> float:
    """η 緩和での1台の定数 f_p(c)·η^p / (η(1 - (1 - 1/η)c^p))"""
    p = parse_p(p)
    denom = 1 - (1 - 1 / eta) * c ** p
    if denom <= 0:
        raise ValidationError(f"c={c} is too large for eta={eta} at p={p}")
    return f_p(c, p) * eta ** p / (eta * denom)


def expected_sigma_factor(c: float, p) -> float:
    """E_u[σ(t)] / t^p = (c^p - 1) / (p ln c)"""
    p = parse_p(p)
    if not c > 1:
        raise ValidationError(f"c must exceed 1, got {c}")
    return (c ** p - 1) / (p * math.log(c))
