# -*- coding: utf-8 -*-
"""
analysis.py: All-Norm の下界の検証とレポート出力

- turnpoint_candidates / allnorm_lower_bound: 始点の左に1点だけある直線インスタンスで、
  「右へ r 点進んでから左の点へ戻り、再び右へ掃く」経路の族を全ノルムで比べる
- simple_lower_bound / extreme_route_delays: 閉じた式で書ける2経路の例
- emit_report: JSON / CSV
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

from .constants import DEFAULT_NORM_GRID, NORM_TOLERANCE, get_cap
from .errors import StructuralError, ValidationError
from .exact import exact_line_lp_tsp, exact_lp_tsp
from .metric import circle_instance
from .routes import Route, lp_norm, minkowski, parse_p, visit_times
from .utils import Utils

logger = logging.getLogger(__name__)

CROSS_CHECK_LIMIT = 9


@dataclass(frozen=True)
class NormGrid:
    """比較に使う Lp ノルムの有限集合（1 と ∞ を含む）"""
    norms: tuple[float, ...]

    def __post_init__(self):
        norms = tuple(sorted({parse_p(p) for p in self.norms}))
        object.__setattr__(self, "norms", norms)
        if not norms:
            raise ValidationError("norm grid must not be empty")
        if 1.0 not in norms or not math.isinf(norms[-1]):
            raise ValidationError("norm grid must contain 1 and inf")

    @classmethod
    def default(cls) -> "NormGrid":
        return cls(DEFAULT_NORM_GRID)

    @classmethod
    def parse(cls, text: str) -> "NormGrid":
        """"1,1.5,2,inf" のようなカンマ区切り"""
        return cls(tuple(parse_p(item) for item in text.split(",") if item.strip()))

    def labels(self) -> list[str]:
        return [Utils.format_p(p) for p in self.norms]


def _left_and_right(inst):
    if inst.geometry != "line" or inst.positions is None:
        raise ValidationError(f"turnpoint candidates need a line instance, got {inst.geometry}")
    s = inst.start
    origin = inst.positions[s]
    left = [v for v in range(inst.n) if inst.positions[v] < origin]
    if len(left) != 1:
        raise ValidationError(f"expected exactly one vertex left of the start, found {len(left)}")
    right = sorted((v for v in range(inst.n) if v != s and inst.positions[v] >= origin),
                   key=lambda v: (inst.positions[v], v))
    return left[0], right


def turnpoint_candidates(inst) -> list[Route]:
    """r = 0..(右側の点数) について s, 右の r 点, 左の点, 残りの右の点 の順に訪れる経路"""
    left, right = _left_and_right(inst)
    s = inst.start
    return [Route(s, (s, *right[:r], left, *right[r:])) for r in range(len(right) + 1)]


def simulate_line_times(route: Route, positions) -> np.ndarray:
    """座標の上を単位速度で動いたときの到着時刻（距離行列を使わない検算用）"""
    xs = np.asarray([positions[v] for v in route.order], dtype=float)
    arrival = np.concatenate(([0.0], np.cumsum(np.abs(np.diff(xs)))))
    times = np.zeros(len(positions))
    times[list(route.order)] = arrival
    return times


@dataclass(frozen=True)
class RatioReport:
    """
    ratios[c, q] = 候補 c のノルム q での値 / そのノルムでの最良値。
    min_max は候補ごとの最大比の最小値、best_index はそれを達成する候補。
    """
    name: str
    norms: tuple[float, ...]
    candidates: tuple[Route, ...]
    ratios: np.ndarray
    optima: tuple[float, ...]
    min_max: float
    best_index: int

    def worst_norms(self) -> list[float]:
        return [self.norms[int(np.argmax(row))] for row in self.ratios]

    def to_json(self) -> dict:
        labels = [Utils.format_p(p) for p in self.norms]
        worst = self.worst_norms()
        return {
            "name": self.name,
            "norms": labels,
            "optima": {label: Utils.json_number(v) for label, v in zip(labels, self.optima)},
            "min_max": Utils.json_number(self.min_max),
            "best_index": self.best_index,
            "candidates": [
                {
                    "route_id": idx,
                    "route": route.to_json(),
                    "ratios": {label: Utils.json_number(r) for label, r in zip(labels, self.ratios[idx])},
                    "worst_norm": Utils.format_p(worst[idx]),
                }
                for idx, route in enumerate(self.candidates)
            ],
        }


def _ratio_matrix(delays: np.ndarray, norms) -> tuple[np.ndarray, list[float]]:
    values = np.array([[minkowski(row, p) for p in norms] for row in delays])
    optima = values.min(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(optima > 0, values / np.where(optima > 0, optima, 1.0), 1.0)
    return ratios, optima.tolist()


def _cross_check(inst, norms, optima_units) -> None:
    """候補の族の最良値が区間 DP の厳密解と一致するか（族の支配性の確認）"""
    for p, best in zip(norms, optima_units):
        if inst.n > CROSS_CHECK_LIMIT and not (p == 1 or math.isinf(p)):
            continue
        if inst.n > get_cap("LINE_DP_CAP"):
            continue
        exact = lp_norm(exact_line_lp_tsp(inst, p).delays, p, units=True)
        if abs(exact - best) > NORM_TOLERANCE * max(1.0, exact) * 10:
            raise StructuralError(
                f"best turnpoint candidate ({best:.9g}) differs from the exact optimum ({exact:.9g}) for p={p}"
            )


def allnorm_lower_bound(inst, grid: NormGrid | None = None, cross_check: bool = True) -> RatioReport:
    """
    全候補の遅延ベクトルを作り、ノルムごとの最良値に対する比の min-max を求める。
    cross_check なら各ノルムの最良値を区間 DP と照合する（n ≤ 9 は全ノルム、それ以外は L1 と L∞）。
    """
    grid = grid or NormGrid.default()
    candidates = turnpoint_candidates(inst)
    delays = np.array([visit_times(route, inst).per_vertex for route in candidates], dtype=float)
    ratios, optima = _ratio_matrix(delays, grid.norms)
    if cross_check:
        _cross_check(inst, grid.norms, optima)
    worst = ratios.max(axis=1)
    best_index = int(np.argmin(worst))
    scale = float(inst.scale)
    report = RatioReport(
        inst.name, grid.norms, tuple(candidates), ratios,
        tuple(o * scale for o in optima), float(worst[best_index]), best_index,
    )
    logger.info("all-norm lower bound on %s: min-max %.6f over %d candidates and %d norms",
                inst.name or "instance", report.min_max, len(candidates), len(grid.norms))
    return report


def emit_report(report: RatioReport, fmt: str = "json") -> bytes:
    """JSON は RatioReport と同じ構造、CSV は route_id, norm, ratio の行"""
    if fmt == "json":
        return Utils.canonical_json(report.to_json()).encode("utf-8")
    if fmt == "csv":
        rows = [
            [idx, Utils.format_p(p), repr(float(report.ratios[idx, q]))]
            for idx in range(len(report.candidates))
            for q, p in enumerate(report.norms)
        ]
        return Utils.rows_to_csv(["route_id", "norm", "ratio"], rows).encode("utf-8")
    raise ValidationError(f"unknown report format {fmt!r}; expected json or csv")


# --- 閉じた式の例 ---

@dataclass(frozen=True)
class SimpleBound:
    """r_inf と（表示された式の）r_1、その最小値。r_1_exact は2経路の直接評価と一致する式"""
    r_inf: float
    r_1: float
    minimum: float
    r_1_exact: float


def simple_lower_bound(n: int, eps: float) -> SimpleBound:
    """
    始点 0、左に -1、右に b^i - 1（i = 1..n、b = 1+ε）。
    右を先に回る経路と左を先に回る経路の L∞ と L1 の比。
    """
    if n < 1:
        raise ValidationError(f"n must be at least 1, got {n}")
    if eps <= 0:
        raise ValidationError(f"eps must be positive, got {eps}")
    b = 1 + eps
    q = math.exp(-n * math.log1p(eps))
    geo = b / (b - 1)
    r_inf = (2 - q) / (1 + q)
    r_1 = (n * q + geo) / (geo - (n + 2) * q + 2)
    r_1_exact = ((n + 1) * q + geo * (1 - q)) / (geo * (1 - q) - (n + 1) * q + 2)
    return SimpleBound(r_inf, r_1, min(r_inf, r_1), r_1_exact)


def extreme_route_delays(n: int, eps: float) -> tuple[np.ndarray, np.ndarray]:
    """右を先に回る経路と左を先に回る経路の遅延ベクトル（頂点順: 0, -1, b-1, …, b^n-1）"""
    b = 1 + eps
    right = b ** np.arange(1, n + 1) - 1
    right_first = np.concatenate(([0.0, 2 * right[-1] + 1], right))
    left_first = np.concatenate(([0.0, 1.0], right + 2))
    return right_first, left_first


def extreme_ratios(n: int, eps: float) -> tuple[float, float]:
    """直接評価した (L∞ 比, L1 比)"""
    right_first, left_first = extreme_route_delays(n, eps)
    r_inf = right_first.max() / left_first.max()
    r_1 = left_first.sum() / right_first.sum()
    return float(r_inf), float(r_1)


def wrong_norm_penalty(inst, p_opt, p_eval) -> float:
    """p_opt の最適経路を p_eval で評価したときの、p_eval の最適値に対する比"""
    p_opt, p_eval = parse_p(p_opt), parse_p(p_eval)
    solve = exact_line_lp_tsp if inst.geometry == "line" and inst.positions is not None else exact_lp_tsp
    chosen = solve(inst, p_opt)
    best = solve(inst, p_eval)
    if best.objective == 0:
        return 1.0
    return lp_norm(chosen.delays, p_eval) / best.objective


def circle_penalties(sizes, eps: float = 0.25, p_eval=2) -> list[float]:
    """円の例の (n, m) ごとに、L∞ 最適経路を p_eval で測ったときの最適値に対する比"""
    penalties = []
    for n, m in sizes:
        penalty = wrong_norm_penalty(circle_instance(n, m, eps), math.inf, p_eval)
        logger.info("circle n=%d m=%d: L_inf-optimal route is %.4f times the optimum in L%s",
                    n, m, penalty, Utils.format_p(parse_p(p_eval)))
        penalties.append(penalty)
    return penalties
