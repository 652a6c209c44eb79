# -*- coding: utf-8 -*-
"""
certify.py: 受け入れ検査の実行

12 個の検査を番号で登録し、AcceptanceSuite.run で並行に実行する。
各検査は (合否, 詳細) を返す関数で、quick=True なら標本数やインスタンス数を減らす。
検査の中で例外が出たらその検査は不合格として記録する。
"""
import asyncio
import logging
import math
import time
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .analysis import allnorm_lower_bound, extreme_ratios, simple_lower_bound
from .constants import DEFAULT_NORM_GRID, MAX_CONCURRENCY
from .cover import all_norm_route, cover_monte_carlo, f_p, grid_search, summarize, tune_c
from .errors import ValidationError
from .exact import exact_line_lp_tsp, exact_lp_tsp, exact_multi_lp_tsp, tk_profile
from .ktree import all_k_trees
from .lp import amplify, build_lp, estimate_coverage, lp_round, multi_constant, solve_lp, theta_bound
from .metric import four_point_instance, generate_instance, line_instance, turnpoint_instance
from .routes import (
    lp_norm,
    multi_visit_times,
    norm_dominates,
    partial_times,
    power_sum,
    submajorization_ratio,
    visit_times,
)
from .segmented import SegmentedSpec, brute_force_segmented, reduce_lp_tsp, segmented_feasible

logger = logging.getLogger(__name__)

TFP_CONSTANT = 18.154
TFP_ROOT_BOUND = 4.27
MULTI_TFP_CONSTANT = 119.8
MULTI_ROOT_BOUND = 10.92


@dataclass(frozen=True)
class CheckResult:
    number: int
    title: str
    passed: bool
    detail: str
    seconds: float

    def to_json(self) -> dict:
        return {
            "number": self.number,
            "title": self.title,
            "passed": self.passed,
            "detail": self.detail,
            "seconds": round(self.seconds, 3),
        }


def _seeded_instances(count: int, n_max: int, seed0: int = 42, n_min: int = 4):
    """seed0, seed0+1, … から n ∈ [n_min, n_max] のランダムメトリックを作る"""
    out = []
    for idx in range(count):
        seed = seed0 + idx
        n = n_min + seed % (n_max - n_min + 1)
        out.append(generate_instance(seed, n, "random_metric"))
    return out


# --- 各検査 ---

def check_four_point(quick: bool):
    inst = four_point_instance()
    l2 = exact_lp_tsp(inst, 2)
    l1 = exact_lp_tsp(inst, 1)
    ok = l2.route.order == (0, 1, 2, 3) and l1.route.order == (0, 2, 3, 1) and l1.cost == 801
    tiny = exact_lp_tsp(four_point_instance(Fraction(1, 10000)), 2)
    ok = ok and abs(tiny.objective - math.sqrt(26)) <= 1e-3
    return ok, (f"L2 route {list(l2.route.order)}, L1 route {list(l1.route.order)} "
                f"(cost {l1.cost} units), L2 objective at eps=1e-4 {tiny.objective:.6f}")


def check_simple_bound(quick: bool):
    bound = simple_lower_bound(2100, 1e-3)
    ok = bound.minimum >= 1.67
    worst = 0.0
    for n in range(1, 21):
        for eps in (1e-3, 0.05, 0.5):
            r_inf, r_1 = extreme_ratios(n, eps)
            formula = simple_lower_bound(n, eps)
            worst = max(worst, abs(r_inf - formula.r_inf) / r_inf, abs(r_1 - formula.r_1_exact) / r_1)
    ok = ok and worst <= 1e-9
    return ok, f"minimum ratio {bound.minimum:.6f} at n=2100, worst formula gap {worst:.2e}"


def check_turnpoint(quick: bool):
    report = allnorm_lower_bound(turnpoint_instance(), cross_check=not quick)
    return 1.77 <= report.min_max <= 1.80, f"min-max ratio {report.min_max:.6f} (candidate {report.best_index})"


def check_all_norm_certificate(quick: bool):
    instances = _seeded_instances(8 if quick else 30, 8 if quick else 12)
    worst = 0.0
    for inst in instances:
        route, schedule = all_norm_route(inst, provider="exact")
        lower = tk_profile(inst).lengths
        worst = max(worst,
                    submajorization_ratio(visit_times(route, inst), lower),
                    submajorization_ratio(schedule.traversal, lower))
    return worst <= 8 + 1e-9, f"largest T_k / L_k over {len(instances)} instances: {worst:.4f}"


def check_doubling_points(quick: bool):
    inst = line_instance([0, *(2 ** i for i in range(12))], start=0, name="doubling")
    # 片側だけの直線ではショートカットした経路は最適な掃引と同じになるので、往復する走査の遅延で測る
    _, schedule = all_norm_route(inst, provider="exact")
    optimum = exact_line_lp_tsp(inst, 1).cost
    ratio = float(power_sum(schedule.traversal, 1)) / float(optimum)
    return 2.5 <= ratio <= 3.05, f"traversal L1 {power_sum(schedule.traversal, 1)} vs optimum {optimum}: {ratio:.4f}"


def check_tfp_cover(quick: bool):
    c, _ = tune_c(2)
    instances = _seeded_instances(3 if quick else 10, 7 if quick else 10)
    samples = 64 if quick else 256
    m = 4 if quick else 16
    lines = []
    ok = True
    for inst in instances:
        trees = all_k_trees(inst, inst.start)
        reference = exact_lp_tsp(inst, 2).objective
        mc = cover_monte_carlo(inst, 2, c, samples, seed=inst.n, reference=reference, trees=trees)
        ratio = grid_search(inst, 2, c, m, trees=trees).objective / reference
        ok = ok and mc.mean <= TFP_CONSTANT + 3 * mc.stderr and ratio <= TFP_ROOT_BOUND
        lines.append(f"{inst.name}: mean {mc.mean:.3f}±{mc.stderr:.3f}, best {ratio:.3f}")
    return ok, "; ".join(lines)


def check_lp_cover(quick: bool):
    instances = _seeded_instances(3 if quick else 10, 7 if quick else 10)
    m = 4 if quick else 16
    worst = {}
    ok = True
    for p in (1, 2, 3, 4):
        c, _ = tune_c(p)
        limit = 8 / (p * math.log(4)) ** (1 / p)
        ratios = [grid_search(inst, p, c, m).objective / exact_lp_tsp(inst, p).objective for inst in instances]
        worst[p] = max(ratios)
        ok = ok and worst[p] <= limit
    return ok, ", ".join(f"p={p}: {r:.3f}" for p, r in worst.items())


def check_constants(quick: bool):
    near_e = f_p(math.e - 1e-9, 2)
    c_star, _ = tune_c(2)
    theta_ok = all(theta_bound(p) <= 17.94 * p for p in range(1, 9))
    _, multi = multi_constant(2)
    ok = near_e <= 18.155 and abs(c_star - math.e) <= 1e-3 and theta_ok and multi <= MULTI_TFP_CONSTANT
    return ok, f"f_2(e)={near_e:.4f}, c*={c_star:.6f}, theta bounds ok={theta_ok}, multi constant {multi:.3f}"


def _lp_cases(quick: bool):
    """(インスタンス, K, 解, 厳密解のノルム, c, 定数, 上限)"""
    instances = _seeded_instances(2 if quick else 5, 5 if quick else 6, seed0=7)
    cases = []
    for inst in instances:
        for K in (1, 2):
            if K == 1:
                case_inst = inst
                exact = exact_lp_tsp(case_inst, 2).objective
                c, constant = tune_c(2)
                limit = TFP_ROOT_BOUND
            else:
                case_inst = inst.with_starts((0, 1))
                exact = exact_multi_lp_tsp(case_inst, 2).objective
                c, _ = multi_constant(2)
                constant, limit = MULTI_TFP_CONSTANT, MULTI_ROOT_BOUND
            sol = solve_lp(build_lp(case_inst, 2, K=K))
            cases.append((case_inst, K, sol, exact, c, constant, limit))
    return cases


def check_lp_rounding(quick: bool):
    samples = 64 if quick else 500
    ok = True
    lines = []
    for inst, K, sol, exact, c, constant, limit in _lp_cases(quick):
        relaxed = sol.norm <= exact * (1 + 1e-7)
        powers = []
        for k in range(samples):
            routes, _ = lp_round(sol, inst, c, seed=1000 + k)
            powers.append(float(power_sum(multi_visit_times(routes, inst), 2)) / sol.objective)
        mc = summarize(powers)
        best = amplify(sol, inst, c, tau=0.5, seed_base=inst.n * 31 + K)
        ratio = lp_norm(multi_visit_times(best, inst), 2) / exact
        ok = ok and relaxed and mc.mean <= constant + 3 * mc.stderr and ratio <= limit
        lines.append(f"{inst.name} K={K}: LP {sol.norm:.3f} vs {exact:.3f}, mean {mc.mean:.3f}, best {ratio:.3f}")
    return ok, "; ".join(lines)


def check_coverage_recurrence(quick: bool):
    samples = 64 if quick else 400
    violations = 0
    for inst, K, sol, _, c, _, _ in _lp_cases(quick):
        diag = estimate_coverage(sol, inst, c, u=0.5, samples=samples, seed=inst.n + K)
        found = diag.recurrence_violations()
        if found:
            logger.warning("%s K=%d: recurrence violated at %s", inst.name, K, found[:3])
        violations += len(found)
    return violations == 0, f"{violations} recurrence violations"


def _random_spec(inst, rng) -> SegmentedSpec:
    """ランダムな経路の訪問時刻の近くに締切を置く"""
    others = [v for v in range(inst.n) if v != inst.start]
    order = (inst.start, *rng.permutation(others).tolist())
    times = sorted(partial_times(order, inst).values())
    k = int(rng.integers(1, 4))
    counts = sorted(int(x) for x in rng.integers(1, inst.n + 1, size=k))
    deadlines = np.maximum.accumulate([max(0, times[n - 1] + int(rng.integers(-3, 2))) for n in counts])
    return SegmentedSpec(tuple(zip(counts, deadlines.tolist())))


def check_segmented(quick: bool):
    rng = np.random.default_rng(2024)
    kinds = ("random_metric", "line", "tree", "euclidean")
    pairs = 15 if quick else 50
    mismatches = 0
    for idx in range(pairs):
        inst = generate_instance(idx, int(rng.integers(3, 9)), kinds[idx % len(kinds)])
        spec = _random_spec(inst, rng)
        found = segmented_feasible(inst, spec)
        oracle = brute_force_segmented(inst, spec)
        if (found is None) != (oracle is None) or (found is not None and not spec.satisfied_by(found, inst)):
            mismatches += 1
    ok = mismatches == 0

    lines = []
    for seed in range(2 if quick else 5):
        inst = generate_instance(seed, 6 if quick else 8 + seed % 3, "line")
        exact = exact_line_lp_tsp(inst, 2).objective
        r2 = reduce_lp_tsp(inst, 2, k=2)
        r3 = reduce_lp_tsp(inst, 2, k=3)
        ok = (ok and r2.objective <= 2 * exact + 1e-9 and r3.objective <= r2.objective + 1e-9
              and r2.table.is_monotone() and r3.table.is_monotone())
        lines.append(f"{inst.name}: k=2 {r2.objective / exact:.3f}, k=3 {r3.objective / exact:.3f}")
    return ok, f"{mismatches} mismatches in {pairs} pairs; " + "; ".join(lines)


def check_submajorization(quick: bool):
    rng = np.random.default_rng(12)
    failures = 0
    for _ in range(100):
        n = int(rng.integers(1, 12))
        a = rng.integers(0, 50, size=n)
        b = np.sort(rng.integers(1, 50, size=n))
        rho = submajorization_ratio(a, b)
        if not norm_dominates(a, b, rho, DEFAULT_NORM_GRID):
            failures += 1
    return failures == 0, f"{failures} norm violations in 100 pairs"


CHECKS = {
    1: ("four-point example", check_four_point),
    2: ("closed-form lower bound", check_simple_bound),
    3: ("150-point all-norm bound", check_turnpoint),
    4: ("all-norm 8-certificate", check_all_norm_certificate),
    5: ("doubling points traversal", check_doubling_points),
    6: ("L2 covering expectation", check_tfp_cover),
    7: ("Lp covering ratio", check_lp_cover),
    8: ("constants", check_constants),
    9: ("LP relaxation and rounding", check_lp_rounding),
    10: ("coverage recurrences", check_coverage_recurrence),
    11: ("segmented TSP and reduction", check_segmented),
    12: ("submajorization", check_submajorization),
}


def run_check(number: int, quick: bool = False) -> CheckResult:
    title, func = CHECKS[number]
    started = time.perf_counter()
    try:
        passed, detail = func(quick)
    except Exception as e:
        # 1つの検査の例外で他の検査を止めない
        logger.exception("check %d raised", number)
        passed, detail = False, f"{type(e).__name__}: {e}"
    seconds = time.perf_counter() - started
    logger.info("check %d (%s): %s in %.2fs", number, title, "ok" if passed else "FAILED", seconds)
    return CheckResult(number, title, bool(passed), detail, seconds)


class AcceptanceSuite:
    """検査をスレッドで並行に実行する（同時実行数は MAX_CONCURRENCY）"""

    def __init__(self, quick: bool = False):
        self.quick = quick

    async def run(self, only=None, progress_callback=None) -> list[CheckResult]:
        numbers = sorted(CHECKS) if not only else sorted(set(only))
        unknown = [n for n in numbers if n not in CHECKS]
        if unknown:
            raise ValidationError(f"unknown check number {unknown[0]}")
        semaphore = asyncio.Semaphore(MAX_CONCURRENCY)
        completed = 0
        total = len(numbers)

        async def run_one(number):
            nonlocal completed
            async with semaphore:
                result = await asyncio.to_thread(run_check, number, self.quick)
                completed += 1
                if progress_callback:
                    progress_callback(f"検査 {completed}/{total} 完了 (#{number})", completed * 100 // total)
                return result

        results = await asyncio.gather(*(run_one(n) for n in numbers))
        return sorted(results, key=lambda r: r.number)
