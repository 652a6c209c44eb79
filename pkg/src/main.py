# -*- coding: utf-8 -*-
"""
lptsp - Lp TSP / All-Norm TSP ソルバーのコマンドライン

  python -m src.main solve --algo exact --p 2 --instance shared/instances/four_point.json
  python -m src.main verify allnorm --instance shared/instances/turnpoint150.json
  python -m src.main certify --quick
  python -m src.main generate --generate random_metric:9:42 --output seed42n9.json

機械可読な出力（JSON / CSV）は標準出力か --output、表と進捗は標準エラーに出す。
終了コード: 0 成功、1 受け入れ検査の失敗や内部エラー、2 入力の検証エラー、3 容量上限の超過。
"""
import argparse
import asyncio
import logging
import math
import os
import sys
from dataclasses import dataclass

import numpy as np
from dotenv import load_dotenv

# .envファイルを読み込む（LPTSP_WORK_CAP / LPTSP_LOG_LEVEL）
load_dotenv()

from .analysis import NormGrid, allnorm_lower_bound, emit_report, extreme_ratios, simple_lower_bound
from .certify import AcceptanceSuite
from .constants import LOG_LEVEL_ENV
from .cover import all_norm_route, grid_search, lp_cover_route, tune_c
from .errors import CapacityError, LpTspError, ValidationError
from .exact import exact_line_lp_tsp, exact_lp_tsp, exact_multi_lp_tsp
from .lp import amplify, build_lp, estimate_coverage, lp_round, multi_constant, solve_lp
from .metric import GENERATOR_KINDS, generate_instance, instance_to_json, load_instance
from .routes import lp_norm, multi_visit_times, parse_p, visit_times
from .segmented import reduce_lp_tsp
from .utils import Utils

logger = logging.getLogger(__name__)

ALGORITHMS = ("exact", "cover", "all-norm", "lp-round", "reduction")
RANDOMIZED = ("cover", "lp-round")
FORMATS = ("json", "csv")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INVALID = 2
EXIT_CAPACITY = 3


def print_progress(message: str, percentage: int | None = None) -> None:
    """進捗を標準エラーに表示する"""
    if percentage is not None:
        # :<80 で既存の長いメッセージを空白で上書きクリアする
        print(f"\r[{percentage:3d}%] {message:<80}", end="", flush=True, file=sys.stderr)
    else:
        print(f"\r{message:<80}", file=sys.stderr)


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    target: str | None = None
    instance: str | None = None
    generate: str | None = None
    algo: str = "exact"
    p: float = 2.0
    K: int | None = None
    c: float | None = None
    grid: int | None = None
    tau: float | None = None
    samples: int = 256
    seed: int | None = None
    k: int = 2
    eps: float | None = None
    n: int = 2100
    norms: str | None = None
    only: tuple[int, ...] = ()
    quick: bool = False
    compare: bool = False
    output: str | None = None
    format: str = "json"

    def validate(self) -> None:
        if self.format not in FORMATS:
            raise ValidationError(f"unknown format {self.format!r}; expected one of {FORMATS}")
        if self.subcommand == "solve":
            if self.algo not in ALGORITHMS:
                raise ValidationError(f"unknown algorithm {self.algo!r}; expected one of {ALGORITHMS}")
            if self.algo in RANDOMIZED and self.seed is None:
                raise ValidationError(f"--seed is required for the randomized algorithm {self.algo}")
        if self.subcommand in ("solve", "generate") or (self.subcommand == "verify" and self.target == "allnorm"):
            if (self.instance is None) == (self.generate is None):
                raise ValidationError("exactly one of --instance and --generate is required")
        if self.grid is not None and self.grid < 1:
            raise ValidationError(f"--grid must be at least 1, got {self.grid}")
        if self.samples < 1:
            raise ValidationError(f"--samples must be positive, got {self.samples}")
        if self.K is not None and self.K < 1:
            raise ValidationError(f"--K must be at least 1, got {self.K}")


def parse_generator(text: str):
    """kind:n:seed"""
    parts = text.split(":")
    if len(parts) != 3:
        raise ValidationError(f"--generate expects kind:n:seed, got {text!r}")
    kind, n, seed = parts
    if kind not in GENERATOR_KINDS:
        raise ValidationError(f"unknown instance kind {kind!r}; expected one of {GENERATOR_KINDS}")
    try:
        return kind, int(n), int(seed)
    except ValueError as e:
        raise ValidationError(f"--generate expects integer n and seed, got {text!r}") from e


def resolve_instance(config: RunConfig):
    if config.generate is not None:
        kind, n, seed = parse_generator(config.generate)
        return generate_instance(seed, n, kind)
    try:
        return load_instance(config.instance)
    except FileNotFoundError as e:
        raise ValidationError(f"instance file not found: {config.instance}") from e


# --- solve ---

def _delays_csv(delays) -> str:
    scale = float(delays.scale)
    rows = [[v, t, repr(t * scale)] for v, t in enumerate(delays.per_vertex)]
    return Utils.rows_to_csv(["vertex", "units", "time"], rows)


def _default_c(p: float, K: int) -> float:
    if math.isinf(p):
        return 2.0
    return multi_constant(p)[0] if K > 1 else tune_c(p)[0]


def _exact_for(inst, p: float):
    if inst.K > 1:
        return exact_multi_lp_tsp(inst, p)
    if inst.geometry == "line" and inst.positions is not None:
        return exact_line_lp_tsp(inst, p)
    return exact_lp_tsp(inst, p)


def solve(config: RunConfig, inst) -> tuple[dict, object]:
    """アルゴリズムを1つ実行し、(JSON 出力, 遅延ベクトル) を返す"""
    p = parse_p(config.p)
    out = {"algorithm": config.algo, "instance": inst.name, "p": Utils.format_p(p)}
    if config.algo == "exact":
        result = _exact_for(inst, p)
        if inst.K > 1:
            out["routes"] = result.routes.to_json()
        else:
            out["route"] = result.route.to_json()
        out["objective"] = result.objective
        delays = result.delays

    elif config.algo == "all-norm":
        route, schedule = all_norm_route(inst)
        out["route"] = route.to_json()
        out["schedule"] = schedule.to_json()
        delays = visit_times(route, inst)
        out["objective"] = lp_norm(delays, p)

    elif config.algo == "cover":
        c = config.c if config.c is not None else _default_c(p, 1)
        if config.grid is not None:
            result = grid_search(inst, p, c, config.grid)
            out.update(result.to_json())
            route = result.route
        else:
            rng = np.random.default_rng(config.seed)
            route, schedule = lp_cover_route(inst, p, c, float(rng.random()), int(rng.integers(2 ** 31)))
            out["route"] = route.to_json()
            out["schedule"] = schedule.to_json()
        out["c"] = c
        delays = visit_times(route, inst)
        out["objective"] = lp_norm(delays, p)

    elif config.algo == "lp-round":
        K = config.K or 1
        if inst.K < K:
            raise ValidationError(f"--K {K} needs {K} start vertices, the instance has {inst.K}")
        c = config.c if config.c is not None else _default_c(p, K)
        sol = solve_lp(build_lp(inst, p, K=K))
        if config.tau is not None:
            routes = amplify(sol, inst, c, config.tau, config.seed)
        else:
            routes, single = lp_round(sol, inst, c, config.seed)
            coverage = estimate_coverage(sol, inst, c, single.u, config.samples, config.seed)
            out["diagnostics"] = coverage.to_json()
        out["routes"] = routes.to_json()
        out["fractional"] = sol.to_json()
        out["c"] = c
        delays = multi_visit_times(routes, inst)
        out["objective"] = lp_norm(delays, p)

    else:
        result = reduce_lp_tsp(inst, p, eps=config.eps, k=config.k)
        out.update(result.to_json())
        delays = visit_times(result.route, inst)

    out["delays"] = delays.to_json()
    if config.compare:
        optimum = _exact_for(inst, p).objective
        out["exact_objective"] = optimum
        out["ratio"] = out["objective"] / optimum if optimum > 0 else 1.0
    return out, delays


# --- 出力 ---

def emit(config: RunConfig, payload: bytes | str) -> None:
    if isinstance(payload, bytes):
        payload = payload.decode("utf-8")
    if config.output:
        Utils.write_text_file(config.output, payload)
        print_progress(f"成果物: {config.output}")
    else:
        sys.stdout.write(payload)
        sys.stdout.flush()


async def run(config: RunConfig) -> int:
    """設定どおりに1つのサブコマンドを実行し、終了コードを返す"""
    try:
        config.validate()
        if config.subcommand == "solve":
            inst = resolve_instance(config)
            print_progress(f"{config.algo} を {inst.name or 'instance'} (n={inst.n}) で実行中...", 0)
            out, delays = await asyncio.to_thread(solve, config, inst)
            print_progress("完了", 100)
            print(file=sys.stderr)
            emit(config, _delays_csv(delays) if config.format == "csv" else Utils.canonical_json(out))

        elif config.subcommand == "verify" and config.target == "allnorm":
            inst = resolve_instance(config)
            grid = NormGrid.parse(config.norms) if config.norms else NormGrid.default()
            report = await asyncio.to_thread(allnorm_lower_bound, inst, grid)
            print(f"min-max ratio: {report.min_max:.6f} (candidate {report.best_index})", file=sys.stderr)
            emit(config, emit_report(report, config.format))

        elif config.subcommand == "verify" and config.target == "simple":
            eps = config.eps if config.eps is not None else 1e-3
            bound = simple_lower_bound(config.n, eps)
            out = {"n": config.n, "eps": eps, "r_inf": bound.r_inf, "r_1": bound.r_1,
                   "minimum": bound.minimum, "r_1_exact": bound.r_1_exact}
            if config.n <= 10000:
                out["direct"] = list(extreme_ratios(config.n, eps))
            print(f"minimum ratio: {bound.minimum:.6f}", file=sys.stderr)
            emit(config, Utils.canonical_json(out))

        elif config.subcommand == "certify":
            suite = AcceptanceSuite(quick=config.quick)
            results = await suite.run(config.only or None, progress_callback=print_progress)
            print(file=sys.stderr)
            for r in results:
                mark = "ok  " if r.passed else "FAIL"
                print(f"[{mark}] {r.number:2d} {r.title:<32} {r.seconds:8.2f}s  {r.detail}", file=sys.stderr)
            emit(config, Utils.canonical_json([r.to_json() for r in results]))
            if not all(r.passed for r in results):
                return EXIT_FAILED

        elif config.subcommand == "generate":
            inst = resolve_instance(config)
            emit(config, Utils.canonical_json(instance_to_json(inst)))

        else:
            raise ValidationError(f"unknown subcommand {config.subcommand!r}")

    except CapacityError as e:
        print(f"\nエラー: {e}", file=sys.stderr)
        return EXIT_CAPACITY
    except ValidationError as e:
        print(f"\nエラー: {e}", file=sys.stderr)
        return EXIT_INVALID
    except LpTspError as e:
        logger.exception("internal error")
        print(f"\n内部エラー: {e}", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="lptsp - Lp TSP / All-Norm TSP ソルバー")
    parser.add_argument("--verbose", "-v", action="count", default=0, help="ログを詳しくする（-vv で DEBUG）")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_source(p):
        p.add_argument("--instance", help="インスタンス JSON のパス")
        p.add_argument("--generate", help="kind:n:seed で生成（--instance の代わり）")

    def add_output(p):
        p.add_argument("--output", help="出力先（省略時は標準出力）")
        p.add_argument("--format", default="json", choices=FORMATS)

    solve_p = sub.add_parser("solve", help="経路を求める")
    add_source(solve_p)
    add_output(solve_p)
    solve_p.add_argument("--algo", default="exact", choices=ALGORITHMS)
    solve_p.add_argument("--p", default="2", help='ノルムの指数（"inf" も可）')
    solve_p.add_argument("--K", type=int, help="車両数（lp-round）")
    solve_p.add_argument("--c", type=float, help="幾何的な予算の公比")
    solve_p.add_argument("--grid", type=int, help="脱乱択化の格子サイズ m（cover）")
    solve_p.add_argument("--tau", type=float, help="増幅の τ（lp-round）")
    solve_p.add_argument("--samples", type=int, default=256)
    solve_p.add_argument("--seed", type=int)
    solve_p.add_argument("--k", type=int, default=2, help="帰着の区間数（reduction）")
    solve_p.add_argument("--eps", type=float)
    solve_p.add_argument("--compare", action="store_true", help="厳密解との比も出力する")

    verify_p = sub.add_parser("verify", help="下界の検証")
    verify_p.add_argument("target", choices=("allnorm", "simple"))
    add_source(verify_p)
    add_output(verify_p)
    verify_p.add_argument("--norms", help='ノルムの格子（例: "1,2,inf"）')
    verify_p.add_argument("--n", type=int, default=2100)
    verify_p.add_argument("--eps", type=float)

    certify_p = sub.add_parser("certify", help="受け入れ検査を実行する")
    certify_p.add_argument("--only", help="検査番号のカンマ区切り")
    certify_p.add_argument("--quick", action="store_true", help="標本数を減らして短時間で回す")
    certify_p.add_argument("--output")

    generate_p = sub.add_parser("generate", help="インスタンスを生成する")
    generate_p.add_argument("--generate", required=True, help="kind:n:seed")
    generate_p.add_argument("--output")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    values = {k: v for k, v in vars(args).items() if k in RunConfig.__dataclass_fields__ and v is not None}
    if "p" in values:
        values["p"] = parse_p(values["p"])
    if args.subcommand == "certify" and args.only:
        try:
            values["only"] = tuple(int(x) for x in args.only.split(",") if x.strip())
        except ValueError as e:
            raise ValidationError(f"--only expects comma-separated check numbers, got {args.only!r}") from e
    return RunConfig(**values)


def configure_logging(verbose: int) -> None:
    if verbose >= 2:
        level = logging.DEBUG
    elif verbose == 1:
        level = logging.INFO
    else:
        level = getattr(logging, os.getenv(LOG_LEVEL_ENV, "WARNING").upper(), logging.WARNING)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(asctime)s %(name)s %(levelname)s %(message)s")


async def main(argv=None) -> int:
    """メインエントリーポイント"""
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    try:
        config = config_from_args(args)
    except ValidationError as e:
        print(f"エラー: {e}", file=sys.stderr)
        return EXIT_INVALID
    return await run(config)


if __name__ == "__main__":
    sys.exit(asyncio.run(main()))
