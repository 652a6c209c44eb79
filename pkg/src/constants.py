# -*- coding: utf-8 -*-
"""
定数と設定値の定義
shared/defaults.json から読み込み、環境変数 LPTSP_WORK_CAP で容量上限を上書きできる
"""
import json
import math
import os
from pathlib import Path

# プロジェクトルートディレクトリの取得
# src/constants.py -> src/ -> lptsp/
PROJECT_ROOT = Path(__file__).parent.parent
SHARED_DEFAULTS_PATH = PROJECT_ROOT / "shared" / "defaults.json"
SHARED_INSTANCES_DIR = PROJECT_ROOT / "shared" / "instances"

WORK_CAP_ENV = "LPTSP_WORK_CAP"
LOG_LEVEL_ENV = "LPTSP_LOG_LEVEL"


def load_defaults():
    """shared/defaults.json から設定値を読み込む"""
    try:
        with open(SHARED_DEFAULTS_PATH, "r", encoding="utf-8") as f:
            return json.load(f)
    except Exception as e:
        print(f"Warning: Failed to load shared defaults from {SHARED_DEFAULTS_PATH}: {e}")
        return {}


_defaults = load_defaults()

# 頂点数の上限（LPTSP_WORK_CAP で一括上書きされる）
EXACT_DP_CAP = _defaults.get("EXACT_DP_CAP", 12)
PERMUTATION_CAP = _defaults.get("PERMUTATION_CAP", 9)
K_PATH_CAP = _defaults.get("K_PATH_CAP", 16)
K_TREE_CAP = _defaults.get("K_TREE_CAP", 14)
LINE_DP_CAP = _defaults.get("LINE_DP_CAP", 10000)
MULTI_VEHICLE_CAP = _defaults.get("MULTI_VEHICLE_CAP", 8)
LP_VERTEX_CAP = _defaults.get("LP_VERTEX_CAP", 8)
SEGMENTED_BITMASK_CAP = _defaults.get("SEGMENTED_BITMASK_CAP", 14)

# 台数と作業量の上限
MULTI_VEHICLE_K_CAP = _defaults.get("MULTI_VEHICLE_K_CAP", 3)
LP_VEHICLE_CAP = _defaults.get("LP_VEHICLE_CAP", 2)
REDUCTION_WORK_CAP = _defaults.get("REDUCTION_WORK_CAP", 2000000)

# アルゴリズムのパラメータ
FLIP_EXHAUSTIVE_LIMIT = _defaults.get("FLIP_EXHAUSTIVE_LIMIT", 12)
LAMBDA_SEARCH_ITERATIONS = _defaults.get("LAMBDA_SEARCH_ITERATIONS", 60)
SIMPLEX_REFACTOR_INTERVAL = _defaults.get("SIMPLEX_REFACTOR_INTERVAL", 50)
ROUNDING_ITERATION_CAP = _defaults.get("ROUNDING_ITERATION_CAP", 256)

# 許容誤差
NORM_TOLERANCE = _defaults.get("NORM_TOLERANCE", 1e-9)
LP_TOLERANCE = _defaults.get("LP_TOLERANCE", 1e-7)

# 並列実行数（受け入れテストの同時実行数）
MAX_CONCURRENCY = _defaults.get("MAX_CONCURRENCY", 3)

DEFAULT_NORM_GRID = tuple(
    math.inf if str(p).lower() == "inf" else float(p)
    for p in _defaults.get("DEFAULT_NORM_GRID", [1, 1.25, 1.5, 2, 2.5, 3, 4, 6, 8, 12, 16, "inf"])
)

_VERTEX_CAPS = {
    "EXACT_DP_CAP": EXACT_DP_CAP,
    "PERMUTATION_CAP": PERMUTATION_CAP,
    "K_PATH_CAP": K_PATH_CAP,
    "K_TREE_CAP": K_TREE_CAP,
    "LINE_DP_CAP": LINE_DP_CAP,
    "MULTI_VEHICLE_CAP": MULTI_VEHICLE_CAP,
    "LP_VERTEX_CAP": LP_VERTEX_CAP,
    "SEGMENTED_BITMASK_CAP": SEGMENTED_BITMASK_CAP,
}


def get_cap(name: str) -> int:
    """
    頂点数の上限を取得する。
    環境変数 LPTSP_WORK_CAP が設定されていれば、すべての頂点数上限をその値で置き換える。
    呼び出し時に環境変数を読むため、テストから monkeypatch で差し替えられる。
    """
    if name not in _VERTEX_CAPS:
        raise KeyError(f"Unknown capacity cap: {name}")
    override = os.getenv(WORK_CAP_ENV)
    if override:
        try:
            return int(override)
        except ValueError:
            print(f"Warning: Ignoring non-integer {WORK_CAP_ENV}={override!r}")
    return int(_VERTEX_CAPS[name])
