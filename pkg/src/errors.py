# -*- coding: utf-8 -*-
"""
errors.py: ソルバー全体で共有する例外の定義

CLI は ValidationError を終了コード 2、CapacityError を終了コード 3 に対応付ける。
"""


class LpTspError(Exception):
    """本パッケージの例外の基底クラス"""


class ValidationError(LpTspError, ValueError):
    """入力が前提条件を満たさない（メトリック違反、パラメータ範囲外など）"""

    def __init__(self, message: str, report=None, pointer: str | None = None):
        super().__init__(message)
        self.report = report
        self.pointer = pointer


class SchemaError(ValidationError):
    """インスタンスファイルや仕様ファイルの JSON 構造が不正"""

    def __init__(self, message: str, pointer: str = ""):
        super().__init__(f"{pointer or '/'}: {message}", pointer=pointer or "/")


class CapacityError(LpTspError, RuntimeError):
    """設定された容量上限（頂点数・作業量）を超えた"""

    def __init__(self, cap_name: str, limit: int, requested: int):
        super().__init__(f"{cap_name} exceeded: requested {requested}, limit {limit}")
        self.cap_name = cap_name
        self.limit = limit
        self.requested = requested


class StructuralError(LpTspError, RuntimeError):
    """正しい入力では起こり得ない内部状態（LP の実行不能、証明済みの上界の違反など）"""


def check_cap(cap_name: str, limit: int, requested: int) -> None:
    """requested が limit を超えていれば CapacityError を送出する"""
    if requested > limit:
        raise CapacityError(cap_name, limit, requested)
