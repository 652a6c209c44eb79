# -*- coding: utf-8 -*-
"""
utils.py: 汎用ユーティリティ（ファイルIO、正規化 JSON、チェックサム、CSV 整形）
"""
import csv
import hashlib
import io
import json
import math
from pathlib import Path

from .errors import SchemaError


class Utils:
    """ユーティリティクラス"""

    @staticmethod
    def read_text_file(path: str | Path) -> str:
        """テキストファイルを読み込む"""
        return Path(path).read_text(encoding="utf-8")

    @staticmethod
    def write_text_file(path: str | Path, content: str) -> None:
        """テキストファイルを書き込む"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(content, encoding="utf-8")

    @staticmethod
    def read_json(path: str | Path):
        """
        JSON ファイルを読み込む。
        構文エラーはルートを指す JSON ポインタ付きの SchemaError にする。
        """
        text = Utils.read_text_file(path)
        try:
            return json.loads(text)
        except json.JSONDecodeError as e:
            raise SchemaError(f"invalid JSON ({e.msg} at line {e.lineno})", "/") from e

    @staticmethod
    def canonical_json(data) -> str:
        """キー順を保ったまま、区切りと改行を固定した JSON 文字列を返す"""
        return json.dumps(data, ensure_ascii=False, indent=2, allow_nan=False) + "\n"

    @staticmethod
    def write_json(path: str | Path, data) -> None:
        """正規化 JSON を書き込む"""
        Utils.write_text_file(path, Utils.canonical_json(data))

    @staticmethod
    def checksum(data) -> str:
        """正規化 JSON（またはバイト列）の SHA-256"""
        if isinstance(data, (bytes, bytearray)):
            payload = bytes(data)
        else:
            payload = Utils.canonical_json(data).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()

    @staticmethod
    def rows_to_csv(header: list[str], rows: list[list]) -> str:
        """ヘッダと行のリストを CSV 文字列に変換する（改行は \\n に固定）"""
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)
        return buffer.getvalue()

    @staticmethod
    def format_p(p: float) -> str:
        """ノルムの指数を表示用文字列にする（∞ は "inf"）"""
        if math.isinf(p):
            return "inf"
        return f"{p:g}"

    @staticmethod
    def json_number(value: float):
        """JSON に書ける数値に変換する（∞ は文字列 "inf"）"""
        if isinstance(value, float) and math.isinf(value):
            return "inf"
        return value
