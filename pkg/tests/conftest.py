import json
import os
import sys
from pathlib import Path

import hypothesis
import pytest

# プロジェクトのディレクトリをパスに追加
sys.path.append(str(Path(__file__).parent.parent))

hypothesis.settings.register_profile("default", max_examples=40, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "default"))

GOLDEN_DIR = Path(__file__).parent / "golden"


@pytest.fixture
def golden():
    """
    初回は値を tests/golden/<name>.json に記録し、2回目以降は記録と比べる。
    浮動小数は相対誤差 rel で比べる。
    """
    def check(name: str, value, rel: float = 1e-9):
        path = GOLDEN_DIR / f"{name}.json"
        if not path.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps(value, indent=2) + "\n", encoding="utf-8")
            return
        recorded = json.loads(path.read_text(encoding="utf-8"))
        if isinstance(value, str):
            # チェックサムなどの文字列は完全一致
            assert recorded == value
        else:
            assert recorded == pytest.approx(value, rel=rel)

    return check
