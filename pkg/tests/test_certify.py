import pytest

from src import certify
from src.certify import CHECKS, AcceptanceSuite, run_check
from src.errors import StructuralError, ValidationError


@pytest.mark.parametrize("number", [1, 2, 5, 8, 12])
def test_cheap_checks_pass(number):
    result = run_check(number, quick=True)
    assert result.passed, result.detail
    assert result.title == CHECKS[number][0]


@pytest.mark.parametrize("error", [StructuralError("boom"), KeyError("missing"), IndexError("out of range")])
def test_a_raising_check_is_reported_as_failed(monkeypatch, error):
    def broken(quick):
        raise error

    monkeypatch.setitem(certify.CHECKS, 8, ("constants", broken))
    result = run_check(8)
    assert not result.passed
    assert type(error).__name__ in result.detail
    assert result.to_json()["passed"] is False


@pytest.mark.asyncio
async def test_suite_keeps_running_after_a_check_raises(monkeypatch):
    """1つの検査が KeyError を出しても他の検査は結果を返す"""
    def broken(quick):
        raise KeyError("missing")

    monkeypatch.setitem(certify.CHECKS, 8, ("constants", broken))
    results = await AcceptanceSuite(quick=True).run(only=[1, 8])
    assert [r.passed for r in results] == [True, False]


@pytest.mark.asyncio
async def test_suite_reports_progress_in_order():
    messages = []
    results = await AcceptanceSuite(quick=True).run(
        only=[8, 1, 2], progress_callback=lambda msg, pct: messages.append(pct)
    )
    assert [r.number for r in results] == [1, 2, 8]
    assert all(r.passed for r in results)
    assert sorted(messages) == [33, 66, 100]


@pytest.mark.asyncio
async def test_unknown_check_number():
    with pytest.raises(ValidationError):
        await AcceptanceSuite().run(only=[13])
