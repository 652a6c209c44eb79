import csv
import io
import json
from pathlib import Path

import pytest

from src.main import EXIT_CAPACITY, EXIT_INVALID, EXIT_OK, main, parse_generator
from src.errors import ValidationError

FOUR_POINT = str(Path(__file__).parent.parent / "shared" / "instances" / "four_point.json")


@pytest.mark.asyncio
async def test_solve_exact_four_point(capsys):
    code = await main(["solve", "--algo", "exact", "--p", "2", "--instance", FOUR_POINT])
    assert code == EXIT_OK
    data = json.loads(capsys.readouterr().out)
    assert data["route"] == [0, 1, 2, 3]
    assert data["delays"]["units"] == [0, 101, 302, 402]


@pytest.mark.asyncio
async def test_solve_l1_with_compare(capsys):
    code = await main(["solve", "--algo", "all-norm", "--p", "1", "--instance", FOUR_POINT, "--compare"])
    assert code == EXIT_OK
    data = json.loads(capsys.readouterr().out)
    assert data["exact_objective"] == pytest.approx(8.01)
    assert 1.0 <= data["ratio"] <= 8.0


@pytest.mark.asyncio
async def test_randomized_algorithms_need_a_seed(capsys):
    code = await main(["solve", "--algo", "cover", "--generate", "random_metric:6:1"])
    assert code == EXIT_INVALID
    assert "--seed" in capsys.readouterr().err


@pytest.mark.asyncio
async def test_seeded_cover_is_reproducible(capsys):
    argv = ["solve", "--algo", "cover", "--generate", "random_metric:7:3", "--seed", "11"]
    assert await main(argv) == EXIT_OK
    first = capsys.readouterr().out
    assert await main(argv) == EXIT_OK
    assert capsys.readouterr().out == first


@pytest.mark.asyncio
async def test_source_must_be_unique(capsys):
    code = await main(["solve", "--instance", FOUR_POINT, "--generate", "line:5:1"])
    assert code == EXIT_INVALID
    assert await main(["solve", "--instance", "missing.json"]) == EXIT_INVALID


@pytest.mark.asyncio
async def test_capacity_error_exit_code(monkeypatch, capsys):
    monkeypatch.setenv("LPTSP_WORK_CAP", "3")
    code = await main(["solve", "--algo", "exact", "--generate", "random_metric:6:1"])
    assert code == EXIT_CAPACITY


@pytest.mark.asyncio
async def test_delays_as_csv(capsys):
    code = await main(["solve", "--instance", FOUR_POINT, "--format", "csv"])
    assert code == EXIT_OK
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert rows[0] == ["vertex", "units", "time"]
    assert [int(r[1]) for r in rows[1:]] == [0, 101, 302, 402]


@pytest.mark.asyncio
async def test_generate_writes_an_instance(tmp_path, capsys):
    target = tmp_path / "inst.json"
    code = await main(["generate", "--generate", "line:6:5", "--output", str(target)])
    assert code == EXIT_OK
    data = json.loads(target.read_text(encoding="utf-8"))
    assert data["n"] == 6
    assert data["geometry"] == "line"


@pytest.mark.asyncio
async def test_verify_simple(capsys):
    code = await main(["verify", "simple", "--n", "2100", "--eps", "0.001"])
    assert code == EXIT_OK
    data = json.loads(capsys.readouterr().out)
    assert data["minimum"] >= 1.67
    assert data["direct"][0] == pytest.approx(data["r_inf"])


@pytest.mark.asyncio
async def test_verify_allnorm_on_a_generated_line(capsys):
    code = await main(["verify", "allnorm", "--instance", FOUR_POINT, "--norms", "1,2,inf"])
    assert code == EXIT_OK
    data = json.loads(capsys.readouterr().out)
    assert data["norms"] == ["1", "2", "inf"]
    assert len(data["candidates"]) == 3


@pytest.mark.asyncio
async def test_certify_subset(capsys):
    assert await main(["certify", "--quick", "--only", "1,8"]) == EXIT_OK
    results = json.loads(capsys.readouterr().out)
    assert [r["number"] for r in results] == [1, 8]
    assert await main(["certify", "--only", "x"]) == EXIT_INVALID


def test_parse_generator():
    assert parse_generator("tree:8:2") == ("tree", 8, 2)
    with pytest.raises(ValidationError):
        parse_generator("tree:8")
    with pytest.raises(ValidationError):
        parse_generator("star:8:2")
    with pytest.raises(ValidationError):
        parse_generator("tree:eight:2")
