import json
import logging

import pytest
from click.testing import CliRunner

import app.main as app_main
from app.core.errors import InvariantViolation
from app.core.gluing import ModelParams
from app.main import cli, main
from app.monitoring import get_run_logger
from app.services.sampler import sample_record


@pytest.fixture(autouse=True)
def restore_root_logging():
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


@pytest.fixture
def runner():
    return CliRunner()


def _lines(result):
    return result.stdout.strip().splitlines()


def test_sample_jsonl(runner):
    result = runner.invoke(cli, ["sample", "--model", "sprime", "--n", "20", "--m", "3", "--samples", "4", "--seed", "5"])
    assert result.exit_code == 0, result.output
    records = [json.loads(line) for line in _lines(result)]
    assert [r["index"] for r in records] == [0, 1, 2, 3]
    assert records[2] == sample_record(ModelParams("sprime", 20, 3), 5, 2)


def test_sample_is_reproducible(runner):
    args = ["sample", "--model", "t", "--n", "6", "--m", "2", "--t", "4", "--samples", "5", "--seed", "9"]
    assert runner.invoke(cli, args).stdout == runner.invoke(cli, args).stdout


def test_sample_csv_header(runner):
    result = runner.invoke(cli, ["sample", "--model", "s", "--n", "6", "--m", "1", "--samples", "2", "--format", "csv"])
    assert result.exit_code == 0
    assert _lines(result)[0] == "model,n,m,t,seed,index,B,I,genus,chi,components,connected"
    assert len(_lines(result)) == 3


def test_sample_to_file(runner, tmp_path):
    out = tmp_path / "samples.jsonl"
    result = runner.invoke(cli, ["sample", "--model", "tprime", "--n", "4", "--m", "2", "--samples", "3", "--out", str(out)])
    assert result.exit_code == 0
    assert len(out.read_text().splitlines()) == 3


def test_oracle_square(runner):
    result = runner.invoke(cli, ["oracle", "--model", "s", "--n", "4"])
    assert result.exit_code == 0
    assert _lines(result) == [
        "B,genus,connected,numerator,denominator",
        "0,0,true,2,3",
        "0,1,true,1,3",
    ]


def test_oracle_two_gon(runner):
    result = runner.invoke(cli, ["oracle", "--model", "sprime", "--n", "2"])
    assert _lines(result)[1:] == ["0,0,true,1,1"]


def test_oracle_guard_is_runtime_failure(runner):
    result = runner.invoke(cli, ["oracle", "--model", "s", "--n", "40"])
    assert result.exit_code == 2
    assert "Error:" in result.stderr


@pytest.mark.parametrize(
    "args",
    [
        ["sample", "--model", "s", "--n", "3"],
        ["sample", "--model", "sprime", "--n", "4", "--m", "5"],
        ["sample", "--n", "4"],
        ["sample", "--model", "sprime", "--n", "4", "--threads", "-2"],
        ["dist", "--model", "sprime", "--n", "4", "--samples", "1"],
        ["stirling", "--m", "0"],
        ["verify", "--only", "nonsense"],
    ],
)
def test_invalid_input_exits_with_validation_code(runner, args):
    assert runner.invoke(cli, args).exit_code == 1


def test_usage_errors_through_main():
    assert main(["sample", "--model", "cube"]) == 1
    assert main(["no-such-command"]) == 1


def test_main_returns_zero_on_success(capsys):
    assert main(["stirling", "--m", "3"]) == 0
    assert "1,2,1,3,0.33333333333333331" in capsys.readouterr().out


def test_stirling(runner):
    result = runner.invoke(cli, ["stirling", "--m", "4"])
    assert result.exit_code == 0
    lines = _lines(result)
    assert lines[0] == "b,stirling,numerator,denominator,probability"
    assert lines[2].startswith("2,11,11,24,")


def test_dist_writes_histogram_and_report(runner, tmp_path):
    out = tmp_path / "hist.csv"
    result = runner.invoke(cli, ["dist", "--model", "sprime", "--n", "40", "--m", "4", "--samples", "200", "--seed", "3", "--out", str(out)])
    assert result.exit_code == 0, result.output
    header = out.read_text().splitlines()[0]
    assert header == "B,genus,count,b_hat,g_hat"
    report = json.loads((tmp_path / "hist.csv.moments.json").read_text())
    assert report["moments"]["K"] == 200
    assert sum(report["marginals"]["B"].values()) == 200
    assert set(report) >= {"header", "finite_size_targets", "asymptotic_targets", "connected_fraction"}


def test_dist_to_stdout_appends_report(runner):
    result = runner.invoke(cli, ["dist", "--model", "s", "--n", "10", "--m", "1", "--samples", "50"])
    assert result.exit_code == 0
    lines = _lines(result)
    assert lines[0] == "B,genus,count"
    report = json.loads(lines[-1])
    assert "finite_size_targets" not in report
    assert "asymptotic_targets" not in report


def test_verify_single_criterion(runner):
    result = runner.invoke(cli, ["verify", "--only", "restriction"])
    assert result.exit_code == 0, result.output
    (record,) = [json.loads(line) for line in _lines(result)]
    assert record["id"] == "restriction" and record["passed"] is True


def test_runs_are_written_to_ledger(runner):
    runner.invoke(cli, ["oracle", "--model", "s", "--n", "4"])
    entry = get_run_logger().get_recent_runs(1)[0]
    assert entry["command"] == "oracle" and entry["success"] is True and entry["n"] == 4


def test_unexpected_failure_is_runtime_error(runner, monkeypatch):
    def broken(params):
        raise InvariantViolation("chi mismatch")

    monkeypatch.setattr(app_main, "exact_joint", broken)
    result = runner.invoke(cli, ["oracle", "--model", "s", "--n", "4"])
    assert result.exit_code == 2
    assert "Error: chi mismatch" in result.stderr
    entry = get_run_logger().get_recent_runs(1)[0]
    assert entry["command"] == "oracle" and entry["success"] is False
