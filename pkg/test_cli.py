import json

import pytest
from click.testing import CliRunner

from conftest import AFFINE, QUADRIC_5, TEST_STARTS
from src.classes.Certificate import KAZDAN_WARNER_NOTE, NO_CONCLUSION
from src.classes.ShadowFlow import CONCENTRATES
from src.cli import EXIT_HYPOTHESIS, EXIT_NO_CONCLUSION, EXIT_OK, EXIT_USAGE, cli

STARTS = ["--starts", str(TEST_STARTS)]


@pytest.fixture
def runner():
    return CliRunner(mix_stderr=False)


def test_analyze_quadric(runner, tmp_path):
    result = runner.invoke(cli, ["analyze", "--field", QUADRIC_5, *STARTS, "--out", str(tmp_path)])
    assert result.exit_code == EXIT_NO_CONCLUSION, result.stderr
    report = json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))
    assert report["certificate"]["degree"] == 0
    assert report["certificate"]["verdict"]["kind"] == NO_CONCLUSION
    assert report["config"]["search"]["starts"] == TEST_STARTS
    assert "verdict: NoConclusion" in result.stderr

    again = runner.invoke(cli, ["analyze", "--field", QUADRIC_5, *STARTS, "--out", str(tmp_path)])
    assert again.exit_code == EXIT_USAGE
    assert "already exists" in again.stderr


def test_analyze_is_byte_reproducible(runner, tmp_path):
    for name in ("a", "b"):
        result = runner.invoke(cli, ["analyze", "--field", QUADRIC_5, *STARTS, "--out", str(tmp_path / name)])
        assert result.exit_code == EXIT_NO_CONCLUSION
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()


def test_analyze_affine_notes_kazdan_warner(runner):
    result = runner.invoke(cli, ["analyze", "--field", AFFINE, *STARTS])
    assert result.exit_code == EXIT_NO_CONCLUSION
    report = json.loads(result.stdout)
    assert report["inputs"]["affine"]
    assert KAZDAN_WARNER_NOTE in report["caveats"]


def test_analyze_text_format(runner, tmp_path):
    result = runner.invoke(cli, ["analyze", "--field", AFFINE, *STARTS, "--format", "text", "--out", str(tmp_path)])
    assert result.exit_code == EXIT_NO_CONCLUSION
    assert "NoConclusion" in (tmp_path / "report.txt").read_text(encoding="utf-8")


@pytest.mark.parametrize("field", ["3", "0.5 + x5"])
def test_hypothesis_failures(runner, field):
    result = runner.invoke(cli, ["analyze", "--field", field, *STARTS])
    assert result.exit_code == EXIT_HYPOTHESIS
    assert "error:" in result.stderr


@pytest.mark.parametrize(
    "args",
    [
        ["analyze", "--field", "2 + "],
        ["analyze", "--field", "2 + y5"],
        ["analyze"],
        ["analyze", "--field", AFFINE, "--starts", "0"],
        ["nonsense"],
    ],
)
def test_usage_errors(runner, args):
    assert runner.invoke(cli, args).exit_code == EXIT_USAGE


def test_config_file(runner, tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"field": AFFINE, "search": {"starts": TEST_STARTS}}), encoding="utf-8")
    result = runner.invoke(cli, ["critical-points", "--config", str(cfg)])
    assert result.exit_code == EXIT_OK
    doc = json.loads(result.stdout)
    assert len(doc["critical_points"]) == 2
    assert doc["h0"]["passed"]

    cfg.write_text(json.dumps({"field": AFFINE, "colour": "blue"}), encoding="utf-8")
    result = runner.invoke(cli, ["critical-points", "--config", str(cfg)])
    assert result.exit_code == EXIT_USAGE
    assert "colour" in result.stderr


def test_missing_config_file(runner, tmp_path):
    result = runner.invoke(cli, ["analyze", "--config", str(tmp_path / "missing.json")])
    assert result.exit_code == EXIT_USAGE


def test_matrix_subcommand(runner):
    result = runner.invoke(cli, ["matrix", "north,south", "--field", QUADRIC_5, *STARTS])
    assert result.exit_code == EXIT_OK, result.stderr
    doc = json.loads(result.stdout)
    assert doc["members"] == ["y1", "y2"]
    assert doc["iota"] == 1
    assert doc["rho"] == pytest.approx(6.125 / 48 - 1 / (32 * 3.141592653589793**2), rel=1e-9)

    assert runner.invoke(cli, ["matrix", "north,bogus", "--field", QUADRIC_5, *STARTS]).exit_code == EXIT_USAGE
    assert runner.invoke(cli, ["matrix", "north,y2", "--field", QUADRIC_5, *STARTS]).exit_code == EXIT_USAGE


def test_certificate_subcommand(runner, tmp_path):
    result = runner.invoke(cli, ["certificate", "--field", QUADRIC_5, *STARTS, "--out", str(tmp_path)])
    assert result.exit_code == EXIT_NO_CONCLUSION
    doc = json.loads((tmp_path / "certificate.json").read_text(encoding="utf-8"))
    assert doc["certificate"]["partial_sums"] == [0, 2, -1, 3, 0, 2, 1]
    assert doc["caveats"]


def test_constants_subcommand(runner):
    result = runner.invoke(cli, ["constants"])
    assert result.exit_code == EXIT_OK
    doc = json.loads(result.stdout)
    assert doc["c0"]["value"] == pytest.approx(2 * 2**0.5)
    assert doc["S4"]["rel_error"] < 1e-9


def test_flow_subcommand(runner, tmp_path):
    result = runner.invoke(cli, ["flow", "north", "--field", AFFINE, *STARTS])
    assert result.exit_code == EXIT_OK, result.stderr
    doc = json.loads(result.stdout)
    assert doc["subset"] == ["north"]
    assert doc["verdict"] == CONCENTRATES

    assert runner.invoke(cli, ["flow", "north", "--field", AFFINE, "--trajectory"]).exit_code == EXIT_USAGE

    result = runner.invoke(
        cli, ["flow", "north", "--field", AFFINE, *STARTS, "--horizon", "1", "--trajectory", "--out", str(tmp_path)]
    )
    assert result.exit_code == EXIT_OK
    assert (tmp_path / "flow.json").exists()
    assert (tmp_path / "trajectory.csv").read_text(encoding="utf-8").startswith("t,s1,")


def test_version(runner):
    result = runner.invoke(cli, ["--version"])
    assert result.exit_code == EXIT_OK
    assert "curvature_twin" in result.stdout
