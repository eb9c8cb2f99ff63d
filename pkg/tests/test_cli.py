import pytest

from nshr.cli import EXIT_OK, EXIT_UNSATISFIED, EXIT_USAGE, parse_and_dispatch
from nshr.services.bench import METADATA_FILE, read_series_csv


def run(capsys, *args):
    code = parse_and_dispatch(["--no-log-file", *args])
    out, err = capsys.readouterr()
    return code, out, err


def test_validate_satisfied(capsys):
    code, out, _ = run(capsys, "validate", "--assumption", "B", "--alpha", "4", "--p", "0.5", "--c", "0.01")
    assert code == EXIT_OK
    assert "assumption=B" in out.splitlines()
    assert "satisfied=true" in out.splitlines()


def test_validate_unsatisfied_has_its_own_exit_code(capsys):
    code, out, _ = run(capsys, "validate", "--assumption", "B", "--alpha", "4", "--p", "1.5", "--c", "1")
    assert code == EXIT_UNSATISFIED
    assert "satisfied=false" in out.splitlines()


def test_validate_monotone_assumptions(capsys):
    code, _, _ = run(capsys, "validate", "--assumption", "D", "--alpha", "4", "--sigma", "1.5", "--p", "2", "--c", "1")
    assert code == EXIT_OK
    code, _, _ = run(capsys, "validate", "--assumption", "D", "--alpha", "4", "--p", "0.5", "--c", "0.01")
    assert code == EXIT_UNSATISFIED


@pytest.mark.parametrize("args", [
    ["simulate", "--no-such-flag"],
    ["validate"],
    ["bench", "--plan", "everything"],
    ["simulate", "--x0", "twenty"],
    ["simulate", "--samples", "1"],
])
def test_usage_errors_exit_2(capsys, args):
    code, _, err = run(capsys, *args)
    assert code == EXIT_USAGE
    assert err


def test_config_file_matches_flags(capsys, tmp_path):
    conf = tmp_path / "validate.env"
    conf.write_text("assumption=B\nalpha=4\n--p=1.5\nc=1\n", encoding="utf8")
    by_file = run(capsys, "validate", "--assumption", "D", "--config", str(conf))
    by_flags = run(capsys, "validate", "--assumption", "B", "--alpha", "4", "--p", "1.5", "--c", "1")
    assert by_file[:2] == by_flags[:2]


def test_config_file_rejects_unknown_keys(capsys, tmp_path):
    conf = tmp_path / "bad.env"
    conf.write_text("gamma=3\n", encoding="utf8")
    code, _, err = run(capsys, "validate", "--assumption", "B", "--config", str(conf))
    assert code == EXIT_USAGE
    assert "gamma" in err


def test_simulate_writes_the_diagnostics(capsys, tmp_path):
    out_dir = tmp_path / "out"
    code, out, _ = run(capsys, "simulate", "--t-end", "3", "--samples", "20", "--out", str(out_dir))
    assert code == EXIT_OK
    written = out.splitlines()
    assert str(out_dir / "nshr.csv") in written
    assert str(out_dir / METADATA_FILE) in written
    series = read_series_csv(out_dir / "nshr.csv")
    assert len(series) == 20
    assert series.t[0] == 1.0 and series.t[-1] == 3.0


def test_simulate_baseline_key_uses_underscores(capsys, tmp_path):
    code, _, _ = run(capsys, "simulate", "--dynamic", "baseline-unit", "--t-end", "2", "--samples", "10",
                     "--out", str(tmp_path))
    assert code == EXIT_OK
    assert (tmp_path / "baseline_unit.csv").exists()


def test_dnshr_command(capsys, tmp_path):
    code, _, _ = run(capsys, "dnshr", "--n", "25", "--out", str(tmp_path))
    assert code == EXIT_OK
    assert len(read_series_csv(tmp_path / "dnshr.csv")) == 25
    meta = (tmp_path / METADATA_FILE).read_text(encoding="utf8").splitlines()
    assert "dnshr.stop_reason=max_iterations" in meta


def test_help_lists_the_flags(capsys):
    code, out, _ = run(capsys, "simulate", "--help")
    assert code == EXIT_OK
    for flag in ("--dynamic", "--alpha", "--beta", "--t-end", "--x0", "--abs-tol", "--samples", "--config"):
        assert flag in out


def test_factory_returns_the_command_group():
    from nshr import create_cli
    from nshr.cli import cli

    assert create_cli() is cli
    assert set(cli.commands) == {"simulate", "bench", "validate", "dnshr"}


@pytest.mark.parametrize("args", [
    ["validate", "--assumption", "B", "--alpha", "3"],
    ["validate", "--assumption", "D", "--sigma", "5"],
    ["simulate", "--t-end", "0.5"],
])
def test_out_of_range_parameters_exit_2_without_traceback(capsys, args):
    code, out, err = run(capsys, *args)
    assert code == EXIT_USAGE
    assert out == ""
    assert "Traceback" not in err
    errors = [line for line in err.splitlines() if line.startswith("Error: ")]
    assert len(errors) == 1


def test_dispatch_through_an_explicit_group(capsys):
    from nshr import create_cli

    code = parse_and_dispatch(["--no-log-file", "validate", "--assumption", "B"], create_cli())
    out, _ = capsys.readouterr()
    assert code == EXIT_OK
    assert "satisfied=true" in out.splitlines()
