import pytest

from dopplerkey import cli


def test_parse_defaults(monkeypatch):
    monkeypatch.delenv(cli.OUT_ENV, raising=False)
    inv = cli.parse_args(["timing"])
    assert inv.subcommand == "timing" and str(inv.out) == cli.DEFAULT_OUT and inv.workers == 1


def test_parse_env_out(monkeypatch, tmp_path):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path))
    assert cli.parse_args(["mse"]).out == tmp_path


@pytest.mark.parametrize("argv", [["bogus"], [], ["timing", "--workers", "0"], ["timing", "--trials", "-3"]])
def test_usage_errors_exit_2(argv):
    with pytest.raises(SystemExit) as exc:
        cli.parse_args(argv)
    assert exc.value.code == cli.EXIT_USAGE


def test_run_timing_writes_output(tmp_path, capsys):
    out = tmp_path / "nested" / "dir"
    code = cli.main(["timing", "--out", str(out)])
    assert code == cli.EXIT_OK
    assert (out / "appendix_timing.csv").exists()
    assert (out / "appendix_timing.json").exists()
    assert "appendix_timing" in (out / "appendix_timing.csv").name
    assert capsys.readouterr().out.startswith("timing:")


def test_config_error_exit_3(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("n_pilots = 0\n")
    assert cli.main(["timing", "--config", str(p), "--out", str(tmp_path)]) == cli.EXIT_CONFIG


def test_missing_config_exit_5(tmp_path):
    assert cli.main(["timing", "--config", str(tmp_path / "nope.toml"), "--out", str(tmp_path)]) == cli.EXIT_IO


def test_unwritable_output_exit_5(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["timing", "--out", str(blocker / "sub")]) == cli.EXIT_IO


def test_numerical_failure_exit_4(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise cli.NumericalFailure("did not converge")

    monkeypatch.setattr(cli.harness, "exp_appendix_timing", boom)
    assert cli.main(["timing", "--out", str(tmp_path)]) == cli.EXIT_NUMERICAL


def test_seed_and_trials_override(tmp_path):
    inv = cli.parse_args(["key-rate", "--seed", "5", "--trials", "20000", "--out", str(tmp_path)])
    cfg = cli._scenario(inv)
    assert cfg.master_seed == 5 and cfg.trials == 20000 and cfg.n_durations == 20000
