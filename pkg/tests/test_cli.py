"""Tests for the command-line interface: argument parsing, config-file
merging, precedence rules, and each subcommand end to end."""

import pytest

from cfpinn.cli import build_parser, main
from cfpinn.conformable import analytic_solution
from cfpinn.harness import RunSummary, load_checkpoint

TINY = ["--n-ic", "4", "--n-bc", "4", "--n-f", "16",
        "--layers", "1", "--width", "6", "--lbfgs-max-iters", "20"]


def run_cli(argv, capsys):
    code = main(argv)
    out = capsys.readouterr().out
    assert code == 0
    return out


class TestParser:
    def test_subcommands_exist(self):
        parser = build_parser()
        for cmd in ("forward", "inverse", "sweep-data", "sweep-arch",
                    "export-grid", "eval-oracle"):
            args = parser.parse_args([cmd])
            assert args.command == cmd

    def test_missing_subcommand_exits(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args([])

    def test_lambda_flag_maps_to_lam(self):
        args = build_parser().parse_args(["forward", "--lambda", "0.4"])
        assert args.lam == 0.4

    def test_bad_weights_exit(self, tmp_path):
        with pytest.raises(SystemExit):
            main(["forward", "--weights", "1.0", "--out", str(tmp_path)])


class TestEvalOracle:
    def test_prints_exact_values(self, capsys):
        out = run_cli(["eval-oracle", "--alpha", "0.5",
                       "--t", "0.5,1.0", "--x", "0.0,0.25"], capsys)
        lines = out.splitlines()
        assert lines[0] == "t,x,u_exact"
        t, x, u = (float(v) for v in lines[1].split(","))
        assert (t, x) == (0.5, 0.0)
        assert u == analytic_solution(0.5, 0.5073, 0.5, 0.0)

    def test_mismatched_lists_exit(self):
        with pytest.raises(SystemExit):
            main(["eval-oracle", "--t", "0.5", "--x", "0.0,0.25"])

    def test_missing_lists_exit(self):
        with pytest.raises(SystemExit):
            main(["eval-oracle", "--t", "0.5"])


class TestForwardCommand:
    def test_runs_and_prints_summary(self, tmp_path, capsys):
        out = run_cli(["forward", *TINY, "--alpha", "0.5", "--seed", "1",
                       "--out", str(tmp_path)], capsys)
        summary = RunSummary.from_text(out)
        assert summary["mode"] == "forward"
        assert (tmp_path / "forward_alpha0.5_seed1" / "summary.txt").exists()

    def test_weights_flag_selects_weighted_mode(self, tmp_path, capsys):
        out = run_cli(["forward", *TINY, "--weights", "1.0,0.1",
                       "--out", str(tmp_path)], capsys)
        summary = RunSummary.from_text(out)
        assert summary["mode"] == "forward-weighted"
        assert summary["w_f"] == 0.1

    def test_unit_weights_stay_plain_forward(self, tmp_path, capsys):
        out = run_cli(["forward", *TINY, "--weights", "1,1",
                       "--out", str(tmp_path)], capsys)
        assert RunSummary.from_text(out)["mode"] == "forward"


class TestInverseCommand:
    def test_runs_and_reports_lambda(self, tmp_path, capsys):
        out = run_cli(["inverse", "--n-data", "32", "--adam-steps", "20",
                       "--lbfgs-max-iters", "20", "--layers", "1",
                       "--width", "6", "--noise", "0.01", "--seed", "2",
                       "--out", str(tmp_path)], capsys)
        summary = RunSummary.from_text(out)
        assert summary["mode"] == "inverse"
        assert "lambda_hat" in summary.values
        assert summary["noise_level"] == 0.01


class TestConfigFile:
    def test_file_supplies_values(self, tmp_path, capsys):
        cfg = tmp_path / "run.ini"
        cfg.write_text("[cfpinn]\nalpha = 0.3\nseed = 9\n"
                       f"out = {tmp_path}\n"
                       "n_ic = 4\nn_bc = 4\nn_f = 16\n"
                       "layers = 1\nwidth = 6\nlbfgs_max_iters = 20\n")
        out = run_cli(["forward", "--config", str(cfg)], capsys)
        summary = RunSummary.from_text(out)
        assert summary["alpha"] == 0.3
        assert summary["seed"] == 9
        assert (tmp_path / "forward_alpha0.3_seed9").is_dir()

    def test_cli_overrides_file(self, tmp_path, capsys):
        cfg = tmp_path / "run.ini"
        cfg.write_text("[cfpinn]\nalpha = 0.3\n"
                       f"out = {tmp_path}\n"
                       "n_ic = 4\nn_bc = 4\nn_f = 16\n"
                       "layers = 1\nwidth = 6\nlbfgs_max_iters = 20\n")
        out = run_cli(["forward", "--config", str(cfg), "--alpha", "0.8"],
                      capsys)
        assert RunSummary.from_text(out)["alpha"] == 0.8

    def test_missing_file_exits(self):
        with pytest.raises(SystemExit):
            main(["forward", "--config", "/nonexistent.ini"])

    def test_missing_section_exits(self, tmp_path):
        cfg = tmp_path / "bad.ini"
        cfg.write_text("[other]\nalpha = 0.3\n")
        with pytest.raises(SystemExit):
            main(["forward", "--config", str(cfg)])


class TestSweepCommands:
    def test_sweep_data(self, tmp_path, capsys):
        out = run_cli(["sweep-data", *TINY, "--n-u-list", "8",
                       "--n-f-list", "16", "--out", str(tmp_path)], capsys)
        assert out.splitlines()[0] == "n_u\\n_f,16"
        assert (tmp_path / "sweep_data.csv").read_text(
            encoding="utf-8") == out

    def test_sweep_arch(self, tmp_path, capsys):
        out = run_cli(["sweep-arch", *TINY, "--layers-list", "1",
                       "--width-list", "4", "--out", str(tmp_path)], capsys)
        assert out.splitlines()[0] == "layers\\width,4"
        assert (tmp_path / "sweep_arch.csv").exists()


class TestExportGridCommand:
    def test_exports_from_checkpoint(self, tmp_path, capsys):
        run_cli(["forward", *TINY, "--seed", "1", "--out", str(tmp_path)],
                capsys)
        ckpt = tmp_path / "forward_alpha0.5_seed1" / "checkpoint.txt"
        out_file = tmp_path / "regrid.csv"
        out = run_cli(["export-grid", "--checkpoint", str(ckpt),
                       "--resolution", "6x5", "--out", str(out_file)], capsys)
        assert "wrote" in out
        lines = out_file.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "# resolution 6x5"
        assert len(lines) == 2 + 30
        params, meta = load_checkpoint(ckpt)
        assert meta["alpha"] == 0.5

    def test_missing_checkpoint_flag_exits(self, tmp_path):
        with pytest.raises(SystemExit):
            main(["export-grid", "--out", str(tmp_path)])

    def test_bad_resolution_exits(self, tmp_path, capsys):
        run_cli(["forward", *TINY, "--seed", "1", "--out", str(tmp_path)],
                capsys)
        ckpt = tmp_path / "forward_alpha0.5_seed1" / "checkpoint.txt"
        with pytest.raises(SystemExit):
            main(["export-grid", "--checkpoint", str(ckpt),
                  "--resolution", "banana"])
