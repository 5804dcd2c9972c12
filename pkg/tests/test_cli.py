"""Configuration grammar, dispatch, persistence, and byte-level reproducibility."""

import math

import numpy as np
import pytest

from wsnl.cli import ConfigError, RunConfig, dispatch, main, parse_config, validate_config


class TestParseConfig:
    def test_minimal_file_fills_defaults(self):
        cfg = parse_config("d = 1\nalpha = 0.3\n")
        assert cfg.d == 1 and cfg.alpha == 0.3
        assert cfg.N == 256 and cfg.K == 256 and cfg.T == 0.5
        assert cfg.seed == 2024 and cfg.dealias is True
        assert cfg.provided == {"d", "alpha"}

    def test_comments_and_blank_lines(self):
        cfg = parse_config("# heading\n\nd = 2  # dimension\nalpha = 0.9\n")
        assert cfg.d == 2 and cfg.alpha == 0.9

    def test_alpha_window_violation_cites_constraint(self):
        with pytest.raises(ConfigError) as err:
            parse_config("d = 1\nalpha = 0.2\n")
        assert any("d/4 < alpha < d/2" in e for e in err.value.errors)

    def test_duplicate_key_reports_both_lines(self):
        with pytest.raises(ConfigError) as err:
            parse_config("d = 1\nalpha = 0.3\nd = 2\n")
        msg = "; ".join(err.value.errors)
        assert "duplicate key 'd'" in msg and "line 3" in msg and "line 1" in msg

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError) as err:
            parse_config("dimension = 1\n")
        assert "unknown key" in err.value.errors[0]

    def test_all_errors_collected(self):
        with pytest.raises(ConfigError) as err:
            parse_config("bogus = 1\nno equals sign\nN = seven\n")
        assert len(err.value.errors) == 3

    def test_set_overrides_file_values(self):
        cfg = parse_config("d = 1\nalpha = 0.3\nseed = 5\n", overrides=["seed=9", "N=128"])
        assert cfg.seed == 9 and cfg.N == 128

    def test_ladder_parsing(self):
        cfg = parse_config("ladder = 8, 16, 32\n")
        assert cfg.ladder == (8.0, 16.0, 32.0)

    def test_nyquist_reported_before_compute(self):
        with pytest.raises(ConfigError) as err:
            parse_config("N = 64\nn = 64\n")
        assert "Nyquist" in err.value.errors[0]

    def test_default_alpha_per_dimension(self):
        assert validate_config(RunConfig(d=2)) == []
        assert RunConfig(d=2).resolved_alpha() == 0.9


class TestConstants:
    def test_values_exact(self, tmp_path, capsys):
        code = dispatch("constants", parse_config("d = 2\nalpha = 0.9\n"), out_dir=tmp_path)
        assert code == 0
        out = capsys.readouterr().out
        assert "kappa = 0.6" in out
        assert f"alpha_threshold = {5/6!r}" in out
        assert "pair_p = 4.0" in out and "pair_q = 4.0" in out
        text = (tmp_path / "constants.csv").read_text()
        assert text.splitlines()[0] == "schema_version,name,value"
        assert f"alpha_threshold_weak,{18/20!r}" in text

    def test_full_reference_tables(self, tmp_path):
        # every table value appears exactly for each dimension
        from wsnl.reference import constants_table

        for d, alpha, a_d, weak, s_d in [
            (1, 0.3, 1 / 4, 7 / 20, 3 / 20),
            (2, 0.9, 5 / 6, 18 / 20, 1 / 10),
            (3, 1.45, 17 / 12, 29 / 20, 1 / 24),
        ]:
            table = constants_table(d, alpha)
            assert table["alpha_threshold"] == a_d
            assert table["alpha_threshold_weak"] == weak
            assert table["weak_s_bound"] == s_d


def test_sample_snapshot_reproducible(tmp_path):
    cfg = parse_config("d = 1\nalpha = 0.3\nN = 64\nK = 8\nT = 0.25\nM = 1\nseed = 7\n")
    assert dispatch("sample", cfg, out_dir=tmp_path / "a") == 0
    assert dispatch("sample", cfg, out_dir=tmp_path / "b") == 0
    a = (tmp_path / "a" / "path-0000.wsnl").read_bytes()
    b = (tmp_path / "b" / "path-0000.wsnl").read_bytes()
    assert a == b
    assert a[:4] == b"WSNL"
    summary = (tmp_path / "a" / "path-0000.csv").read_text().splitlines()
    assert summary[0] == "schema_version,t,psi_l2,wick_spatial_mean,ipsi2_l2"
    assert len(summary) == 10  # header + K+1 rows


def test_renorm_subcommand_writes_slope_row(tmp_path):
    cfg = parse_config("d = 1\nalpha = 0.3\n")
    assert dispatch("renorm", cfg, out_dir=tmp_path) == 0
    lines = (tmp_path / "renorm.csv").read_text().splitlines()
    assert lines[0] == "schema_version,record,n,c_n,slope,slope_stderr"
    slope_rows = [l for l in lines if l.split(",")[1] == "slope_increment"]
    assert len(slope_rows) == 1
    slope = float(slope_rows[0].split(",")[4])
    assert slope == pytest.approx(0.4, abs=0.05)
    verdict = (tmp_path / "verdict.txt").read_text()
    assert "overall = PASS" in verdict
    resolved = (tmp_path / "config.resolved").read_text()
    assert "study = renorm_rate" in resolved


def test_study_output_reproducible_byte_for_byte(tmp_path):
    # reduced covariance study run twice, then re-run from its own resolved config
    args = ["--set", "M=200", "--set", "chunk=100", "--set", "K=32", "--set", "N=64", "--set", "n=8"]
    assert main(["covariance", *args, "--seed", "3", "--out", str(tmp_path / "a")]) == 0
    assert main(["covariance", *args, "--seed", "3", "--out", str(tmp_path / "b")]) == 0
    csv_a = (tmp_path / "a" / "covariance.csv").read_bytes()
    assert csv_a == (tmp_path / "b" / "covariance.csv").read_bytes()
    assert main(
        ["covariance", "--config", str(tmp_path / "a" / "config.resolved"), "--out", str(tmp_path / "c")]
    ) == 0
    assert csv_a == (tmp_path / "c" / "covariance.csv").read_bytes()


def test_solve_subcommand_traces(tmp_path):
    cfg = parse_config("d = 1\nalpha = 0.3\nN = 64\nn = 8\nK = 16\nT = 0.25\nseed = 11\n")
    code = dispatch("solve", cfg, out_dir=tmp_path)
    assert code == 0
    lines = (tmp_path / "solve.csv").read_text().splitlines()
    assert lines[0] == "schema_version,t,H_minus_s,Wsq,localized,picard_iters,residual"
    assert len(lines) == 18  # header + K+1 rows
    verdict = (tmp_path / "verdict.txt").read_text()
    assert "completed = True" in verdict


def test_main_error_paths(tmp_path, capsys):
    assert main(["covariance", "--set", "alpha"]) == 2
    assert "KEY=VALUE" in capsys.readouterr().err
    assert main(["constants", "--config", str(tmp_path / "missing.cfg")]) == 2
    assert main(["covariance", "--set", "alpha=0.1"]) == 2
    err = capsys.readouterr().err
    assert "d/4 < alpha < d/2" in err


def test_study_key_must_match_subcommand(tmp_path):
    cfg = parse_config("study = smoothing\n")
    with pytest.raises(ConfigError):
        dispatch("renorm", cfg, out_dir=tmp_path)


def test_infinity_prints_parseable(tmp_path, capsys):
    dispatch("constants", parse_config("d = 1\nalpha = 0.3\n"), out_dir=tmp_path)
    out = capsys.readouterr().out
    assert "pair_p = inf" in out
    assert math.isinf(float("inf"))
