"""Config ingestion, Monte Carlo determinism, sweeps, scenarios, CLI."""

import json
import math
from pathlib import Path

import pytest

from chansim import harness as hz
from chansim.cli import main as cli_main


def base_config(**overrides):
    data = {
        "master_seed": 77,
        "trials": 50,
        "stack": {"type": "hamming74"},
        "error_model": {"type": "random_flip", "p": 0.02},
        "message_bits": 8,
    }
    data.update(overrides)
    return hz.ScenarioConfig(**data)


class TestConfig:
    def test_json_round_trip_reproduces_run(self):
        config = base_config()
        again = hz.ScenarioConfig.from_json(config.to_json())
        assert hz.run_monte_carlo(again) == hz.run_monte_carlo(config)

    def test_zero_trials_rejected(self):
        with pytest.raises(hz.ConfigError, match="trials"):
            base_config(trials=0)

    def test_bad_model_reports_field_path(self):
        with pytest.raises(hz.ConfigError, match="error_model.stages\\[1\\]"):
            hz.build_error_model(
                {"type": "compose", "stages": [{"type": "offset", "b": 1}, {"type": "bogus"}]}
            )

    def test_missing_field_reports_path(self):
        with pytest.raises(hz.ConfigError, match="error_model.p"):
            hz.build_error_model({"type": "random_flip"})

    def test_unknown_stack_type(self):
        with pytest.raises(hz.ConfigError, match="stack.type"):
            hz.build_stack({"type": "quantum"})

    def test_unknown_config_field(self):
        with pytest.raises(hz.ConfigError, match="banana"):
            hz.ScenarioConfig.from_json(json.dumps({
                "master_seed": 1, "trials": 1, "stack": {"type": "raw"},
                "error_model": {"type": "null"}, "banana": 1,
            }))

    def test_override_unknown_path(self):
        with pytest.raises(hz.ConfigError, match="no such config field"):
            base_config().with_override("error_model.sigma", 0.5)


class TestMonteCarlo:
    def test_null_model_zero_residual(self):
        row = hz.run_monte_carlo(base_config(error_model={"type": "null"}))
        assert row.residual_errors == 0
        assert row.raw_errors == 0
        assert row.residual_rate == 0.0

    def test_identical_configs_identical_rows(self):
        assert hz.run_monte_carlo(base_config()) == hz.run_monte_carlo(base_config())

    def test_batch_merge_matches_single_run(self):
        # trials 0..24 and 25..49 as separate aggregations must sum to the
        # full run: per-trial seeds depend only on (master seed, index)
        full = hz.run_monte_carlo(base_config(trials=50))

        from chansim.channel import TrialRng
        from chansim.stack import transmit as _t

        counts = []
        for lo, hi in ((0, 25), (25, 50)):
            cfg = base_config(trials=50)
            stack = hz.build_stack(cfg.stack)
            model = hz.build_error_model(cfg.error_model)
            residual = 0
            for trial in range(lo, hi):
                rng = TrialRng(cfg.master_seed, trial)
                bits = hz._random_bits(rng.stage(hz._MESSAGE_STAGE).generator(), cfg.message_bits)
                message = hz._top_message(stack, bits)
                received, _ = _t(stack, message, model, rng)
                top = stack.layers[0].units(message)
                got = stack.layers[0].units(received)
                residual += sum(1 for j in range(len(top)) if j >= len(got) or got[j] != top[j])
            counts.append(residual)
        assert sum(counts) == full.residual_errors

    def test_analytic_residual_for_hamming(self):
        cfg = base_config(trials=10_000, message_bits=4, master_seed=1234,
                          error_model={"type": "random_flip", "p": 0.01})
        row = hz.run_monte_carlo(cfg)
        p = 0.01
        analytic = 1 - (1 - p) ** 7 - 7 * p * (1 - p) ** 6
        sigma = math.sqrt(analytic * (1 - analytic) / row.units)
        assert abs(row.residual_rate - analytic) <= 3 * sigma

    def test_overhead_ratio(self):
        row = hz.run_monte_carlo(base_config(error_model={"type": "null"}))
        assert row.overhead_ratio == pytest.approx(7 / 4)
        assert row.net_information_per_use == pytest.approx(4 / 7)


class TestSweep:
    def test_rows_in_grid_order_and_null_first(self):
        cfg = base_config(grid={"error_model.p": [0.0, 0.01, 0.1]})
        report = hz.sweep(cfg)
        assert [row.point["error_model.p"] for row in report.rows] == [0.0, 0.01, 0.1]
        assert report.rows[0].residual_errors == 0

    def test_residual_nondecreasing_for_repetition_five(self):
        cfg = hz.ScenarioConfig(
            master_seed=5, trials=60, stack={"type": "repetition", "k": 5},
            error_model={"type": "random_flip", "p": 0.0}, message_bits=100,
            grid={"error_model.p": [0.01, 0.05, 0.1, 0.2, 0.3]},
        )
        report = hz.sweep(cfg)
        rates = [row.residual_rate for row in report.rows]
        assert all(a <= b for a, b in zip(rates, rates[1:]))
        # analytic majority-vote oracle at each grid point
        for row in report.rows:
            p = row.point["error_model.p"]
            analytic = sum(
                math.comb(5, i) * p**i * (1 - p) ** (5 - i) for i in range(3, 6)
            )
            sigma = math.sqrt(analytic * (1 - analytic) / row.units) if analytic else 0.0
            assert abs(row.residual_rate - analytic) <= max(4 * sigma, 1e-9)

    def test_protected_crossing_at_least_twice_unprotected(self):
        grid = {"error_model.p": [round(0.005 + 0.005 * i, 3) for i in range(26)]}
        protected = hz.sweep(hz.ScenarioConfig(
            master_seed=9, trials=100, stack={"type": "repetition", "k": 5},
            error_model={"type": "random_flip", "p": 0.0}, message_bits=200, grid=grid))
        unprotected = hz.sweep(hz.ScenarioConfig(
            master_seed=9, trials=100, stack={"type": "raw"},
            error_model={"type": "random_flip", "p": 0.0}, message_bits=200, grid=grid))
        cp = hz.residual_crossing(protected, "error_model.p", 1e-2)
        cu = hz.residual_crossing(unprotected, "error_model.p", 1e-2)
        assert cp is not None and cu is not None
        assert cp >= 2 * cu

    def test_ci_recomputable(self):
        row = hz.run_monte_carlo(base_config())
        p = row.residual_rate
        assert row.ci99_half_width == pytest.approx(
            hz.Z_99 * math.sqrt(p * (1 - p) / row.units)
        )


class TestScenarios:
    def test_ram_monitor(self, tmp_path):
        summary = hz.scenario("ram-monitor", tmp_path)
        assert summary["flip_bits"] == 8
        assert summary["patch_positions"] == summary["injected_flips"]
        assert summary["restored"] is True
        assert Path(summary["patch_csv"]).exists()

    def test_driver_driven(self, tmp_path):
        summary = hz.scenario("driver-driven", tmp_path)
        assert summary["lag_before"] == [1] * 50
        assert summary["lag_after"] == [0] * 50

    def test_case1(self, tmp_path):
        summary = hz.scenario("case1", tmp_path)
        assert summary["delivered_clean"] is True
        assert summary["received"] == summary["message"]

    def test_contextual(self, tmp_path):
        summary = hz.scenario("contextual", tmp_path)
        for row in summary["rows"]:
            assert row["contextual_errors"] <= row["adjacent_errors"]

    def test_feedback_affine(self, tmp_path):
        summary = hz.scenario("feedback-affine", tmp_path)
        fills = summary["fills"]
        assert fills[9 + 0] > 0 or fills[9] > 0  # burst at round 10 (delay 0)
        assert fills[-1] == 0
        assert abs(summary["final_plant"] - 5.0) <= 1e-3 / 2

    def test_unknown_name(self, tmp_path):
        with pytest.raises(hz.ConfigError, match="unknown scenario"):
            hz.scenario("warp-drive", tmp_path)

    def test_scenario_reruns_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        hz.scenario("feedback-affine", a)
        hz.scenario("feedback-affine", b)
        for name in ("feedback_affine_rounds.csv",):
            assert (a / name).read_bytes() == (b / name).read_bytes()


class TestCli:
    def test_decode_distance_table(self, capsys):
        assert cli_main(["decode", "--signal", "0110001", "--table"]) == 0
        out = capsys.readouterr().out
        assert "corrected: symbol 14 at distance 1" in out
        assert out.splitlines()[1] == "2\t2"

    def test_encode_round_trip(self, capsys):
        assert cli_main(["encode", "--bits", "1101"]) == 0
        line = capsys.readouterr().out.strip()
        assert cli_main(["decode", "--signal", line]) == 0
        assert "exact-match" in capsys.readouterr().out

    def test_channel_offset(self, capsys):
        code = cli_main(["channel", "--model", '{"type":"offset","b":2.0}', "--input", "0110001"])
        assert code == 0
        assert capsys.readouterr().out.strip().split() == ["2.0", "3.0", "3.0", "2.0", "2.0", "2.0", "3.0"]

    def test_bad_model_is_config_error(self, capsys):
        assert cli_main(["channel", "--model", '{"type":"nope"}', "--input", "01"]) == 1

    def test_sweep_and_determinism(self, tmp_path, capsys):
        config = {
            "master_seed": 3, "trials": 20, "stack": {"type": "hamming74"},
            "error_model": {"type": "random_flip", "p": 0.02},
            "message_bits": 8, "grid": {"error_model.p": [0.0, 0.02]},
        }
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(config))
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert cli_main(["sweep", "--config", str(cfg_path), "--out", str(out_a)]) == 0
        assert cli_main(["sweep", "--config", str(cfg_path), "--out", str(out_b)]) == 0
        assert (out_a / "sweep.csv").read_bytes() == (out_b / "sweep.csv").read_bytes()
        assert (out_a / "sweep_summary.json").read_bytes() == (out_b / "sweep_summary.json").read_bytes()
        summary = json.loads((out_a / "sweep_summary.json").read_text())
        assert summary["grid_points"] == 2

    def test_stack_run_writes_report(self, tmp_path, capsys):
        config = {
            "master_seed": 3, "trials": 1, "stack": {"type": "hamming74"},
            "error_model": {"type": "random_flip", "p": 0.01}, "message_bits": 16,
        }
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(config))
        assert cli_main(["stack-run", "--config", str(cfg_path), "--out", str(tmp_path)]) == 0
        lines = (tmp_path / "stack_run_report.csv").read_text().splitlines()
        assert lines[0] == "layer,errors_in,corrected,introduced,errors_out"
        assert lines[1].startswith("bits,")

    def test_feedback_run(self, tmp_path, capsys):
        config = {
            "reference": 5.0,
            "error_function": {"type": "affine", "gain": 1.0, "offset": 2.0},
            "delay": 0, "q": 0.001, "rounds": 12,
        }
        cfg_path = tmp_path / "fb.json"
        cfg_path.write_text(json.dumps(config))
        assert cli_main(["feedback-run", "--config", str(cfg_path), "--out", str(tmp_path)]) == 0
        summary = json.loads((tmp_path / "feedback_summary.json").read_text())
        assert summary["final_plant"] == 5.0

    def test_scenario_subcommand(self, tmp_path, capsys):
        assert cli_main(["scenario", "ram-monitor", "--out", str(tmp_path)]) == 0
        assert (tmp_path / "ram_monitor_summary.json").exists()

    def test_missing_config_file(self, capsys):
        assert cli_main(["sweep", "--config", "/nonexistent/cfg.json"]) == 1

    def test_seed_and_trials_overrides(self, tmp_path, capsys):
        config = {
            "master_seed": 3, "trials": 10, "stack": {"type": "hamming74"},
            "error_model": {"type": "random_flip", "p": 0.05}, "message_bits": 4,
        }
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(config))
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert cli_main(["sweep", "--config", str(cfg_path), "--out", str(out_a)]) == 0
        assert cli_main([
            "sweep", "--config", str(cfg_path), "--seed", "99", "--trials", "40", "--out", str(out_b),
        ]) == 0
        summary = json.loads((out_b / "sweep_summary.json").read_text())
        assert summary["config"]["master_seed"] == 99
        assert summary["config"]["trials"] == 40
        assert (out_a / "sweep.csv").read_bytes() != (out_b / "sweep.csv").read_bytes()

    def test_decode_with_erasures(self, capsys):
        assert cli_main(["decode", "--signal", "01100??"]) == 0
        assert "exact-match: symbol 14" in capsys.readouterr().out

    def test_repetition_codebook_name(self, capsys):
        assert cli_main(["decode", "--codebook", "repetition-5", "--signal", "01000"]) == 0
        assert "symbol 0" in capsys.readouterr().out

    def test_uncorrectable_decode_exit_code(self, tmp_path, capsys):
        book = tmp_path / "book.txt"
        book.write_text("0: 0 0 0 0\n1: 1 1 1 1\n")
        code = cli_main(["decode", "--codebook", str(book), "--signal", "0011"])
        assert code == 2


class TestMapPriorComparison:
    def test_map_beats_nn_significantly(self):
        result = hz.map_prior_comparison(seed=7, symbols=20_000)
        assert result["map_errors"] < result["nn_errors"]
        n10, n01 = result["nn_only_wrong"], result["map_only_wrong"]
        z = (n10 - n01) / math.sqrt(n10 + n01)
        assert z > 2.326  # one-sided 99%
