"""Experiment configs, run artifacts, comparisons, and the CLI."""

import json
import os
from pathlib import Path

import numpy as np
import pytest

from nash_adm import (
    ConfigError,
    ExperimentConfig,
    compare,
    emit_config,
    game_hash,
    game_to_dict,
    generate_game,
    mixing_matrix,
    mixing_to_dict,
    parse_config,
    random_tree,
    run_experiment,
)
from nash_adm.cli import main
from nash_adm.harness import _worker_cap


@pytest.fixture
def small_setup(tmp_path):
    game = generate_game(4, 1, seed=1)
    mix = mixing_matrix(4, random_tree(4, seed=1))
    game_path = tmp_path / "game.json"
    graph_path = tmp_path / "graph.json"
    game_path.write_text(json.dumps(game_to_dict(game)))
    graph_path.write_text(json.dumps(mixing_to_dict(mix)))
    return game, mix, str(game_path), str(graph_path)


def base_config(game_path, graph_path, out_dir, **over):
    data = {
        "game": game_path,
        "graph": graph_path,
        "algorithm": "adm",
        "K": 60,
        "out_dir": str(out_dir),
    }
    data.update(over)
    return data


class TestParseConfig:
    def test_round_trip(self, small_setup, tmp_path):
        _, _, game_path, graph_path = small_setup
        cfg = parse_config(base_config(game_path, graph_path, tmp_path / "r"))
        again = parse_config(emit_config(cfg))
        assert emit_config(again) == emit_config(cfg)

    def test_unknown_key_rejected(self, small_setup, tmp_path):
        _, _, game_path, graph_path = small_setup
        data = base_config(game_path, graph_path, tmp_path / "r", KK=10)
        with pytest.raises(ConfigError, match="unknown config keys: KK"):
            parse_config(data)

    def test_missing_game(self):
        with pytest.raises(ConfigError, match="needs a game"):
            parse_config({"K": 10})

    def test_missing_game_file(self, tmp_path):
        with pytest.raises(ConfigError, match="does not exist"):
            parse_config({"game": str(tmp_path / "absent.json")})

    def test_bad_algorithm(self, small_setup, tmp_path):
        _, _, game_path, graph_path = small_setup
        data = base_config(game_path, graph_path, tmp_path / "r", algorithm="sgd")
        with pytest.raises(ConfigError, match="algorithm"):
            parse_config(data)

    def test_bad_schedule_regime(self, small_setup, tmp_path):
        _, _, game_path, graph_path = small_setup
        data = base_config(
            game_path, graph_path, tmp_path / "r", schedule={"regime": "warp"}
        )
        with pytest.raises(ConfigError, match="regime"):
            parse_config(data)

    def test_label_defaults_to_algorithm(self, small_setup, tmp_path):
        _, _, game_path, graph_path = small_setup
        cfg = parse_config(base_config(game_path, graph_path, tmp_path / "r"))
        assert cfg.label == "adm"

    def test_gap_cadence_survives_as_null(self, small_setup, tmp_path):
        _, _, game_path, graph_path = small_setup
        cfg = parse_config(base_config(game_path, graph_path, tmp_path / "r"))
        assert cfg.gap_every is None
        explicit = parse_config(
            base_config(game_path, graph_path, tmp_path / "r2", gap_every=7)
        )
        assert explicit.gap_every == 7


class TestRunExperiment:
    def test_writes_artifacts_and_summary(self, small_setup, tmp_path):
        _, _, game_path, graph_path = small_setup
        out = tmp_path / "run1"
        summary = run_experiment(base_config(game_path, graph_path, out))
        for name in ("trace.csv", "summary.json", "config.json", "snapshots.json"):
            assert (out / name).is_file(), name
        assert summary["algorithm"] == "adm"
        assert summary["K"] == 60
        assert summary["gradient_evaluations"] == 61
        assert summary["constants"]["L"] > 0
        assert summary["constants"]["mu"] > 0
        assert summary["schedule"]["regime"] == "strong"
        assert summary["final_rel_error"] is not None
        assert summary["game_hash"] == game_hash(generate_game(4, 1, seed=1))
        on_disk = json.loads((out / "summary.json").read_text())
        assert on_disk == summary

    def test_rate_bound_reported_for_certified_run(self, small_setup, tmp_path):
        _, _, game_path, graph_path = small_setup
        summary = run_experiment(base_config(game_path, graph_path, tmp_path / "rb"))
        bound = summary["rate_bound_final_rel_error"]
        assert bound is not None
        assert summary["final_rel_error"] <= bound

    def test_centralized_writes_reference(self, small_setup, tmp_path):
        _, _, game_path, graph_path = small_setup
        out = tmp_path / "central"
        summary = run_experiment(
            {
                "game": game_path,
                "algorithm": "centralized",
                "K": 4000,
                "out_dir": str(out),
            }
        )
        ref = np.asarray(json.loads(Path(summary["x_star_json"]).read_text()))
        assert ref.shape == (4,)

    def test_ddp_consumes_reference_file(self, small_setup, tmp_path):
        _, _, game_path, graph_path = small_setup
        central = run_experiment(
            {
                "game": game_path,
                "algorithm": "centralized",
                "K": 8000,
                "out_dir": str(tmp_path / "c"),
            }
        )
        summary = run_experiment(
            base_config(
                game_path,
                graph_path,
                tmp_path / "d",
                algorithm="ddp",
                x_star=central["x_star_json"],
                K=400,
            )
        )
        assert summary["final_rel_error"] < 0.2

    def test_ddp_on_merely_monotone_needs_alpha(self, tmp_path):
        game = generate_game(4, 1, kind="merely_monotone", seed=1)
        mix = mixing_matrix(4, random_tree(4, seed=1))
        data = {
            "game": game_to_dict(game),
            "graph": mixing_to_dict(mix),
            "algorithm": "ddp",
            "K": 10,
            "out_dir": str(tmp_path / "x"),
        }
        with pytest.raises(ConfigError, match="alpha"):
            run_experiment(data)
        data["alpha"] = 0.05
        summary = run_experiment(data)
        assert summary["schedule"]["alpha"] == 0.05

    def test_strong_schedule_on_merely_monotone_rejected(self, tmp_path):
        game = generate_game(4, 1, kind="merely_monotone", seed=1)
        mix = mixing_matrix(4, random_tree(4, seed=1))
        data = {
            "game": game_to_dict(game),
            "graph": mixing_to_dict(mix),
            "schedule": {"regime": "strong"},
            "K": 10,
            "out_dir": str(tmp_path / "x"),
        }
        with pytest.raises(ConfigError, match="strongly monotone"):
            run_experiment(data)

    def test_monotone_run_defaults_gap_cadence(self, tmp_path):
        game = generate_game(3, 1, kind="merely_monotone", seed=2)
        mix = mixing_matrix(3, random_tree(3, seed=1))
        out = tmp_path / "mono"
        run_experiment(
            {
                "game": game_to_dict(game),
                "graph": mixing_to_dict(mix),
                "K": 60,
                "out_dir": str(out),
            }
        )
        rows = (out / "trace.csv").read_text().strip().splitlines()[1:]
        gaps = [r.split(",")[3] for r in rows]
        filled = [i + 1 for i, g in enumerate(gaps) if g != ""]
        assert filled == [26, 51]

    def test_deterministic_outputs(self, small_setup, tmp_path):
        _, _, game_path, graph_path = small_setup
        a = tmp_path / "a"
        b = tmp_path / "b"
        run_experiment(base_config(game_path, graph_path, a, seed=3, x0="random"))
        run_experiment(base_config(game_path, graph_path, b, seed=3, x0="random"))

        def strip_timing(path):
            rows = path.read_text().strip().splitlines()
            return [",".join(r.split(",")[:4]) for r in rows]

        assert strip_timing(a / "trace.csv") == strip_timing(b / "trace.csv")


class TestCompare:
    def test_two_algorithms_shared_game(self, small_setup, tmp_path):
        _, _, game_path, graph_path = small_setup
        cfg_a = base_config(
            game_path, graph_path, tmp_path / "a", label="accelerated", K=80
        )
        cfg_b = base_config(
            game_path,
            graph_path,
            tmp_path / "b",
            algorithm="ddp",
            label="direct",
            K=80,
        )
        report = compare([cfg_a, cfg_b], tmp_path / "cmp")
        assert report["metric"] == "rel_error"
        assert report["labels"] == ["accelerated", "direct"]
        header = Path(report["csv"]).read_text().splitlines()[0]
        assert header == "iter,accelerated,direct"
        svg = Path(report["svg"]).read_text()
        assert svg.lstrip().startswith("<?xml")
        summaries = json.loads((tmp_path / "cmp" / "compare.json").read_text())
        assert len(summaries["summaries"]) == 2

    def test_mismatched_games_rejected(self, tmp_path):
        g1 = game_to_dict(generate_game(4, 1, seed=1))
        g2 = game_to_dict(generate_game(4, 1, seed=2))
        mix = mixing_to_dict(mixing_matrix(4, random_tree(4, seed=1)))
        cfg_a = {"game": g1, "graph": mix, "K": 10, "out_dir": str(tmp_path / "a"), "label": "x"}
        cfg_b = {"game": g2, "graph": mix, "K": 10, "out_dir": str(tmp_path / "b"), "label": "y"}
        with pytest.raises(ConfigError, match="disagree on the game"):
            compare([cfg_a, cfg_b], tmp_path / "cmp")

    def test_duplicate_labels_rejected(self, small_setup, tmp_path):
        _, _, game_path, graph_path = small_setup
        cfg_a = base_config(game_path, graph_path, tmp_path / "a", label="same")
        cfg_b = base_config(game_path, graph_path, tmp_path / "b", label="same")
        with pytest.raises(ConfigError, match="labels"):
            compare([cfg_a, cfg_b], tmp_path / "cmp")

    def test_duplicate_out_dirs_rejected(self, small_setup, tmp_path):
        _, _, game_path, graph_path = small_setup
        cfg_a = base_config(game_path, graph_path, tmp_path / "a", label="x")
        cfg_b = base_config(game_path, graph_path, tmp_path / "a", label="y")
        with pytest.raises(ConfigError, match="distinct output"):
            compare([cfg_a, cfg_b], tmp_path / "cmp")

    def test_empty_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            compare([], tmp_path / "cmp")

    def test_deterministic_svg(self, small_setup, tmp_path):
        _, _, game_path, graph_path = small_setup
        svgs = []
        for tag in ("one", "two"):
            cfg = base_config(game_path, graph_path, tmp_path / f"r{tag}", K=40)
            report = compare([cfg], tmp_path / f"cmp{tag}")
            svgs.append(Path(report["svg"]).read_bytes())
        assert svgs[0] == svgs[1]


class TestWorkerCap:
    def test_env_override(self, monkeypatch):
        monkeypatch.setenv("NASH_ADM_THREADS", "2")
        assert _worker_cap(8) == 2
        monkeypatch.setenv("NASH_ADM_THREADS", "64")
        assert _worker_cap(3) == 3

    def test_garbage_env_falls_back(self, monkeypatch):
        monkeypatch.setenv("NASH_ADM_THREADS", "many")
        assert 1 <= _worker_cap(8) <= 8

    def test_zero_env_means_serial(self, monkeypatch):
        monkeypatch.setenv("NASH_ADM_THREADS", "0")
        assert _worker_cap(8) == 1


class TestCli:
    def test_generate_is_deterministic(self, tmp_path):
        outs = []
        for tag in ("p", "q"):
            rc = main(
                [
                    "generate",
                    "--n", "6",
                    "--seed", "5",
                    "--out-dir", str(tmp_path / tag),
                ]
            )
            assert rc == 0
            outs.append((tmp_path / tag / "game.json").read_bytes())
        assert outs[0] == outs[1]

    def test_generate_rejects_odd_rotational(self, tmp_path, capsys):
        rc = main(
            [
                "generate",
                "--n", "5",
                "--kind", "rotational",
                "--out-dir", str(tmp_path),
            ]
        )
        assert rc == 2
        assert "error:" in capsys.readouterr().err

    def test_generate_rejects_single_player_merely(self, tmp_path, capsys):
        rc = main(
            ["generate", "--n", "1", "--kind", "merely", "--out-dir", str(tmp_path)]
        )
        assert rc == 2

    def test_run_from_flags(self, tmp_path, capsys):
        rc = main(["generate", "--n", "4", "--seed", "1", "--out-dir", str(tmp_path)])
        assert rc == 0
        rc = main(
            [
                "run",
                "--game", str(tmp_path / "game.json"),
                "--graph", str(tmp_path / "graph.json"),
                "--K", "50",
                "--out-dir", str(tmp_path / "run"),
            ]
        )
        assert rc == 0
        captured = capsys.readouterr().out
        assert "final rel_error" in captured
        assert (tmp_path / "run" / "trace.csv").is_file()

    def test_run_flag_overrides_config_file(self, tmp_path):
        main(["generate", "--n", "4", "--seed", "1", "--out-dir", str(tmp_path)])
        cfg = {
            "game": str(tmp_path / "game.json"),
            "graph": str(tmp_path / "graph.json"),
            "K": 10,
            "out_dir": str(tmp_path / "from_file"),
        }
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        rc = main(
            [
                "run",
                "--config", str(cfg_path),
                "--K", "25",
                "--out-dir", str(tmp_path / "override"),
            ]
        )
        assert rc == 0
        assert not (tmp_path / "from_file").exists()
        written = json.loads((tmp_path / "override" / "config.json").read_text())
        assert written["K"] == 25

    def test_compare_subcommand(self, tmp_path):
        main(["generate", "--n", "4", "--seed", "1", "--out-dir", str(tmp_path)])
        paths = []
        for label, algo in (("fast", "adm"), ("plain", "ddp")):
            cfg = {
                "game": str(tmp_path / "game.json"),
                "graph": str(tmp_path / "graph.json"),
                "algorithm": algo,
                "K": 40,
                "label": label,
                "out_dir": str(tmp_path / label),
            }
            p = tmp_path / f"{label}.json"
            p.write_text(json.dumps(cfg))
            paths.append(str(p))
        rc = main(["compare", *paths, "--out-dir", str(tmp_path / "cmp")])
        assert rc == 0
        assert (tmp_path / "cmp" / "compare.svg").is_file()

    def test_validate_schedule_verdict(self, capsys):
        rc = main(
            [
                "validate-schedule",
                "--regime", "monotone",
                "--L", "1.0",
                "--epsilon", "0.45",
                "--sigma", "0.5",
                "--norm-iw", "1.0",
                "--K", "20000",
            ]
        )
        assert rc == 0
        out = capsys.readouterr().out
        assert "product identity  ok" in out
        assert "dominance from    t = 5373" in out

    def test_validate_schedule_strong(self, capsys, tmp_path):
        report_path = tmp_path / "report.csv"
        rc = main(
            [
                "validate-schedule",
                "--regime", "strong",
                "--L", "1.0",
                "--mu", "0.5",
                "--n", "4",
                "--sigma", "0.0",
                "--norm-iw", "1.0",
                "--K", "50",
                "--out", str(report_path),
            ]
        )
        assert rc == 0
        out = capsys.readouterr().out
        assert "FAILED" not in out
        assert report_path.is_file()

    def test_gap_subcommand(self, tmp_path, capsys):
        main(["generate", "--n", "2", "--seed", "1", "--out-dir", str(tmp_path)])
        audit = tmp_path / "gap.json"
        rc = main(
            [
                "gap",
                "--game", str(tmp_path / "game.json"),
                "--y", "0.5,0.5",
                "--out", str(audit),
            ]
        )
        assert rc == 0
        out = capsys.readouterr().out
        assert "gap" in out
        record = json.loads(audit.read_text())
        assert record["value"] >= 0.0
        assert len(record["maximizer"]) == 2

    def test_gap_needs_a_point(self, tmp_path, capsys):
        main(["generate", "--n", "2", "--seed", "1", "--out-dir", str(tmp_path)])
        rc = main(["gap", "--game", str(tmp_path / "game.json")])
        assert rc == 2

    def test_numeric_failure_exit_code(self, tmp_path, capsys):
        # A tight box would clip runaway steps, so divergence needs room.
        main(
            [
                "generate",
                "--n", "2",
                "--seed", "1",
                "--lo=-1e40",
                "--hi", "1e40",
                "--out-dir", str(tmp_path),
            ]
        )
        with np.errstate(over="ignore"):
            rc = main(
                [
                    "run",
                    "--game", str(tmp_path / "game.json"),
                    "--graph", str(tmp_path / "graph.json"),
                    "--regime", "explicit",
                    "--alpha", "1e300",
                    "--K", "10",
                    "--out-dir", str(tmp_path / "diverge"),
                ]
            )
        assert rc == 3
        assert "numeric failure" in capsys.readouterr().err


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
