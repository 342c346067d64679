"""Command-line surface: exit codes, config layering, file outputs."""
import numpy as np
import pytest

from navrl import cli, tasks, worldsim
from navrl.apf_baseline import ApfP2PPolicy
from navrl.cli import main
from navrl.neural import load_policy


class TestParsing:
    def test_no_subcommand_is_usage_error(self, capsys):
        assert main([]) == 1
        assert "usage error" in capsys.readouterr().err

    def test_unknown_override_key(self, capsys):
        assert main(["mapgen", "not_a_key=3"]) == 1
        assert "unknown configuration key" in capsys.readouterr().err

    def test_bad_value(self, capsys):
        assert main(["mapgen", "map_width=wide"]) == 1
        assert "bad value" in capsys.readouterr().err

    def test_override_without_equals(self, capsys):
        assert main(["mapgen", "map_width"]) == 1

    def test_negative_seed(self, capsys):
        assert main(["mapgen", "--seed", "-4"]) == 1

    def test_help_exits_zero(self):
        with pytest.raises(SystemExit) as exc:
            main(["mapgen", "-h"])
        assert exc.value.code == 0

    def test_pairs_syntax(self):
        assert cli._pairs("2:5, 6:9") == ((2.0, 5.0), (6.0, 9.0))
        with pytest.raises(ValueError):
            cli._pairs("2-5")

    def test_bool_values(self):
        assert cli._bool("Yes") and cli._bool("1") and cli._bool("true")
        assert not cli._bool("off")
        with pytest.raises(ValueError):
            cli._bool("2")


class TestConfigFile:
    def test_file_overrides_defaults_cli_overrides_file(self, tmp_path):
        conf = tmp_path / "run.conf"
        conf.write_text("map_style = empty   # comment\n"
                        "\n"
                        "map_width = 12.0\n", encoding="ascii")
        cfg = cli.build_config("mapgen", conf, ["map_width=8.0"])
        assert cfg["map_style"] == "empty"
        assert cfg["map_width"] == 8.0
        assert cfg["map_height"] == 10.0   # untouched default

    def test_unknown_key_in_file(self, tmp_path):
        conf = tmp_path / "run.conf"
        conf.write_text("mystery = 1\n", encoding="ascii")
        assert main(["mapgen", "--config", str(conf)]) == 1

    def test_malformed_line(self, tmp_path):
        conf = tmp_path / "run.conf"
        conf.write_text("map_width 8\n", encoding="ascii")
        assert main(["mapgen", "--config", str(conf)]) == 1

    def test_missing_config_file(self):
        assert main(["mapgen", "--config", "/nonexistent.conf"]) == 1


class TestMapgen:
    def test_writes_loadable_map(self, tmp_path, capsys):
        out = tmp_path / "o"
        assert main(["mapgen", "--out", str(out), "map_style=empty",
                     "map_width=6", "map_height=4",
                     "map_resolution=0.5"]) == 0
        grid = worldsim.load_map(out / "empty.map")
        assert grid.extent == (6.0, 4.0)
        assert "wrote" in capsys.readouterr().out

    def test_deterministic_in_seed(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for d in (a, b):
            assert main(["mapgen", "--out", str(d), "--seed", "9",
                         "map_style=boxes"]) == 0
        assert (a / "boxes.map").read_text() == (b / "boxes.map").read_text()


class TestReplayCommand:
    def test_end_to_end(self, tmp_path, capsys):
        grid = worldsim.generate_map(
            worldsim.MapSpec(10.0, 10.0, 0.1, style="empty"))
        worldsim.save_map(grid, tmp_path / "m.map")
        env = tasks.NavEnv(grid, tasks.TaskConfig(
            kind="p2p", noise=worldsim.NoiseParams.zero(),
            fixed_start=(2.0, 5.0, 0.0), fixed_goal=(7.0, 5.0),
            max_steps=100))
        res = tasks.run_episode(env, ApfP2PPolicy(), seed=0,
                                record_trajectory=True)
        tasks.save_trajectory(res.trajectory, tmp_path / "ep.traj")
        out = tmp_path / "o"
        assert main(["replay", "--out", str(out),
                     f"trajectory={tmp_path / 'ep.traj'}",
                     f"map_file={tmp_path / 'm.map'}"]) == 0
        stdout = capsys.readouterr().out
        assert "path length" in stdout and "outcome" in stdout
        pts = (out / "replay_points.txt").read_text().strip().split("\n")
        assert pts[0] == "x y" and len(pts) == len(res.trajectory) + 1

    def test_missing_keys_is_usage_error(self, tmp_path):
        assert main(["replay", "--out", str(tmp_path)]) == 1

    def test_missing_file_is_runtime_error(self, tmp_path, capsys):
        assert main(["replay", "--out", str(tmp_path),
                     "trajectory=/none.traj", "map_file=/none.map"]) == 2
        assert "error:" in capsys.readouterr().err


class TestEvalCommands:
    def test_eval_writes_metrics(self, tmp_path, capsys):
        out = tmp_path / "o"
        code = main(["eval", "--out", str(out), "--seed", "3",
                     "map_style=empty", "policy=apf", "episodes=2",
                     "lidar_grid=0", "localize_grid=0",
                     "process_grid=0:0", "obstacle_grid=0",
                     "dist_bins=2:4", "max_steps=200"])
        assert code == 0
        metrics = (out / "metrics.csv").read_text().strip().split("\n")
        assert len(metrics) == 2   # header + one cell
        episodes = (out / "episodes.csv").read_text().strip().split("\n")
        assert len(episodes) == 3
        assert "success" in capsys.readouterr().out

    def test_baseline_apf_alias(self, tmp_path):
        out = tmp_path / "o"
        code = main(["baseline-apf", "--out", str(out), "--seed", "5",
                     "map_style=empty", "episodes=2", "lidar_grid=0",
                     "localize_grid=0", "process_grid=0:0",
                     "dist_bins=2:4", "max_steps=200"])
        assert code == 0
        assert (out / "metrics.csv").exists()

    def test_grid_cross_product_rows(self, tmp_path):
        out = tmp_path / "o"
        code = main(["eval", "--out", str(out), "map_style=empty",
                     "policy=scripted", "episodes=1",
                     "lidar_grid=0,0.3", "localize_grid=0",
                     "process_grid=0:0", "obstacle_grid=0,3",
                     "dist_bins=2:4", "max_steps=40"])
        assert code == 0
        rows = (out / "metrics.csv").read_text().strip().split("\n")
        assert len(rows) == 1 + 4


class TestTrainCommand:
    def test_tiny_run_saves_networks(self, tmp_path, capsys):
        out = tmp_path / "o"
        code = main(["train", "--out", str(out), "--seed", "1",
                     "map_style=empty", "map_width=8", "map_height=8",
                     "kind=p2p", "max_steps=60", "total_steps=400",
                     "warmup_steps=300", "batch_size=64",
                     "actor_hidden=24,24,24", "critic_embed=24,24",
                     "critic_joint=24,24", "sigma_lidar=0",
                     "sigma_speed=0", "sigma_turning=0",
                     "sigma_localize=0"])
        assert code == 0
        actor = load_policy(out / "actor.net")
        assert actor.obs_dim == 3 * (64 + 2)
        load_policy(out / "critic.net")
        assert "trained 400 steps" in capsys.readouterr().out


class TestShapeCommand:
    def test_tiny_reward_phase(self, tmp_path, capsys):
        out = tmp_path / "o"
        code = main(["shape-reward", "--out", str(out), "--seed", "2",
                     "map_style=empty", "map_width=8", "map_height=8",
                     "kind=p2p", "max_steps=50", "train_steps=350",
                     "warmup_steps=260", "batch_size=64",
                     "actor_hidden=16,16,16", "critic_embed=16,16",
                     "critic_joint=16,16", "n_trials=2", "n_parallel=2",
                     "shape_eval_episodes=2", "serial=true",
                     "sigma_lidar=0", "sigma_speed=0", "sigma_turning=0",
                     "sigma_localize=0"])
        assert code == 0
        db = (out / "study.db").read_text().strip().split("\n")
        assert len(db) == 2
        weights = (out / "best_reward_weights.txt").read_text().split()
        assert len(weights) == 6
        assert all(0.0 <= float(w) <= 1.0 for w in weights)
        assert "phase reward" in capsys.readouterr().out
