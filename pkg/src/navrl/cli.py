"""Command-line front end.

Every subcommand reads one flat configuration namespace assembled from three
layers: built-in defaults, then ``--config`` file lines (``key = value``),
then positional ``key=value`` overrides.  Unknown keys are rejected rather
than ignored so a typo cannot silently fall back to a default.

Exit codes: 0 success, 1 usage/configuration error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import ddpg, evaluation, shaping, tasks, worldsim
from .worldsim import MapSpec, NoiseParams


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage; the contract reserves 2 for runtime
    def error(self, message):
        raise UsageError(message)


# -- configuration schema --------------------------------------------------

def _bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _floats(raw: str):
    return tuple(float(tok) for tok in raw.split(",") if tok.strip())


def _ints(raw: str):
    return tuple(int(tok) for tok in raw.split(",") if tok.strip())


def _pairs(raw: str):
    """Comma-separated colon pairs: '0.1:0.1,0:0' -> ((0.1,0.1),(0.0,0.0))."""
    out = []
    for tok in raw.split(","):
        tok = tok.strip()
        if not tok:
            continue
        a, sep, b = tok.partition(":")
        if not sep:
            raise ValueError(f"expected lo:hi pair, got {tok!r}")
        out.append((float(a), float(b)))
    return tuple(out)


@dataclasses.dataclass
class _Key:
    convert: object
    default: object
    help: str = ""


_MAP_KEYS = {
    "map_file": _Key(str, "", "load a saved map instead of generating one"),
    "map_style": _Key(str, "boxes", "empty | corridor | boxes | rooms"),
    "map_width": _Key(float, 10.0, "world width, m"),
    "map_height": _Key(float, 10.0, "world height, m"),
    "map_resolution": _Key(float, 0.1, "cell size, m"),
    "corridor_width": _Key(float, 2.0, ""),
    "n_boxes": _Key(int, 3, ""),
    "box_min": _Key(float, 0.5, ""),
    "box_max": _Key(float, 1.5, ""),
    "room_min_size": _Key(float, 3.0, ""),
    "door_width": _Key(float, 1.0, ""),
    "map_seed": _Key(int, 0, "procedural generation seed"),
}

_TASK_KEYS = {
    "kind": _Key(str, "p2p", "p2p | pf"),
    "max_steps": _Key(int, 500, ""),
    "n_obstacles": _Key(int, 0, "moving obstacles per episode"),
    "sigma_lidar": _Key(float, 0.3, ""),
    "sigma_speed": _Key(float, 0.1, ""),
    "sigma_turning": _Key(float, 0.1, ""),
    "sigma_localize": _Key(float, 0.1, ""),
    "reward_weights": _Key(_floats, (), "task-length vector; empty = default"),
    "goal_dist_min": _Key(float, 2.0, ""),
    "goal_dist_max": _Key(float, 5.0, ""),
    "min_path_length": _Key(float, 3.0, "pf scenario filter"),
}

_TRAIN_KEYS = {
    "total_steps": _Key(int, 100_000, ""),
    "gamma": _Key(float, 0.99, ""),
    "actor_lr": _Key(float, 1e-4, ""),
    "critic_lr": _Key(float, 1e-3, ""),
    "tau": _Key(float, 0.005, "target soft-update rate"),
    "batch_size": _Key(int, 256, ""),
    "buffer_capacity": _Key(int, 500_000, ""),
    "warmup_steps": _Key(int, 5_000, ""),
    "noise_v": _Key(float, 0.1, ""),
    "noise_w": _Key(float, 0.2, ""),
    "noise_final_frac": _Key(float, 0.1, ""),
    "actor_hidden": _Key(_ints, (64, 64, 64), ""),
    "critic_embed": _Key(_ints, (64, 64), ""),
    "critic_joint": _Key(_ints, (64, 64), ""),
    "eval_every": _Key(int, 0, "learning-curve cadence, env steps"),
    "eval_episodes": _Key(int, 10, ""),
}

_SHAPE_KEYS = {
    "n_trials": _Key(int, 24, "trials per phase"),
    "n_parallel": _Key(int, 4, "warm starts / population / workers"),
    "train_steps": _Key(int, 50_000, "per-trial training budget"),
    "shape_eval_episodes": _Key(int, 20, "episodes per trial score"),
    "sigma0_frac": _Key(float, 0.3, ""),
    "serial": _Key(_bool, False, "disable the process pool"),
}

_EVAL_KEYS = {
    "policy": _Key(str, "apf", "apf | scripted | path to an actor file"),
    "episodes": _Key(int, 100, "episodes per sweep cell"),
    "lidar_grid": _Key(_floats, (0.3,), ""),
    "localize_grid": _Key(_floats, (0.1,), ""),
    "process_grid": _Key(_pairs, ((0.1, 0.1),), "speed:turning pairs"),
    "obstacle_grid": _Key(_ints, (0,), ""),
    "dist_bins": _Key(_pairs, ((2.0, 5.0),), "lo:hi start-goal bins"),
}

_REPLAY_KEYS = {
    "trajectory": _Key(str, "", "trajectory dump to replay"),
    "map_file": _Key(str, "", "map the trajectory was recorded in"),
    "robot_radius": _Key(float, worldsim.DEFAULT_ROBOT_RADIUS, ""),
}

_COMMAND_KEYS = {
    "mapgen": {**_MAP_KEYS},
    "train": {**_MAP_KEYS, **_TASK_KEYS, **_TRAIN_KEYS},
    "shape-reward": {**_MAP_KEYS, **_TASK_KEYS, **_TRAIN_KEYS,
                     **_SHAPE_KEYS},
    "shape-network": {**_MAP_KEYS, **_TASK_KEYS, **_TRAIN_KEYS,
                      **_SHAPE_KEYS},
    "shape": {**_MAP_KEYS, **_TASK_KEYS, **_TRAIN_KEYS, **_SHAPE_KEYS},
    "eval": {**_MAP_KEYS, **_TASK_KEYS, **_EVAL_KEYS},
    "baseline-apf": {**_MAP_KEYS, **_TASK_KEYS, **_EVAL_KEYS},
    "replay": {**_REPLAY_KEYS},
}


def _convert(schema, key: str, raw: str):
    if key not in schema:
        raise UsageError(f"unknown configuration key: {key!r}")
    try:
        return schema[key].convert(raw)
    except (ValueError, TypeError) as exc:
        raise UsageError(f"bad value for {key}: {exc}") from exc


def read_config_file(path, schema) -> dict:
    """Flat ``key = value`` lines; '#' starts a comment; blanks ignored."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(
                f"{path}:{lineno}: expected 'key = value', got {line!r}")
        out[key.strip()] = _convert(schema, key.strip(), value.strip())
    return out


def build_config(command: str, config_file, overrides) -> dict:
    schema = _COMMAND_KEYS[command]
    cfg = {k: spec.default for k, spec in schema.items()}
    if config_file:
        cfg.update(read_config_file(config_file, schema))
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"override must be key=value, got {item!r}")
        cfg[key.strip()] = _convert(schema, key.strip(), value.strip())
    return cfg


# -- shared builders --------------------------------------------------------

def _build_grid(cfg, seed: int):
    if cfg.get("map_file"):
        return worldsim.load_map(cfg["map_file"]), Path(
            cfg["map_file"]).stem
    spec = MapSpec(cfg["map_width"], cfg["map_height"],
                   cfg["map_resolution"], style=cfg["map_style"],
                   corridor_width=cfg["corridor_width"],
                   n_boxes=cfg["n_boxes"],
                   box_size=(cfg["box_min"], cfg["box_max"]),
                   room_min_size=cfg["room_min_size"],
                   door_width=cfg["door_width"])
    map_seed = cfg["map_seed"] if cfg["map_seed"] else seed
    return worldsim.generate_map(spec, map_seed), cfg["map_style"]


def _build_task(cfg) -> tasks.TaskConfig:
    noise = NoiseParams(sigma_lidar=cfg["sigma_lidar"],
                        sigma_speed=cfg["sigma_speed"],
                        sigma_turning=cfg["sigma_turning"],
                        sigma_localize=cfg["sigma_localize"])
    return tasks.TaskConfig(
        kind=cfg["kind"], max_steps=cfg["max_steps"],
        n_obstacles=cfg["n_obstacles"], noise=noise,
        goal_dist_range=(cfg["goal_dist_min"], cfg["goal_dist_max"]),
        min_path_length=cfg["min_path_length"],
        reward_weights=cfg["reward_weights"] or None)


def _build_ddpg(cfg) -> ddpg.DdpgConfig:
    return ddpg.DdpgConfig(
        total_steps=cfg["total_steps"], gamma=cfg["gamma"],
        actor_lr=cfg["actor_lr"], critic_lr=cfg["critic_lr"],
        tau=cfg["tau"], batch_size=cfg["batch_size"],
        buffer_capacity=cfg["buffer_capacity"],
        warmup_steps=cfg["warmup_steps"], noise_v=cfg["noise_v"],
        noise_w=cfg["noise_w"], noise_final_frac=cfg["noise_final_frac"],
        actor_hidden=cfg["actor_hidden"],
        critic_embed=cfg["critic_embed"],
        critic_joint=cfg["critic_joint"], eval_every=cfg["eval_every"],
        eval_episodes=cfg["eval_episodes"])


def _build_shaping(cfg) -> shaping.ShapingConfig:
    return shaping.ShapingConfig(
        n_trials=cfg["n_trials"], n_parallel=cfg["n_parallel"],
        train_steps=cfg["train_steps"],
        eval_episodes=cfg["shape_eval_episodes"],
        sigma0_frac=cfg["sigma0_frac"])


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- subcommands -------------------------------------------------------------

def cmd_mapgen(args, cfg) -> int:
    out = _out_dir(args)
    grid, name = _build_grid(cfg, args.seed)
    path = out / f"{name}.map"
    worldsim.save_map(grid, path)
    w, h = grid.extent
    free = int((~grid.cells).sum())
    print(f"wrote {path} ({w:g} x {h:g} m, resolution "
          f"{grid.resolution:g} m, {free} free cells)")
    return 0


def cmd_train(args, cfg) -> int:
    out = _out_dir(args)
    grid, _ = _build_grid(cfg, args.seed)
    env = tasks.NavEnv(grid, _build_task(cfg))
    result = ddpg.train(env, _build_ddpg(cfg), seed=args.seed)
    from .neural import save_policy
    save_policy(result.actor, out / "actor.net")
    save_policy(result.critic, out / "critic.net")
    if result.curve:
        ddpg.save_curve(result.curve, out / "curve.txt")
    obj, ret = result.final_eval if result.final_eval else (float("nan"),) * 2
    print(f"trained {result.steps} steps, {result.episodes} episodes; "
          f"final eval objective {obj:.3f}, return {ret:.3f}")
    print(f"wrote {out / 'actor.net'} and {out / 'critic.net'}")
    return 0


def _print_phase(res: shaping.ShapingResult) -> None:
    params = " ".join(f"{p:.4g}" for p in res.best_params)
    print(f"phase {res.phase}: best objective {res.best_objective:.6g} "
          f"with parameters [{params}]")


def cmd_shape_reward(args, cfg) -> int:
    out = _out_dir(args)
    grid, _ = _build_grid(cfg, args.seed)
    res = shaping.shape_rewards(
        grid, _build_task(cfg), _build_ddpg(cfg), _build_shaping(cfg),
        seed=args.seed, db_path=out / "study.db",
        parallel=not cfg["serial"])
    (out / "best_reward_weights.txt").write_text(
        " ".join(repr(p) for p in res.best_params) + "\n", encoding="ascii")
    _print_phase(res)
    return 0


def cmd_shape_network(args, cfg) -> int:
    out = _out_dir(args)
    grid, _ = _build_grid(cfg, args.seed)
    res = shaping.shape_networks(
        grid, _build_task(cfg), _build_ddpg(cfg), _build_shaping(cfg),
        seed=args.seed, db_path=out / "study.db",
        parallel=not cfg["serial"])
    widths = shaping.widths_from_params(res.best_params)
    _write_widths(out, widths)
    _print_phase(res)
    return 0


def _write_widths(out: Path, widths: dict) -> None:
    lines = [f"{name} {' '.join(str(w) for w in ws)}"
             for name, ws in widths.items()]
    (out / "best_network_widths.txt").write_text("\n".join(lines) + "\n",
                                                 encoding="ascii")


def cmd_shape(args, cfg) -> int:
    out = _out_dir(args)
    grid, _ = _build_grid(cfg, args.seed)
    res = shaping.run_full_shaping(
        grid, _build_task(cfg), _build_ddpg(cfg), _build_shaping(cfg),
        seed=args.seed, db_path=out / "study.db",
        parallel=not cfg["serial"])
    (out / "best_reward_weights.txt").write_text(
        " ".join(repr(p) for p in res.reward.best_params) + "\n",
        encoding="ascii")
    _write_widths(out, shaping.widths_from_params(res.network.best_params))
    _print_phase(res.reward)
    _print_phase(res.network)
    return 0


def _cmd_eval_common(args, cfg, policy: str) -> int:
    out = _out_dir(args)
    grid, name = _build_grid(cfg, args.seed)
    spec = evaluation.SweepSpec(
        maps=((name, grid),), kind=cfg["kind"], policy=policy,
        episodes=cfg["episodes"], sigma_lidar=cfg["lidar_grid"],
        sigma_localize=cfg["localize_grid"],
        process_noise=cfg["process_grid"],
        n_obstacles=cfg["obstacle_grid"], dist_bins=cfg["dist_bins"],
        master_seed=args.seed, base_config=_build_task(cfg))
    rows, records = evaluation.run_sweep(spec)
    (out / "metrics.csv").write_text(evaluation.metrics_to_csv(rows),
                                     encoding="ascii")
    (out / "episodes.csv").write_text(evaluation.episodes_to_csv(records),
                                      encoding="ascii")
    for r in rows:
        print(f"{r.map_name} lidar={r.sigma_lidar:g} "
              f"localize={r.sigma_localize:g} obstacles={r.n_obstacles} "
              f"dist=[{r.dist_lo:g},{r.dist_hi:g}] "
              f"success {r.success_rate:.3f} over {r.episodes}")
    print(f"wrote {out / 'metrics.csv'} and {out / 'episodes.csv'}")
    return 0


def cmd_eval(args, cfg) -> int:
    return _cmd_eval_common(args, cfg, cfg["policy"])


def cmd_baseline_apf(args, cfg) -> int:
    return _cmd_eval_common(args, cfg, "apf")


def cmd_replay(args, cfg) -> int:
    out = _out_dir(args)
    if not cfg["trajectory"] or not cfg["map_file"]:
        raise UsageError("replay needs trajectory=<file> and map_file=<file>")
    grid = worldsim.load_map(cfg["map_file"])
    summary = evaluation.replay_file(cfg["trajectory"], grid,
                                     cfg["robot_radius"])
    points_path = out / "replay_points.txt"
    with open(points_path, "w", encoding="ascii") as fh:
        fh.write("x y\n")
        for x, y in summary.points:
            fh.write(f"{x!r} {y!r}\n")
    print(f"path length {summary.path_length:.6g} m over {summary.steps} "
          f"steps; min clearance {summary.min_clearance:.6g} m; "
          f"outcome {summary.outcome}")
    print(f"wrote {points_path}")
    return 0


_HANDLERS = {
    "mapgen": cmd_mapgen,
    "train": cmd_train,
    "shape-reward": cmd_shape_reward,
    "shape-network": cmd_shape_network,
    "shape": cmd_shape,
    "eval": cmd_eval,
    "baseline-apf": cmd_baseline_apf,
    "replay": cmd_replay,
}


def _make_parser() -> _Parser:
    parser = _Parser(prog="navrl",
                     description="2D lidar navigation workbench")
    sub = parser.add_subparsers(dest="command", metavar="command")
    for name in _HANDLERS:
        p = sub.add_parser(name, add_help=True,
                           description=f"{name} (keys: "
                           f"{', '.join(sorted(_COMMAND_KEYS[name]))})")
        p.add_argument("--config", default=None,
                       help="flat key = value configuration file")
        p.add_argument("--seed", type=int, default=0, help="master seed")
        p.add_argument("--out", default="navrl_out",
                       help="output directory")
        p.add_argument("overrides", nargs="*", metavar="key=value",
                       help="configuration overrides")
    return parser


def main(argv=None) -> int:
    try:
        parser = _make_parser()
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required "
                             f"({', '.join(_HANDLERS)})")
        if not 0 <= args.seed < 2 ** 64:
            raise UsageError("--seed must fit in an unsigned 64-bit integer")
        cfg = build_config(args.command, args.config, args.overrides)
        return _HANDLERS[args.command](args, cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 2
    except Exception as exc:  # runtime contract: any failure exits 2
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())
