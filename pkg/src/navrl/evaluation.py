"""Evaluation sweeps and trajectory replay.

A sweep crosses maps with noise levels, obstacle counts and start-goal
distance bins, runs a fixed number of seeded episodes in every cell, and
aggregates success metrics.  Episode-level records are kept next to the
aggregate rows so every number in a metrics row can be recomputed from them.
"""
from __future__ import annotations

import dataclasses
import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import worldsim
from .apf_baseline import ApfP2PPolicy, ApfPolicy
from .ddpg import ActorPolicy
from .neural import ActorNet, load_policy
from .tasks import (InvalidSpec, NavEnv, TaskConfig, run_episode,
                    trajectory_from_text)
from .worldsim import NoiseParams, OccupancyMap, RobotState


class ScriptedPolicy:
    """Constant command, the trivial reference policy."""

    def __init__(self, v: float = 1.0, w: float = 0.0):
        self.v, self.w = v, w

    def act(self, ctx):
        return (self.v, self.w)


def make_policy(source: str, kind: str):
    """Policy factory: 'apf', 'scripted', or a saved actor network path."""
    if source == "apf":
        return ApfPolicy() if kind == "pf" else ApfP2PPolicy()
    if source == "scripted":
        return ScriptedPolicy()
    net = load_policy(source)
    if not isinstance(net, ActorNet):
        raise InvalidSpec(f"{source} does not hold an actor network")
    return ActorPolicy(net)


@dataclass
class SweepSpec:
    """Cartesian evaluation grid; every combination becomes one cell."""

    maps: tuple                       # ((name, OccupancyMap), ...)
    kind: str = "p2p"
    policy: str = "apf"
    episodes: int = 100
    sigma_lidar: tuple = (0.3,)
    sigma_localize: tuple = (0.1,)
    process_noise: tuple = ((0.1, 0.1),)   # (sigma_speed, sigma_turning)
    n_obstacles: tuple = (0,)
    dist_bins: tuple = ((2.0, 5.0),)
    master_seed: int = 0
    base_config: TaskConfig | None = None

    def __post_init__(self):
        if self.episodes < 1:
            raise InvalidSpec("episodes per cell must be >= 1")
        for grid_name in ("maps", "sigma_lidar", "sigma_localize",
                          "process_noise", "n_obstacles", "dist_bins"):
            if len(getattr(self, grid_name)) == 0:
                raise InvalidSpec(f"empty sweep grid: {grid_name}")

    def cells(self):
        """Deterministic cell order: the cartesian product, maps outermost."""
        return list(itertools.product(
            self.maps, self.sigma_lidar, self.sigma_localize,
            self.process_noise, self.n_obstacles, self.dist_bins))


@dataclass
class EpisodeRecord:
    cell: int
    episode: int
    seed: int
    outcome: str
    true_objective: float
    success: int
    steps: int
    path_length: float
    finish_time: float
    min_clearance: float
    total_reward: float


@dataclass
class MetricsRow:
    map_name: str
    sigma_lidar: float
    sigma_localize: float
    sigma_speed: float
    sigma_turning: float
    n_obstacles: int
    dist_lo: float
    dist_hi: float
    episodes: int
    successes: int
    success_rate: float
    mean_objective: float
    mean_path_length: float    # successes only; nan when none
    mean_finish_time: float    # successes only; nan when none


def episode_seed(master_seed: int, cell: int, episode: int) -> int:
    ss = np.random.SeedSequence([master_seed, cell, episode])
    return int(ss.generate_state(1, np.uint64)[0])


def _cell_config(spec: SweepSpec, sig_l, sig_loc, proc, n_obs, bin_):
    base = spec.base_config or TaskConfig(kind=spec.kind)
    if base.kind != spec.kind:
        raise InvalidSpec("base_config task kind differs from sweep kind")
    noise = NoiseParams(sigma_lidar=sig_l, sigma_speed=proc[0],
                        sigma_turning=proc[1], sigma_localize=sig_loc)
    return dataclasses.replace(base, noise=noise, n_obstacles=int(n_obs),
                               goal_dist_range=(float(bin_[0]),
                                                float(bin_[1])))


def run_sweep(spec: SweepSpec, progress=None):
    """Run every cell; returns (metrics rows, episode records)."""
    policy = make_policy(spec.policy, spec.kind)
    roadmaps = {}
    rows = []
    records = []
    for cell_idx, cell in enumerate(spec.cells()):
        (map_name, grid), sig_l, sig_loc, proc, n_obs, bin_ = cell
        cfg = _cell_config(spec, sig_l, sig_loc, proc, n_obs, bin_)
        env = NavEnv(grid, cfg, roadmaps.get(map_name))

        succ = 0
        objs = []
        lengths = []
        times = []
        for ep in range(spec.episodes):
            seed = episode_seed(spec.master_seed, cell_idx, ep)
            res = run_episode(env, policy, seed)
            ok = res.true_objective == 1.0
            succ += ok
            objs.append(res.true_objective)
            if ok:
                lengths.append(res.distance_traveled)
                times.append(res.finish_time)
            records.append(EpisodeRecord(
                cell=cell_idx, episode=ep, seed=seed, outcome=res.outcome,
                true_objective=res.true_objective, success=int(ok),
                steps=res.steps, path_length=res.distance_traveled,
                finish_time=res.finish_time,
                min_clearance=res.min_clearance,
                total_reward=res.total_reward))
        roadmaps[map_name] = env._roadmap
        rows.append(MetricsRow(
            map_name=map_name, sigma_lidar=float(sig_l),
            sigma_localize=float(sig_loc), sigma_speed=float(proc[0]),
            sigma_turning=float(proc[1]), n_obstacles=int(n_obs),
            dist_lo=float(bin_[0]), dist_hi=float(bin_[1]),
            episodes=spec.episodes, successes=succ,
            success_rate=succ / spec.episodes,
            mean_objective=float(np.mean(objs)),
            mean_path_length=float(np.mean(lengths)) if lengths
            else float("nan"),
            mean_finish_time=float(np.mean(times)) if times
            else float("nan")))
        if progress is not None:
            progress(cell_idx, rows[-1])
    return rows, records


# -- text output ---------------------------------------------------------

METRICS_HEADER = ("map,sigma_lidar,sigma_localize,sigma_speed,sigma_turning,"
                  "n_obstacles,dist_lo,dist_hi,episodes,successes,"
                  "success_rate,mean_objective,mean_path_length,"
                  "mean_finish_time")

EPISODES_HEADER = ("cell,episode,seed,outcome,true_objective,success,steps,"
                   "path_length,finish_time,min_clearance,total_reward")


def metrics_to_csv(rows) -> str:
    lines = [METRICS_HEADER]
    for r in rows:
        lines.append(",".join([
            r.map_name, repr(r.sigma_lidar), repr(r.sigma_localize),
            repr(r.sigma_speed), repr(r.sigma_turning), str(r.n_obstacles),
            repr(r.dist_lo), repr(r.dist_hi), str(r.episodes),
            str(r.successes), repr(r.success_rate), repr(r.mean_objective),
            repr(r.mean_path_length), repr(r.mean_finish_time)]))
    return "\n".join(lines) + "\n"


def episodes_to_csv(records) -> str:
    lines = [EPISODES_HEADER]
    for e in records:
        lines.append(",".join([
            str(e.cell), str(e.episode), str(e.seed), e.outcome,
            repr(e.true_objective), str(e.success), str(e.steps),
            repr(e.path_length), repr(e.finish_time),
            repr(e.min_clearance), repr(e.total_reward)]))
    return "\n".join(lines) + "\n"


def recompute_row(row: MetricsRow, cell: int, records) -> MetricsRow:
    """Rebuild a metrics row's aggregates from its episode records.

    Audit helper: every aggregate must be reproducible from the stored
    episode-level log.
    """
    eps = [e for e in records if e.cell == cell]
    if len(eps) != row.episodes:
        raise ValueError("episode records do not cover the row")
    succ = sum(e.success for e in eps)
    lengths = [e.path_length for e in eps if e.success]
    times = [e.finish_time for e in eps if e.success]
    return dataclasses.replace(
        row, successes=succ, success_rate=succ / row.episodes,
        mean_objective=float(np.mean([e.true_objective for e in eps])),
        mean_path_length=float(np.mean(lengths)) if lengths
        else float("nan"),
        mean_finish_time=float(np.mean(times)) if times else float("nan"))


# -- trajectory replay ---------------------------------------------------


@dataclass
class ReplaySummary:
    path_length: float
    min_clearance: float
    outcome: str                 # "collision" | "clear"
    steps: int
    points: np.ndarray           # (n, 2) true positions, plot-ready


def replay(rows, grid: OccupancyMap,
           robot_radius: float = worldsim.DEFAULT_ROBOT_RADIUS):
    """Recompute trajectory metrics against a map.

    ``rows`` are (t, x, y, heading, v, w, reward) tuples as produced by the
    episode runner.  Path length is the sum of consecutive segment lengths;
    clearance is measured against the static map only (moving obstacles are
    not part of a dump).  The outcome is 'collision' when the final pose is
    in contact, else 'clear'; goal attainment is not reconstructible from a
    dump.
    """
    if len(rows) == 0:
        raise ValueError("empty trajectory")
    pts = np.array([[r[1], r[2]] for r in rows], dtype=float)
    length = float(np.hypot(*np.diff(pts, axis=0).T).sum()) if len(pts) > 1 \
        else 0.0
    min_clear = math.inf
    for t, x, y, heading, *_ in rows:
        state = RobotState(x, y, heading, radius=robot_radius)
        min_clear = min(min_clear,
                        worldsim.clearance(grid, state))
    last = rows[-1]
    final = RobotState(last[1], last[2], last[3], radius=robot_radius)
    outcome = ("collision" if worldsim.check_collision(grid, final)
               else "clear")
    return ReplaySummary(path_length=length, min_clearance=float(min_clear),
                         outcome=outcome, steps=len(rows) - 1, points=pts)


def replay_file(trajectory_path, grid: OccupancyMap,
                robot_radius: float = worldsim.DEFAULT_ROBOT_RADIUS):
    with open(trajectory_path, "r", encoding="ascii") as fh:
        rows = trajectory_from_text(fh.read())
    return replay(rows, grid, robot_radius)
