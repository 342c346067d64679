"""Navigation episodes: observations, rewards, objectives, rollouts.

Two task kinds share one environment.  Point-goal episodes ("p2p") end when
the robot first comes within the goal radius; path-following episodes ("pf")
track a waypoint path produced by the planner and end when every waypoint is
reached.  Both end early on any collision and time out after a fixed number
of control steps.

The robot only ever observes noisy quantities: a lidar scan and a localized
pose estimate.  Ground truth drives collision checks, waypoint bookkeeping
and the true objective, never the observation vector.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import planning
from .moving_obstacles import Crowd, SfmParams
from .planning import Path, Roadmap
from .worldsim import (
    Action,
    DEFAULT_DT,
    DEFAULT_FOV,
    DEFAULT_MAX_RANGE,
    DEFAULT_ROBOT_RADIUS,
    InvalidSpec,
    LidarScan,
    N_BEAMS,
    NoiseParams,
    OccupancyMap,
    RobotState,
    check_collision,
    clearance,
    localize,
    sense,
    step_dynamics,
    wrap_angle,
)

P2P_TERMS = ("step", "goal_distance", "collision", "turning", "clearance",
             "goal")
PF_TERMS = ("step", "waypoint_distance", "collision", "low_clearance")

# hand-tuned starting points; the shaping search exists to improve on these
DEFAULT_P2P_WEIGHTS = (0.01, 0.02, 1.0, 0.005, 0.0, 1.0)
DEFAULT_PF_WEIGHTS = (0.01, 0.05, 1.0, 0.02)


def p2p_reward_terms(goal_dist: float, collided: bool, turn_rate: float,
                     clear: float, reached: bool) -> np.ndarray:
    """Atomic reward vector for point-goal steps.

    Every penalty is encoded with its sign inside the term, so the weights
    that combine them stay in [0, 1].
    """
    return np.array([
        -1.0,
        -goal_dist,
        -1.0 if collided else 0.0,
        -abs(turn_rate),
        clear,
        1.0 if reached else 0.0,
    ])


def pf_reward_terms(waypoint_dist: float, collided: bool, clear: float,
                    clearance_threshold: float = 0.3) -> np.ndarray:
    return np.array([
        -1.0,
        -waypoint_dist,
        -1.0 if collided else 0.0,
        -1.0 if clear < clearance_threshold else 0.0,
    ])


@dataclass
class TaskConfig:
    kind: str = "p2p"                    # "p2p" or "pf"
    max_steps: int = 500
    dt: float = DEFAULT_DT
    frame_stack: int = 3
    max_range: float = DEFAULT_MAX_RANGE
    fov: float = DEFAULT_FOV
    robot_radius: float = DEFAULT_ROBOT_RADIUS
    goal_radius: float = 0.5             # p2p arrival distance
    goal_dist_range: tuple = (2.0, 5.0)  # p2p goal sampling
    waypoint_spacing: float = 1.0
    reach_radius: float = 0.3
    n_partial: int = 2                   # extra waypoints in the pf frame
    clearance_threshold: float = 0.3
    min_path_length: float = 3.0         # pf scenario sampling
    n_obstacles: int = 0
    noise: NoiseParams = field(default_factory=NoiseParams)
    sfm: SfmParams = field(default_factory=SfmParams)
    reward_weights: tuple | None = None  # defaults chosen per kind
    fixed_start: tuple | None = None     # (x, y, heading) pins the spawn
    fixed_goal: tuple | None = None      # (x, y) pins the goal
    fixed_path: tuple | None = None      # pf raw polyline, skips the planner

    def __post_init__(self):
        if self.kind not in ("p2p", "pf"):
            raise InvalidSpec(f"unknown task kind {self.kind!r}")
        if self.frame_stack < 1 or self.max_steps < 1:
            raise InvalidSpec("frame_stack and max_steps must be >= 1")
        n = self.n_reward_terms
        if self.reward_weights is None:
            self.reward_weights = (DEFAULT_P2P_WEIGHTS if self.kind == "p2p"
                                   else DEFAULT_PF_WEIGHTS)
        self.reward_weights = tuple(float(w) for w in self.reward_weights)
        if len(self.reward_weights) != n:
            raise InvalidSpec(f"{self.kind} expects {n} reward weights")
        if any(w < 0.0 or w > 1.0 for w in self.reward_weights):
            raise InvalidSpec("reward weights must lie in [0, 1]")

    @property
    def n_reward_terms(self) -> int:
        return len(P2P_TERMS) if self.kind == "p2p" else len(PF_TERMS)

    @property
    def goal_features(self) -> int:
        return 2 if self.kind == "p2p" else 2 * (self.n_partial + 1)

    @property
    def obs_dim(self) -> int:
        return self.frame_stack * (N_BEAMS + self.goal_features)


@dataclass
class StepContext:
    """Everything a policy may legitimately see at one control step."""

    observation: np.ndarray          # stacked frames, oldest first
    scan: LidarScan                  # latest noisy scan, meters
    believed_pose: tuple             # (x, y, heading) localization output
    goal_vector: np.ndarray          # polar goal (p2p) or waypoints (pf)
    goal_world: np.ndarray | None    # p2p goal point in world coordinates
    path: Path | None                # pf path with reached flags
    step_index: int
    dt: float
    max_range: float
    fov: float


@dataclass
class EpisodeResult:
    outcome: str                     # "reached" | "collision" | "timeout"
    true_objective: float
    total_reward: float
    steps: int
    distance_traveled: float
    min_clearance: float
    reward_term_totals: np.ndarray
    trajectory: list | None = None   # (t, x, y, heading, v, w, reward) rows
    path: Path | None = None
    dt: float = DEFAULT_DT

    @property
    def finish_time(self) -> float:
        return self.steps * self.dt


class NavEnv:
    """One map, one task kind, episodic interface.

    ``reset(seed)`` derives independent random streams for scenario layout,
    lidar noise, actuation noise, localization noise and the crowd from a
    single episode seed, so an episode is a pure function of
    (map, config, seed, policy).
    """

    def __init__(self, grid: OccupancyMap, config: TaskConfig | None = None,
                 roadmap: Roadmap | None = None):
        self.grid = grid
        self.config = config or TaskConfig()
        self._roadmap = roadmap
        self._state = None

    @property
    def roadmap(self) -> Roadmap:
        if self._roadmap is None:
            self._roadmap = Roadmap.build(self.grid, seed=0)
        return self._roadmap

    @property
    def obs_dim(self) -> int:
        return self.config.obs_dim

    # -- scenario construction -------------------------------------------

    def _sample_pose(self, rng) -> RobotState:
        cfg = self.config
        if cfg.fixed_start is not None:
            x, y, heading = cfg.fixed_start
            state = RobotState(float(x), float(y), float(heading),
                               radius=cfg.robot_radius)
            if check_collision(self.grid, state):
                raise InvalidSpec("fixed start is not collision-free")
            return state
        p = planning.sample_free_point(self.grid, rng, cfg.robot_radius)
        return RobotState(float(p[0]), float(p[1]),
                          rng.uniform(-math.pi, math.pi),
                          radius=cfg.robot_radius)

    def _sample_goal_point(self, rng):
        cfg = self.config
        if cfg.fixed_goal is not None:
            g = np.asarray(cfg.fixed_goal, dtype=float)
            if not planning.disc_free(self.grid, g, cfg.robot_radius):
                raise InvalidSpec("fixed goal is not collision-free")
            return g
        return planning.sample_free_point(self.grid, rng, cfg.robot_radius)

    def _sample_p2p(self, rng):
        cfg = self.config
        lo, hi = cfg.goal_dist_range
        pinned = cfg.fixed_start is not None and cfg.fixed_goal is not None
        for _ in range(1000):
            start = self._sample_pose(rng)
            goal = self._sample_goal_point(rng)
            d = math.hypot(goal[0] - start.x, goal[1] - start.y)
            if pinned or lo <= d <= hi:
                return start, goal, None
        raise InvalidSpec("could not sample a start/goal pair in range")

    def _sample_pf(self, rng):
        cfg = self.config
        if cfg.fixed_path is not None:
            raw = np.asarray(cfg.fixed_path, dtype=float)
            path = planning.Path.from_polyline(raw, cfg.waypoint_spacing)
            start = self._sample_pose(rng)
            return start, raw[-1].copy(), path
        pinned = cfg.fixed_start is not None and cfg.fixed_goal is not None
        lo, hi = cfg.goal_dist_range
        for _ in range(1000):
            start = self._sample_pose(rng)
            goal = self._sample_goal_point(rng)
            if pinned:
                path = self.roadmap.plan_path(
                    (start.x, start.y), goal, cfg.waypoint_spacing)
                return start, np.asarray(goal, dtype=float), path
            d = math.hypot(goal[0] - start.x, goal[1] - start.y)
            if not lo <= d <= hi:
                continue
            try:
                path = self.roadmap.plan_path(
                    (start.x, start.y), goal, cfg.waypoint_spacing)
            except planning.NoPath:
                continue
            if path.length() >= cfg.min_path_length:
                return start, np.asarray(goal, dtype=float), path
        raise InvalidSpec("could not sample a path scenario")

    # -- per-step pieces ---------------------------------------------------

    def _goal_vector(self, believed_pose):
        cfg = self.config
        x, y, heading = believed_pose
        if cfg.kind == "p2p":
            dx = self._goal[0] - x
            dy = self._goal[1] - y
            dist = math.hypot(dx, dy)
            bearing = wrap_angle(math.atan2(dy, dx) - heading)
            return np.array([dist, bearing])
        wps = planning.partial_path_observation(self._path, believed_pose,
                                                cfg.n_partial)
        return wps.ravel()

    def _frame(self, scan: LidarScan, believed_pose):
        return np.concatenate([scan.ranges / self.config.max_range,
                               self._goal_vector(believed_pose)])

    def _observation(self):
        return np.concatenate(self._frames)

    def _context(self) -> StepContext:
        return StepContext(
            observation=self._observation(),
            scan=self._scan,
            believed_pose=self._believed,
            goal_vector=self._goal_vec.copy(),
            goal_world=None if self._goal is None else self._goal.copy(),
            path=self._path,
            step_index=self._step_index,
            dt=self.config.dt,
            max_range=self.config.max_range,
            fov=self.config.fov,
        )

    # -- episode API -------------------------------------------------------

    def reset(self, seed: int) -> StepContext:
        cfg = self.config
        ss = np.random.SeedSequence(seed)
        # fixed spawn order is part of the determinism contract
        scen_ss, lidar_ss, dyn_ss, loc_ss, crowd_ss = ss.spawn(5)
        self._rng_lidar = np.random.default_rng(lidar_ss)
        self._rng_dyn = np.random.default_rng(dyn_ss)
        self._rng_loc = np.random.default_rng(loc_ss)
        scen_rng = np.random.default_rng(scen_ss)

        if cfg.kind == "p2p":
            self._true, goal, self._path = self._sample_p2p(scen_rng)
            self._goal = np.asarray(goal, dtype=float)
        else:
            self._true, self._goal, self._path = self._sample_pf(scen_rng)

        keep_clear = [((self._true.x, self._true.y),
                       cfg.sfm.radius + cfg.robot_radius + 0.5)]
        if self._goal is not None:
            keep_clear.append((tuple(self._goal),
                               cfg.sfm.radius + cfg.goal_radius))
        self.crowd = Crowd.spawn(self.grid, cfg.n_obstacles,
                                 np.random.default_rng(crowd_ss),
                                 cfg.sfm, keep_clear)

        self._step_index = 0
        self._reached_goal = False
        self._min_clearance = clearance(self.grid, self._true,
                                        self.crowd.discs())
        self._distance = 0.0
        if cfg.kind == "pf":
            planning.update_reached(self._path, (self._true.x, self._true.y),
                                    cfg.reach_radius)
        else:
            self._check_goal_latch()
        self._believed = localize(self._true, cfg.noise, self._rng_loc)
        self._scan = sense(self.grid, self._true, cfg.noise, self._rng_lidar,
                           max_range=cfg.max_range,
                           obstacle_discs=self.crowd.discs(), fov=cfg.fov)
        self._goal_vec = self._goal_vector(self._believed)
        first = self._frame(self._scan, self._believed)
        self._frames = [first.copy() for _ in range(cfg.frame_stack)]
        return self._context()

    def _check_goal_latch(self):
        d = math.hypot(self._goal[0] - self._true.x,
                       self._goal[1] - self._true.y)
        if d < self.config.goal_radius:
            self._reached_goal = True
            return True
        return False

    def step(self, action):
        """Advance one control step.  Returns (ctx, reward, done, info)."""
        if self._step_index >= self.config.max_steps:
            raise InvalidSpec("episode is over; call reset()")
        cfg = self.config
        act = Action(float(action[0]), float(action[1])).clamped()
        prev = self._true
        self._true = step_dynamics(prev, act, cfg.dt, cfg.noise,
                                   self._rng_dyn)
        self.crowd.step(cfg.dt, self._true)
        discs = self.crowd.discs()
        collided = check_collision(self.grid, self._true, discs)
        clear = clearance(self.grid, self._true, discs)
        self._min_clearance = min(self._min_clearance, clear)
        self._distance += math.hypot(self._true.x - prev.x,
                                     self._true.y - prev.y)
        self._step_index += 1

        reached_now = False
        if cfg.kind == "p2p":
            if not self._reached_goal:
                reached_now = self._check_goal_latch()
            task_done = self._reached_goal
        else:
            task_done = planning.update_reached(
                self._path, (self._true.x, self._true.y), cfg.reach_radius)

        self._believed = localize(self._true, cfg.noise, self._rng_loc)
        self._scan = sense(self.grid, self._true, cfg.noise, self._rng_lidar,
                           max_range=cfg.max_range, obstacle_discs=discs,
                           fov=cfg.fov)
        self._goal_vec = self._goal_vector(self._believed)
        self._frames.pop(0)
        self._frames.append(self._frame(self._scan, self._believed))

        if cfg.kind == "p2p":
            believed_goal_dist = float(self._goal_vec[0])
            terms = p2p_reward_terms(believed_goal_dist, collided,
                                     act.w, clear, reached_now)
        else:
            bx, by = self._goal_vec[0], self._goal_vec[1]
            terms = pf_reward_terms(math.hypot(bx, by), collided, clear,
                                    cfg.clearance_threshold)
        reward = float(np.dot(cfg.reward_weights, terms))

        timeout = self._step_index >= cfg.max_steps
        done = collided or task_done or timeout
        if collided:
            outcome = "collision"
        elif task_done:
            outcome = "reached"
        elif timeout:
            outcome = "timeout"
        else:
            outcome = ""
        info = {
            "terms": terms,
            "collision": collided,
            "reached": task_done,
            "timeout": timeout and not (collided or task_done),
            "outcome": outcome,
            "true_state": self._true,
            "clearance": clear,
            "action": (act.v, act.w),
        }
        return self._context(), reward, done, info

    @property
    def true_objective(self) -> float:
        """Reach indicator (p2p) or fraction of waypoints reached (pf)."""
        if self.config.kind == "p2p":
            return 1.0 if self._reached_goal else 0.0
        return self._path.fraction_reached


def run_episode(env: NavEnv, policy, seed: int,
                record_trajectory: bool = False) -> EpisodeResult:
    """Roll one episode; ``policy.act(ctx)`` supplies the actions."""
    ctx = env.reset(seed)
    cfg = env.config
    total = 0.0
    term_totals = np.zeros(cfg.n_reward_terms)
    rows = None
    if record_trajectory:
        s = env._true
        rows = [(0.0, s.x, s.y, s.heading, 0.0, 0.0, 0.0)]
    outcome = "timeout"
    while True:
        v, w = policy.act(ctx)
        ctx, reward, done, info = env.step((v, w))
        total += reward
        term_totals += info["terms"]
        if record_trajectory:
            s = info["true_state"]
            av, aw = info["action"]
            rows.append((env._step_index * cfg.dt, s.x, s.y, s.heading,
                         av, aw, reward))
        if done:
            outcome = info["outcome"]
            break
    return EpisodeResult(
        outcome=outcome,
        true_objective=env.true_objective,
        total_reward=total,
        steps=env._step_index,
        distance_traveled=env._distance,
        min_clearance=env._min_clearance,
        reward_term_totals=term_totals,
        trajectory=rows,
        path=env._path,
        dt=cfg.dt,
    )


# -- trajectory dumps ---------------------------------------------------------

TRAJECTORY_HEADER = "t x y heading v w reward"


class TrajectoryFormatError(ValueError):
    """Malformed trajectory dump text."""


def trajectory_to_text(rows) -> str:
    lines = [TRAJECTORY_HEADER]
    for row in rows:
        if len(row) != 7:
            raise TrajectoryFormatError("rows carry exactly 7 fields")
        lines.append(" ".join(repr(float(x)) for x in row))
    return "\n".join(lines) + "\n"


def trajectory_from_text(text: str):
    lines = [ln for ln in text.split("\n") if ln.strip()]
    if not lines or lines[0].split() != TRAJECTORY_HEADER.split():
        raise TrajectoryFormatError("missing trajectory header")
    rows = []
    for i, ln in enumerate(lines[1:], start=2):
        parts = ln.split()
        if len(parts) != 7:
            raise TrajectoryFormatError(f"line {i}: expected 7 fields")
        try:
            row = tuple(float(p) for p in parts)
        except ValueError as e:
            raise TrajectoryFormatError(f"line {i}: bad number") from e
        if not all(math.isfinite(x) for x in row):
            raise TrajectoryFormatError(f"line {i}: non-finite value")
        rows.append(row)
    return rows


def save_trajectory(rows, filename) -> None:
    with open(filename, "w") as f:
        f.write(trajectory_to_text(rows))


def load_trajectory(filename):
    with open(filename) as f:
        return trajectory_from_text(f.read())
