"""Moving disc obstacles driven by a social-force crowd model.

Each obstacle steers toward a private goal point, repelled exponentially by
other obstacles, by the robot, and by the nearest wall.  All obstacles are
advanced together from the same snapshot, then overlap and wall containment
are resolved by position projection.  An obstacle that cannot be pushed back
into free space reverts to its pre-step position, so a crowd that starts
collision-free never penetrates a wall.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .worldsim import InvalidSpec, OccupancyMap, RobotState, check_collision


@dataclass
class SfmParams:
    relaxation_time: float = 0.5      # pull toward desired velocity
    repulsion_strength: float = 2.0
    repulsion_range: float = 0.3      # e-folding distance of repulsion
    min_speed: float = 0.5            # desired-speed draw, uniform
    max_speed: float = 1.2
    radius: float = 0.3
    speed_cap_factor: float = 1.3     # hard cap relative to desired speed
    goal_radius: float = 0.3
    stall_steps: int = 50             # re-goal after this many stuck steps

    def __post_init__(self):
        if not (0.0 < self.min_speed <= self.max_speed):
            raise InvalidSpec("need 0 < min_speed <= max_speed")
        if self.radius <= 0 or self.relaxation_time <= 0:
            raise InvalidSpec("radius and relaxation_time must be > 0")


def _disc_free(grid: OccupancyMap, x: float, y: float, radius: float) -> bool:
    return not check_collision(grid, RobotState(x, y, 0.0, radius=radius))


def _sample_free(grid: OccupancyMap, rng, radius: float,
                 avoid=(), max_tries: int = 10_000):
    """Uniform free point keeping (point, distance) exclusions clear."""
    w, h = grid.extent
    for _ in range(max_tries):
        x, y = rng.uniform(0.0, w), rng.uniform(0.0, h)
        if not _disc_free(grid, x, y, radius):
            continue
        if any(math.hypot(x - px, y - py) < d for (px, py), d in avoid):
            continue
        return np.array((x, y))
    raise InvalidSpec("could not place a free disc; map too crowded")


class Crowd:
    """A set of social-force obstacles sharing one occupancy grid."""

    def __init__(self, grid: OccupancyMap, positions, rng,
                 params: SfmParams | None = None):
        self.grid = grid
        self.params = params or SfmParams()
        self.rng = rng
        self.positions = np.asarray(positions, dtype=float).reshape(-1, 2)
        n = len(self.positions)
        self.velocities = np.zeros((n, 2))
        self.desired_speeds = rng.uniform(self.params.min_speed,
                                          self.params.max_speed, size=n)
        self.goals = np.array([_sample_free(grid, rng, self.params.radius)
                               for _ in range(n)]) if n else np.zeros((0, 2))
        self._stall = np.zeros(n, dtype=int)

    @classmethod
    def spawn(cls, grid: OccupancyMap, n: int, rng,
              params: SfmParams | None = None, keep_clear=()):
        """Place ``n`` non-overlapping obstacles in free space.

        ``keep_clear`` is a list of ((x, y), distance) exclusions, e.g. the
        robot start and goal.
        """
        p = params or SfmParams()
        avoid = list(keep_clear)
        placed = []
        for _ in range(n):
            pt = _sample_free(grid, rng, p.radius, avoid)
            placed.append(pt)
            avoid.append((tuple(pt), 2.0 * p.radius))
        return cls(grid, np.array(placed).reshape(-1, 2), rng, p)

    def __len__(self):
        return len(self.positions)

    def discs(self):
        r = self.params.radius
        return [((float(x), float(y)), r) for x, y in self.positions]

    # -- forces ---------------------------------------------------------

    def _nearest_wall_points(self):
        """Closest wall-surface point per obstacle (cells and map edges)."""
        grid = self.grid
        w, h = grid.extent
        p = self.positions
        # candidate 1: map boundary projection
        edges = np.stack([p[:, 0], w - p[:, 0], p[:, 1], h - p[:, 1]], axis=1)
        choice = np.argmin(edges, axis=1)
        q = p.copy()
        q[choice == 0, 0] = 0.0
        q[choice == 1, 0] = w
        q[choice == 2, 1] = 0.0
        q[choice == 3, 1] = h
        # candidate 2: clamp onto the nearest occupied cell rectangle
        _, idx = grid.distance_field()
        if idx is not None:
            res = grid.resolution
            rows = np.clip((p[:, 1] // res).astype(int), 0,
                           grid.height_cells - 1)
            cols = np.clip((p[:, 0] // res).astype(int), 0,
                           grid.width_cells - 1)
            nr = idx[0][rows, cols]
            nc = idx[1][rows, cols]
            cx = np.clip(p[:, 0], nc * res, (nc + 1) * res)
            cy = np.clip(p[:, 1], nr * res, (nr + 1) * res)
            cell_q = np.stack([cx, cy], axis=1)
            closer = (np.hypot(*(p - cell_q).T) < np.hypot(*(p - q).T))
            q[closer] = cell_q[closer]
        return q

    def _repulsion(self, others, other_radii):
        """Exponential surface-gap repulsion from discs at ``others``."""
        prm = self.params
        diff = self.positions[:, None, :] - others[None, :, :]
        d = np.hypot(diff[..., 0], diff[..., 1])
        gap = d - (prm.radius + other_radii[None, :])
        mag = prm.repulsion_strength * np.exp(-gap / prm.repulsion_range)
        with np.errstate(invalid="ignore", divide="ignore"):
            n = diff / d[..., None]
        n = np.where(np.isfinite(n), n, 0.0)
        return (mag[..., None] * n).sum(axis=1)

    def _forces(self, robot: RobotState | None):
        prm = self.params
        p = self.positions
        to_goal = self.goals - p
        dist = np.hypot(to_goal[:, 0], to_goal[:, 1])
        with np.errstate(invalid="ignore", divide="ignore"):
            direction = to_goal / dist[:, None]
        direction = np.where(np.isfinite(direction), direction, 0.0)
        v_des = self.desired_speeds[:, None] * direction
        force = (v_des - self.velocities) / prm.relaxation_time

        if len(p) > 1:
            rep = self._repulsion(p, np.full(len(p), prm.radius))
            # the all-pairs table includes the self term with zero direction
            force += rep
        if robot is not None:
            force += self._repulsion(np.array([[robot.x, robot.y]]),
                                     np.array([robot.radius]))
        q = self._nearest_wall_points()
        diff = p - q
        d = np.hypot(diff[:, 0], diff[:, 1])
        mag = prm.repulsion_strength * np.exp(-(d - prm.radius)
                                              / prm.repulsion_range)
        with np.errstate(invalid="ignore", divide="ignore"):
            n = diff / d[:, None]
        n = np.where(np.isfinite(n), n, 0.0)
        force += mag[:, None] * n
        return force

    # -- integration ----------------------------------------------------

    def _separate_pairs(self, passes: int = 3):
        prm = self.params
        for _ in range(passes):
            diff = self.positions[:, None, :] - self.positions[None, :, :]
            d = np.hypot(diff[..., 0], diff[..., 1])
            ii, jj = np.nonzero(np.triu(d < 2.0 * prm.radius, k=1))
            if len(ii) == 0:
                return
            for i, j in zip(ii, jj):
                dij = d[i, j]
                if dij > 0:
                    n = diff[i, j] / dij
                else:
                    n = np.array((1.0, 0.0))
                push = 0.5 * (2.0 * prm.radius - dij)
                self.positions[i] += push * n
                self.positions[j] -= push * n

    def _contain(self, previous):
        prm = self.params
        walls = self._nearest_wall_points()
        for i in range(len(self.positions)):
            x, y = self.positions[i]
            if _disc_free(self.grid, x, y, prm.radius):
                continue
            q = walls[i]
            d = math.hypot(x - q[0], y - q[1])
            if d > 0:
                scale = (prm.radius + 1e-6) / d
                cand = q + (self.positions[i] - q) * scale
                if _disc_free(self.grid, cand[0], cand[1], prm.radius):
                    self.positions[i] = cand
                    continue
            # corner or deep overlap: give up on this step's motion
            self.positions[i] = previous[i]
            self.velocities[i] = 0.0

    def step(self, dt: float, robot: RobotState | None = None):
        """Advance every obstacle by ``dt`` seconds."""
        if len(self.positions) == 0:
            return
        prm = self.params
        previous = self.positions.copy()
        force = self._forces(robot)
        v = self.velocities + dt * force
        speed = np.hypot(v[:, 0], v[:, 1])
        cap = prm.speed_cap_factor * self.desired_speeds
        over = speed > cap
        v[over] *= (cap[over] / speed[over])[:, None]
        self.velocities = v
        self.positions = self.positions + dt * v
        self._separate_pairs()
        self._contain(previous)
        moved = np.hypot(*(self.positions - previous).T)
        # stalled means the net displacement is well under the intended step
        crawl_threshold = 0.1 * self.desired_speeds * dt
        arrived = (np.hypot(*(self.goals - self.positions).T)
                   < prm.goal_radius)
        self._stall = np.where(moved < crawl_threshold, self._stall + 1, 0)
        stuck = self._stall >= prm.stall_steps
        for i in np.nonzero(arrived | stuck)[0]:
            self.goals[i] = _sample_free(self.grid, self.rng, prm.radius)
            self._stall[i] = 0
