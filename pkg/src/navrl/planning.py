"""Waypoint paths and roadmap planning on occupancy grids.

A path is a polyline resampled into evenly spaced waypoints with per-waypoint
reached flags.  Global planning uses a probabilistic roadmap built once per
map; individual queries splice start and goal into the prebuilt graph.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .worldsim import (
    DEFAULT_ROBOT_RADIUS,
    InvalidPose,
    OccupancyMap,
    RobotState,
    check_collision,
)

DEFAULT_WAYPOINT_SPACING = 1.0
DEFAULT_REACH_RADIUS = 0.3


class NoPath(Exception):
    """The roadmap does not connect start to goal."""


class PathFormatError(ValueError):
    """Malformed path dump text."""


def path_length(points) -> float:
    pts = np.asarray(points, dtype=float)
    if len(pts) < 2:
        return 0.0
    seg = np.diff(pts, axis=0)
    return float(np.hypot(seg[:, 0], seg[:, 1]).sum())


def interpolate(points, spacing: float = DEFAULT_WAYPOINT_SPACING):
    """Resample a polyline at arc-length multiples of ``spacing``.

    The first output point is the polyline start and the last is the exact
    final vertex, whatever arc length remains before it.  Zero-length input
    segments are dropped before resampling.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) == 0:
        raise ValueError("polyline must be a non-empty (n, 2) array")
    if not np.isfinite(pts).all():
        raise ValueError("polyline contains non-finite coordinates")
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    if len(pts) > 1:
        keep = np.hypot(*np.diff(pts, axis=0).T) > 0.0
        pts = np.concatenate([pts[:1], pts[1:][keep]])
    if len(pts) == 1:
        return pts.copy()
    seg = np.diff(pts, axis=0)
    seglen = np.hypot(seg[:, 0], seg[:, 1])
    cum = np.concatenate([[0.0], np.cumsum(seglen)])
    total = cum[-1]
    targets = np.arange(0.0, total, spacing)
    # guard against a resampled point landing on top of the final vertex
    targets = targets[targets < total - 1e-9]
    out = np.empty((len(targets) + 1, 2))
    for n, s in enumerate(targets):
        i = min(np.searchsorted(cum, s, side="right") - 1, len(seglen) - 1)
        t = (s - cum[i]) / seglen[i]
        out[n] = pts[i] + t * seg[i]
    out[-1] = pts[-1]
    return out


@dataclass
class Path:
    """Evenly spaced waypoints plus monotone reached flags."""

    waypoints: np.ndarray
    reached: np.ndarray

    def __post_init__(self):
        self.waypoints = np.asarray(self.waypoints, dtype=float)
        self.reached = np.asarray(self.reached, dtype=bool)
        if self.waypoints.ndim != 2 or self.waypoints.shape[1] != 2:
            raise ValueError("waypoints must be an (n, 2) array")
        if self.reached.shape != (len(self.waypoints),):
            raise ValueError("reached flags must match waypoint count")

    @classmethod
    def from_polyline(cls, points, spacing: float = DEFAULT_WAYPOINT_SPACING):
        wps = interpolate(points, spacing)
        return cls(wps, np.zeros(len(wps), dtype=bool))

    @property
    def all_reached(self) -> bool:
        return bool(self.reached.all())

    @property
    def fraction_reached(self) -> float:
        return float(self.reached.sum()) / len(self.reached)

    def first_unreached(self):
        idx = np.flatnonzero(~self.reached)
        return int(idx[0]) if len(idx) else None

    def length(self) -> float:
        return path_length(self.waypoints)

    def copy(self) -> "Path":
        return Path(self.waypoints.copy(), self.reached.copy())


def update_reached(path: Path, position, reach_radius: float = DEFAULT_REACH_RADIUS) -> bool:
    """Mark waypoints reached by the true robot position.

    A waypoint counts only once every earlier one does, so the flags stay a
    prefix of the path however the robot wanders.  Several waypoints can fall
    in one update when they bunch up near the path end.  Returns True once
    the whole path is reached.
    """
    pos = np.asarray(position, dtype=float)
    for i in range(len(path.waypoints)):
        if path.reached[i]:
            continue
        if i > 0 and not path.reached[i - 1]:
            break
        d = math.hypot(path.waypoints[i, 0] - pos[0],
                       path.waypoints[i, 1] - pos[1])
        if d < reach_radius:
            path.reached[i] = True
        else:
            break
    return path.all_reached


def partial_path_observation(path: Path, believed_pose, n_partial: int = 2):
    """Next ``n_partial + 1`` unreached waypoints in the robot frame.

    Waypoints past the end of the path are padded by repeating the final
    one, so the observation keeps a fixed shape as the path runs out.
    ``believed_pose`` is an (x, y, heading) triple; the transform is
    egocentric (x forward, y left).
    """
    x, y, heading = believed_pose
    j = path.first_unreached()
    if j is None:
        j = len(path.waypoints) - 1
    idx = np.minimum(np.arange(j, j + n_partial + 1), len(path.waypoints) - 1)
    rel = path.waypoints[idx] - (x, y)
    c, s = math.cos(heading), math.sin(heading)
    rot = np.array([[c, s], [-s, c]])
    return rel @ rot.T


def path_to_text(path: Path) -> str:
    lines = []
    for (x, y), flag in zip(path.waypoints, path.reached):
        lines.append(f"{float(x)!r} {float(y)!r} {int(flag)}")
    return "\n".join(lines) + "\n"


def path_from_text(text: str) -> Path:
    rows = [ln for ln in text.split("\n") if ln.strip()]
    if not rows:
        raise PathFormatError("empty path dump")
    wps = np.empty((len(rows), 2))
    flags = np.empty(len(rows), dtype=bool)
    for i, ln in enumerate(rows):
        parts = ln.split()
        if len(parts) != 3:
            raise PathFormatError(f"line {i + 1}: expected 'x y flag'")
        try:
            wps[i] = (float(parts[0]), float(parts[1]))
        except ValueError as e:
            raise PathFormatError(f"line {i + 1}: bad coordinate") from e
        if not np.isfinite(wps[i]).all():
            raise PathFormatError(f"line {i + 1}: non-finite coordinate")
        if parts[2] not in ("0", "1"):
            raise PathFormatError(f"line {i + 1}: flag must be 0 or 1")
        flags[i] = parts[2] == "1"
    return Path(wps, flags)


def save_path(path: Path, filename) -> None:
    with open(filename, "w") as f:
        f.write(path_to_text(path))


def load_path(filename) -> Path:
    with open(filename) as f:
        return path_from_text(f.read())


# --- probabilistic roadmap ---------------------------------------------------


@dataclass
class RoadmapConfig:
    n_nodes: int = 200
    connect_radius: float = 2.0
    robot_radius: float = DEFAULT_ROBOT_RADIUS
    check_spacing: float | None = None  # default: one grid cell


def disc_free(grid: OccupancyMap, point, radius: float = DEFAULT_ROBOT_RADIUS) -> bool:
    state = RobotState(float(point[0]), float(point[1]), 0.0, radius=radius)
    return not check_collision(grid, state)


def segment_free(grid: OccupancyMap, a, b, radius: float,
                 check_spacing: float) -> bool:
    """Swept-disc validity via evenly spaced sample discs along the segment."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    dist = math.hypot(b[0] - a[0], b[1] - a[1])
    n = max(2, int(math.ceil(dist / check_spacing)) + 1)
    for t in np.linspace(0.0, 1.0, n):
        if not disc_free(grid, a + t * (b - a), radius):
            return False
    return True


def sample_free_point(grid: OccupancyMap, rng, radius: float = DEFAULT_ROBOT_RADIUS,
                      max_tries: int = 10_000):
    w, h = grid.extent
    for _ in range(max_tries):
        p = (rng.uniform(0.0, w), rng.uniform(0.0, h))
        if disc_free(grid, p, radius):
            return np.array(p)
    raise NoPath("could not sample a collision-free point")


def _dijkstra(adjacency, start: int, goal: int):
    """Shortest node path; equal-cost ties broken by lexicographic node path."""
    heap = [(0.0, (start,))]
    done = set()
    while heap:
        d, node_path = heapq.heappop(heap)
        node = node_path[-1]
        if node in done:
            continue
        done.add(node)
        if node == goal:
            return d, list(node_path)
        for j, w in adjacency[node]:
            if j not in done:
                heapq.heappush(heap, (d + w, node_path + (j,)))
    raise NoPath("no route through the roadmap")


class Roadmap:
    """Probabilistic roadmap over the free space of one occupancy grid."""

    def __init__(self, grid: OccupancyMap, nodes, adjacency,
                 config: RoadmapConfig):
        self.grid = grid
        self.nodes = np.asarray(nodes, dtype=float)
        self.adjacency = adjacency
        self.config = config
        self._tree = cKDTree(self.nodes) if len(self.nodes) else None

    @classmethod
    def build(cls, grid: OccupancyMap, config: RoadmapConfig | None = None,
              seed: int = 0) -> "Roadmap":
        cfg = config or RoadmapConfig()
        rng = np.random.default_rng(seed)
        spacing = cfg.check_spacing or grid.resolution
        nodes = np.array([sample_free_point(grid, rng, cfg.robot_radius)
                          for _ in range(cfg.n_nodes)])
        adjacency = [[] for _ in range(cfg.n_nodes)]
        if cfg.n_nodes > 1:
            tree = cKDTree(nodes)
            pairs = sorted(map(tuple, tree.query_pairs(
                cfg.connect_radius, output_type="ndarray")))
            for i, j in pairs:
                if segment_free(grid, nodes[i], nodes[j], cfg.robot_radius,
                                spacing):
                    w = float(np.hypot(*(nodes[i] - nodes[j])))
                    adjacency[i].append((j, w))
                    adjacency[j].append((i, w))
            for nbrs in adjacency:
                nbrs.sort()
        return cls(grid, nodes, adjacency, cfg)

    def n_edges(self) -> int:
        return sum(len(a) for a in self.adjacency) // 2

    def plan(self, start, goal):
        """Node polyline from start to goal, both endpoints included."""
        cfg = self.config
        spacing = cfg.check_spacing or self.grid.resolution
        start = np.asarray(start, dtype=float)
        goal = np.asarray(goal, dtype=float)
        for name, p in (("start", start), ("goal", goal)):
            if not disc_free(self.grid, p, cfg.robot_radius):
                raise InvalidPose(f"{name} position is not collision-free")
        n = len(self.nodes)
        s_idx, g_idx = n, n + 1
        adjacency = [list(a) for a in self.adjacency] + [[], []]

        def attach(idx, point):
            if self._tree is None:
                return
            for j in sorted(self._tree.query_ball_point(point,
                                                        cfg.connect_radius)):
                if segment_free(self.grid, point, self.nodes[j],
                                cfg.robot_radius, spacing):
                    w = float(np.hypot(*(point - self.nodes[j])))
                    adjacency[idx].append((j, w))
                    adjacency[j].append((idx, w))

        attach(s_idx, start)
        attach(g_idx, goal)
        direct = float(np.hypot(*(goal - start)))
        if direct <= cfg.connect_radius and segment_free(
                self.grid, start, goal, cfg.robot_radius, spacing):
            adjacency[s_idx].append((g_idx, direct))
            adjacency[g_idx].append((s_idx, direct))
        _, node_path = _dijkstra(adjacency, s_idx, g_idx)
        coords = [start if k == s_idx else goal if k == g_idx
                  else self.nodes[k] for k in node_path]
        return np.array(coords)

    def plan_path(self, start, goal,
                  spacing: float = DEFAULT_WAYPOINT_SPACING) -> Path:
        return Path.from_polyline(self.plan(start, goal), spacing)
