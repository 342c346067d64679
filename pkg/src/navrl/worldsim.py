"""Static world model: occupancy grid, 2D lidar, unicycle dynamics, noise.

The world is an axis-aligned occupancy grid. All geometry queries (raycasts,
collision checks, clearance) run against that grid plus an optional set of
moving obstacle discs supplied by the caller. Robot dynamics are a noisy
unicycle integrated with explicit Euler at the control period.

Conventions:
  * world frame: x right, y up, meters; cell (row, col) covers
    [col*res, (col+1)*res) x [row*res, (row+1)*res)
  * headings in radians, normalized to (-pi, pi]
  * cells array is indexed [row, col] == [y, x], row 0 at minimum y
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

V_MIN, V_MAX = -0.2, 1.0    # linear velocity bounds, m/s
W_MIN, W_MAX = -1.0, 1.0    # angular velocity bounds, rad/s
N_BEAMS = 64
DEFAULT_FOV = math.radians(220.0)
DEFAULT_MAX_RANGE = 5.0
DEFAULT_ROBOT_RADIUS = 0.3
DEFAULT_DT = 0.2            # 5 Hz control period


class InvalidPose(ValueError):
    """Robot center outside the map or inside an occupied cell."""


class InvalidSpec(ValueError):
    """Non-positive dimensions or otherwise unusable map spec."""


class MapFormatError(ValueError):
    """Map text does not follow the grid file format exactly."""


def wrap_angle(a):
    """Normalize an angle to (-pi, pi]."""
    return math.pi - (math.pi - a) % (2.0 * math.pi)


@dataclass
class OccupancyMap:
    """Discretized 2D world. `cells[row, col]` is True where occupied."""

    width_cells: int
    height_cells: int
    resolution: float
    cells: np.ndarray

    _occ_lo: np.ndarray = field(default=None, repr=False, compare=False)
    _occ_hi: np.ndarray = field(default=None, repr=False, compare=False)
    _edt: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.resolution <= 0:
            raise InvalidSpec("resolution must be > 0")
        cells = np.asarray(self.cells, dtype=bool)
        if cells.shape != (self.height_cells, self.width_cells):
            raise InvalidSpec(
                "cells shape %s does not match %dx%d"
                % (cells.shape, self.height_cells, self.width_cells))
        self.cells = cells

    @property
    def extent(self):
        """(width_m, height_m) of the world."""
        return (self.width_cells * self.resolution,
                self.height_cells * self.resolution)

    def cell_index(self, x, y):
        return (int(math.floor(y / self.resolution)),
                int(math.floor(x / self.resolution)))

    def in_bounds(self, x, y):
        w, h = self.extent
        return 0.0 <= x < w and 0.0 <= y < h

    def is_free_at(self, x, y):
        """True when (x, y) lies inside the map in an unoccupied cell."""
        if not self.in_bounds(x, y):
            return False
        r, c = self.cell_index(x, y)
        return not self.cells[r, c]

    def occupied_rects(self):
        """Per occupied cell (lo, hi) corner arrays, cached."""
        if self._occ_lo is None:
            rows, cols = np.nonzero(self.cells)
            lo = np.stack([cols, rows], axis=1) * self.resolution
            self._occ_lo = lo
            self._occ_hi = lo + self.resolution
        return self._occ_lo, self._occ_hi

    def distance_field(self):
        """EDT in meters from cell centers plus nearest-occupied indices.

        Half-cell accurate; used for fast wall queries, not exact clearance.
        """
        if self._edt is None:
            from scipy import ndimage
            free = ~self.cells
            if not self.cells.any():
                dist = np.full(self.cells.shape, np.inf)
                idx = None
            else:
                dist, idx = ndimage.distance_transform_edt(
                    free, return_indices=True)
                dist = dist * self.resolution
            self._edt = (dist, idx)
        return self._edt

    def nearest_occupied_cell(self, x, y):
        """(row, col) of an occupied cell near (x, y), or None if map is empty.

        Nearest by cell-center metric (EDT); exact rect distance may differ
        by up to half a cell diagonal.
        """
        dist, idx = self.distance_field()
        if idx is None:
            return None
        r, c = self.cell_index(x, y)
        r = min(max(r, 0), self.height_cells - 1)
        c = min(max(c, 0), self.width_cells - 1)
        return int(idx[0][r, c]), int(idx[1][r, c])

    def with_cells(self, cells):
        return OccupancyMap(self.width_cells, self.height_cells,
                            self.resolution, cells)


@dataclass
class RobotState:
    x: float
    y: float
    heading: float
    radius: float = DEFAULT_ROBOT_RADIUS

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be > 0")
        self.heading = wrap_angle(self.heading)

    @property
    def position(self):
        return np.array([self.x, self.y])


@dataclass
class Action:
    v: float
    w: float

    def clamped(self):
        return Action(min(max(self.v, V_MIN), V_MAX),
                      min(max(self.w, W_MIN), W_MAX))


@dataclass
class LidarScan:
    """One 64-beam scan. Beam k points at heading - fov/2 + k*fov/63."""

    ranges: np.ndarray
    fov: float = DEFAULT_FOV
    max_range: float = DEFAULT_MAX_RANGE

    def __post_init__(self):
        self.ranges = np.asarray(self.ranges, dtype=float)
        if self.ranges.shape != (N_BEAMS,):
            raise ValueError("scan must have exactly %d beams" % N_BEAMS)


def beam_angles(heading, fov=DEFAULT_FOV, n_beams=N_BEAMS):
    """World-frame beam directions, evenly spaced and centered on heading."""
    k = np.arange(n_beams)
    return heading - fov / 2.0 + k * (fov / (n_beams - 1))


@dataclass
class NoiseParams:
    sigma_lidar: float = 0.3
    sigma_speed: float = 0.1
    sigma_turning: float = 0.1
    sigma_localize: float = 0.1

    def __post_init__(self):
        for name in ("sigma_lidar", "sigma_speed", "sigma_turning",
                     "sigma_localize"):
            if getattr(self, name) < 0:
                raise ValueError("%s must be >= 0" % name)

    @classmethod
    def zero(cls):
        return cls(0.0, 0.0, 0.0, 0.0)

    def scaled(self, factor):
        return NoiseParams(self.sigma_lidar * factor,
                           self.sigma_speed * factor,
                           self.sigma_turning * factor,
                           self.sigma_localize * factor)


@njit(cache=True)
def _raycast_grid(occ, res, x0, y0, angles, max_range):
    # Amanatides & Woo incremental grid traversal. The start cell is known
    # free; ties at cell corners advance the x axis first.
    n = angles.shape[0]
    out = np.empty(n)
    height, width = occ.shape
    for k in range(n):
        dx = math.cos(angles[k])
        dy = math.sin(angles[k])
        cx = int(math.floor(x0 / res))
        cy = int(math.floor(y0 / res))
        if dx > 0.0:
            step_x = 1
            t_max_x = ((cx + 1) * res - x0) / dx
            t_delta_x = res / dx
        elif dx < 0.0:
            step_x = -1
            t_max_x = (cx * res - x0) / dx
            t_delta_x = -res / dx
        else:
            step_x = 0
            t_max_x = np.inf
            t_delta_x = np.inf
        if dy > 0.0:
            step_y = 1
            t_max_y = ((cy + 1) * res - y0) / dy
            t_delta_y = res / dy
        elif dy < 0.0:
            step_y = -1
            t_max_y = (cy * res - y0) / dy
            t_delta_y = -res / dy
        else:
            step_y = 0
            t_max_y = np.inf
            t_delta_y = np.inf
        rng = max_range
        while True:
            if t_max_x <= t_max_y:
                t = t_max_x
                if t > max_range:
                    break
                cx += step_x
                t_max_x += t_delta_x
            else:
                t = t_max_y
                if t > max_range:
                    break
                cy += step_y
                t_max_y += t_delta_y
            if cx < 0 or cx >= width or cy < 0 or cy >= height:
                break  # ray leaves the map: report max_range
            if occ[cy, cx]:
                rng = t
                break
        out[k] = rng
    return out


def _raycast_discs(x0, y0, angles, discs, max_range):
    """Smallest non-negative ray parameter against each disc, per beam."""
    if not discs:
        return np.full(angles.shape, np.inf)
    centers = np.array([[cx, cy] for (cx, cy), _ in discs])
    radii = np.array([r for _, r in discs])
    dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)  # (B, 2)
    rel = centers - np.array([x0, y0])                         # (D, 2)
    b = dirs @ rel.T                                           # (B, D)
    c = np.sum(rel ** 2, axis=1)[None, :] - radii[None, :] ** 2
    disc2 = b * b - c
    valid = disc2 >= 0.0
    sq = np.sqrt(np.where(valid, disc2, 0.0))
    # near root if ahead, 0 when the origin is inside, inf when missed
    t = np.where(valid & (b + sq >= 0.0), np.maximum(b - sq, 0.0), np.inf)
    return t.min(axis=1)


def _require_valid_pose(grid, state):
    if not grid.in_bounds(state.x, state.y):
        raise InvalidPose("robot center (%.3f, %.3f) outside map"
                          % (state.x, state.y))
    r, c = grid.cell_index(state.x, state.y)
    if grid.cells[r, c]:
        raise InvalidPose("robot center (%.3f, %.3f) in occupied cell"
                          % (state.x, state.y))


def raycast(grid, state, max_range=DEFAULT_MAX_RANGE, obstacle_discs=None,
            fov=DEFAULT_FOV):
    """Noise-free lidar scan from the robot pose.

    Each beam reports the distance to the first occupied cell boundary or
    obstacle disc, capped at max_range. Rays leaving the map report
    max_range. Raises InvalidPose when the robot center is not in free space.
    """
    _require_valid_pose(grid, state)
    angles = beam_angles(state.heading, fov)
    ranges = _raycast_grid(grid.cells, grid.resolution,
                           state.x, state.y, angles, max_range)
    if obstacle_discs:
        t_discs = _raycast_discs(state.x, state.y, angles,
                                 obstacle_discs, max_range)
        ranges = np.minimum(ranges, np.minimum(t_discs, max_range))
    return LidarScan(ranges, fov=fov, max_range=max_range)


def sense(grid, state, noise, rng, max_range=DEFAULT_MAX_RANGE,
          obstacle_discs=None, fov=DEFAULT_FOV):
    """Lidar scan with per-beam Gaussian noise, clamped to [0, max_range]."""
    scan = raycast(grid, state, max_range, obstacle_discs, fov)
    if noise.sigma_lidar > 0:
        noisy = scan.ranges + rng.normal(0.0, noise.sigma_lidar, N_BEAMS)
        scan = LidarScan(np.clip(noisy, 0.0, max_range),
                         fov=fov, max_range=max_range)
    return scan


def step_dynamics(state, action, dt, noise, rng):
    """One Euler step of the noisy unicycle. No collision handling here."""
    a = action.clamped()
    v = a.v
    w = a.w
    if noise.sigma_speed > 0:
        v += rng.normal(0.0, noise.sigma_speed)
    if noise.sigma_turning > 0:
        w += rng.normal(0.0, noise.sigma_turning)
    return replace(state,
                   x=state.x + v * math.cos(state.heading) * dt,
                   y=state.y + v * math.sin(state.heading) * dt,
                   heading=wrap_angle(state.heading + w * dt))


def localize(state, noise, rng):
    """Believed pose: position plus Gaussian noise, heading unperturbed."""
    x, y = state.x, state.y
    if noise.sigma_localize > 0:
        x += rng.normal(0.0, noise.sigma_localize)
        y += rng.normal(0.0, noise.sigma_localize)
    return (x, y, state.heading)


def _rect_distances(lo, hi, p):
    """Distance from point p to axis-aligned rectangles [lo, hi]."""
    d = np.maximum(np.maximum(lo - p, p - hi), 0.0)
    return np.hypot(d[:, 0], d[:, 1])


def check_collision(grid, state, obstacle_discs=()):
    """True iff the robot disc overlaps any occupied cell, any obstacle
    disc, or crosses the map boundary. Exact touching does not collide."""
    w, h = grid.extent
    r = state.radius
    if (state.x - r < 0.0 or state.y - r < 0.0
            or state.x + r > w or state.y + r > h):
        return True
    res = grid.resolution
    c_lo = max(int(math.floor((state.x - r) / res)), 0)
    c_hi = min(int(math.floor((state.x + r) / res)), grid.width_cells - 1)
    r_lo = max(int(math.floor((state.y - r) / res)), 0)
    r_hi = min(int(math.floor((state.y + r) / res)), grid.height_cells - 1)
    window = grid.cells[r_lo:r_hi + 1, c_lo:c_hi + 1]
    if window.any():
        rows, cols = np.nonzero(window)
        lo = np.stack([cols + c_lo, rows + r_lo], axis=1) * res
        d = _rect_distances(lo, lo + res, np.array([state.x, state.y]))
        if (d < r).any():
            return True
    for (cx, cy), cr in obstacle_discs:
        if math.hypot(cx - state.x, cy - state.y) < r + cr:
            return True
    return False


def clearance(grid, state, obstacle_discs=()):
    """Distance from the robot surface to the closest obstacle surface.

    Considers occupied cell boundaries, the map boundary, and obstacle
    discs; returns 0 in contact. Call only on non-colliding states.
    """
    p = np.array([state.x, state.y])
    w, h = grid.extent
    best = min(state.x, state.y, w - state.x, h - state.y)
    lo, hi = grid.occupied_rects()
    if len(lo):
        best = min(best, _rect_distances(lo, hi, p).min())
    for (cx, cy), cr in obstacle_discs:
        best = min(best, math.hypot(cx - state.x, cy - state.y) - cr)
    return max(best - state.radius, 0.0)


@dataclass
class MapSpec:
    """Procedural map parameters. Styles:

    empty     outer walls only
    corridor  solid block with one free horizontal band of corridor_width
    boxes     outer walls plus n_boxes random rectangular blocks
    rooms     recursive wall splits with door gaps, office-like
    """
    width_m: float
    height_m: float
    resolution: float = 0.1
    style: str = "empty"
    corridor_width: float = 2.0
    n_boxes: int = 3
    box_size: tuple = (0.5, 1.5)
    room_min_size: float = 3.0
    door_width: float = 1.0


def generate_map(spec, seed=0):
    """Deterministic-in-seed procedural occupancy map with outer walls.

    Start/goal reachability is not guaranteed; planners check that later.
    """
    if spec.width_m <= 0 or spec.height_m <= 0 or spec.resolution <= 0:
        raise InvalidSpec("map dimensions and resolution must be positive")
    res = spec.resolution
    width = int(round(spec.width_m / res))
    height = int(round(spec.height_m / res))
    if width < 3 or height < 3:
        raise InvalidSpec("map too small for outer walls")
    rng = np.random.default_rng(seed)
    cells = np.zeros((height, width), dtype=bool)
    cells[0, :] = cells[-1, :] = True
    cells[:, 0] = cells[:, -1] = True

    if spec.style == "empty":
        pass
    elif spec.style == "corridor":
        band = max(int(round(spec.corridor_width / res)), 1)
        if band > height - 2:
            raise InvalidSpec("corridor wider than the map interior")
        cells[:, :] = True
        r0 = (height - band) // 2
        cells[r0:r0 + band, 1:width - 1] = False
    elif spec.style == "boxes":
        for _ in range(spec.n_boxes):
            bw = int(round(rng.uniform(*spec.box_size) / res))
            bh = int(round(rng.uniform(*spec.box_size) / res))
            bw, bh = max(bw, 1), max(bh, 1)
            if width - 2 - bw <= 1 or height - 2 - bh <= 1:
                continue
            c0 = rng.integers(1, width - 1 - bw)
            r0 = rng.integers(1, height - 1 - bh)
            cells[r0:r0 + bh, c0:c0 + bw] = True
    elif spec.style == "rooms":
        door = max(int(round(spec.door_width / res)), 1)
        min_cells = max(int(round(spec.room_min_size / res)), 2 * door + 2)
        _split_rooms(cells, rng, 1, 1, width - 1, height - 1,
                     min_cells, door)
    else:
        raise InvalidSpec("unknown map style %r" % spec.style)
    return OccupancyMap(width, height, res, cells)


def _split_rooms(cells, rng, c0, r0, c1, r1, min_cells, door):
    w, h = c1 - c0, r1 - r0
    if w < 2 * min_cells + 1 and h < 2 * min_cells + 1:
        return
    split_vertical = w >= h
    if split_vertical:
        if w < 2 * min_cells + 1:
            return
        col = int(rng.integers(c0 + min_cells, c1 - min_cells))
        cells[r0:r1, col] = True
        gap = int(rng.integers(r0, r1 - door + 1))
        cells[gap:gap + door, col] = False
        _split_rooms(cells, rng, c0, r0, col, r1, min_cells, door)
        _split_rooms(cells, rng, col + 1, r0, c1, r1, min_cells, door)
    else:
        if h < 2 * min_cells + 1:
            return
        row = int(rng.integers(r0 + min_cells, r1 - min_cells))
        cells[row, c0:c1] = True
        gap = int(rng.integers(c0, c1 - door + 1))
        cells[row, gap:gap + door] = False
        _split_rooms(cells, rng, c0, r0, c1, row, min_cells, door)
        _split_rooms(cells, rng, c0, row + 1, c1, r1, min_cells, door)


# --- map text format ------------------------------------------------------
# First line: "width_cells height_cells resolution_m". Then height_cells
# lines of width_cells characters, '#' occupied and '.' free, row 0 (the
# minimum-y row) first. Any other character is a format error.

def map_to_text(grid):
    lines = ["%d %d %s" % (grid.width_cells, grid.height_cells,
                           repr(float(grid.resolution)))]
    for row in grid.cells:
        lines.append("".join("#" if v else "." for v in row))
    return "\n".join(lines) + "\n"


def map_from_text(text):
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines = lines[:-1]
    if not lines:
        raise MapFormatError("empty map text")
    header = lines[0].split()
    if len(header) != 3:
        raise MapFormatError("header must be 'width height resolution'")
    try:
        width, height = int(header[0]), int(header[1])
        res = float(header[2])
    except ValueError as e:
        raise MapFormatError("bad header values: %s" % e) from None
    if width <= 0 or height <= 0 or res <= 0:
        raise MapFormatError("header values must be positive")
    if len(lines) - 1 != height:
        raise MapFormatError("expected %d rows, found %d"
                             % (height, len(lines) - 1))
    cells = np.zeros((height, width), dtype=bool)
    for r, line in enumerate(lines[1:]):
        if len(line) != width:
            raise MapFormatError("row %d has %d characters, expected %d"
                                 % (r, len(line), width))
        for c, ch in enumerate(line):
            if ch == "#":
                cells[r, c] = True
            elif ch != ".":
                raise MapFormatError("invalid character %r in row %d"
                                     % (ch, r))
    return OccupancyMap(width, height, res, cells)


def save_map(grid, path):
    with open(path, "w") as f:
        f.write(map_to_text(grid))


def load_map(path):
    with open(path) as f:
        return map_from_text(f.read())
