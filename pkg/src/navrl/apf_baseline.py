"""Artificial potential field controller, the classical baseline.

Attraction pulls toward a lookahead point on the planned path (or straight
toward the goal for point-goal episodes); every lidar beam inside the
influence distance pushes back along its own direction.  The net force is
turned into differential-drive commands: forward speed follows the force
component along the heading and the turn rate follows the heading error.

The controller is intentionally greedy and memoryless, so concave obstacles
trap it; the policy adapters convert the stuck condition into a stop, which
the episode then times out on.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .worldsim import V_MAX, V_MIN, W_MAX, W_MIN, beam_angles, wrap_angle


class Stuck(Exception):
    """Net potential force vanished; the controller has no direction."""


@dataclass
class ApfParams:
    attraction_gain: float = 1.0
    repulsion_gain: float = 0.5
    influence_dist: float = 1.5   # beams further than this exert nothing
    lookahead: float = 1.0        # pursuit distance past the next waypoint
    speed_gain: float = 1.0
    turn_gain: float = 1.0
    stuck_threshold: float = 1e-3


def repulsive_force(scan_ranges, believed_heading: float, params: ApfParams,
                    fov: float) -> np.ndarray:
    """Sum of per-beam pushes, world frame.

    A beam at distance d inside the influence radius contributes
    gain * (1/d - 1/d_inf) / d^2 pointing from the hit back at the robot.
    """
    ranges = np.maximum(np.asarray(scan_ranges, dtype=float), 1e-3)
    angles = beam_angles(believed_heading, fov)
    near = ranges < params.influence_dist
    if not near.any():
        return np.zeros(2)
    d = ranges[near]
    mag = params.repulsion_gain * (1.0 / d - 1.0 / params.influence_dist) / (
        d * d)
    dirs = np.stack([np.cos(angles[near]), np.sin(angles[near])], axis=1)
    return -(mag[:, None] * dirs).sum(axis=0)


def _commands(force: np.ndarray, believed_heading: float,
              params: ApfParams):
    norm = float(np.hypot(force[0], force[1]))
    if norm < params.stuck_threshold:
        raise Stuck(f"net force {norm:.2e}")
    heading_err = wrap_angle(math.atan2(force[1], force[0])
                             - believed_heading)
    v = params.speed_gain * norm * math.cos(heading_err)
    v = min(max(v, 0.0), V_MAX)  # never reverse out of a potential
    w = min(max(params.turn_gain * heading_err, W_MIN), W_MAX)
    return v, w


def path_lookahead_point(path, params: ApfParams) -> np.ndarray:
    """World point on the path ``lookahead`` meters past the next waypoint."""
    wps = path.waypoints
    j = path.first_unreached()
    if j is None:
        return wps[-1].copy()
    remaining = params.lookahead
    point = wps[j].copy()
    for k in range(j, len(wps) - 1):
        seg = wps[k + 1] - wps[k]
        seg_len = float(np.hypot(seg[0], seg[1]))
        if seg_len >= remaining:
            return wps[k] + seg * (remaining / seg_len)
        remaining -= seg_len
    return wps[-1].copy()


def apf_action(ctx, params: ApfParams | None = None):
    """Path-following potential step from a policy step context."""
    p = params or ApfParams()
    x, y, heading = ctx.believed_pose
    target = path_lookahead_point(ctx.path, p)
    to_target = target - (x, y)
    dist = float(np.hypot(to_target[0], to_target[1]))
    if dist > 0.0:
        attract = p.attraction_gain * to_target / dist
    else:
        attract = np.zeros(2)
    force = attract + repulsive_force(ctx.scan.ranges, heading, p, ctx.fov)
    return _commands(force, heading, p)


def apf_p2p_action(ctx, params: ApfParams | None = None):
    """Point-goal potential step: attraction straight along the believed
    goal bearing."""
    p = params or ApfParams()
    _, _, heading = ctx.believed_pose
    dist, bearing = float(ctx.goal_vector[0]), float(ctx.goal_vector[1])
    if dist > 0.0:
        world = heading + bearing
        attract = p.attraction_gain * np.array([math.cos(world),
                                                math.sin(world)])
    else:
        attract = np.zeros(2)
    force = attract + repulsive_force(ctx.scan.ranges, heading, p, ctx.fov)
    return _commands(force, heading, p)


class ApfPolicy:
    """Path-following adapter; a stuck controller just stops."""

    def __init__(self, params: ApfParams | None = None):
        self.params = params or ApfParams()

    def act(self, ctx):
        try:
            return apf_action(ctx, self.params)
        except Stuck:
            return (0.0, 0.0)


class ApfP2PPolicy:
    def __init__(self, params: ApfParams | None = None):
        self.params = params or ApfParams()

    def act(self, ctx):
        try:
            return apf_p2p_action(ctx, self.params)
        except Stuck:
            return (0.0, 0.0)
