"""Generate one map of each style and scan it with the simulated lidar.

Run:  python3 demos/world_tour.py
"""
import numpy as np

from navrl import (
    MapSpec,
    RobotState,
    generate_map,
    raycast,
    sample_free_point,
)


def render(grid, robot=None):
    rows = []
    for r in range(grid.height_cells - 1, -1, -1):
        rows.append("".join("#" if grid.cells[r, c] else "."
                            for c in range(grid.width_cells)))
    if robot is not None:
        rr, cc = grid.cell_index(robot.x, robot.y)
        line = rows[grid.height_cells - 1 - rr]
        rows[grid.height_cells - 1 - rr] = line[:cc] + "R" + line[cc + 1:]
    return "\n".join(rows)


def main():
    specs = [
        ("empty", MapSpec(8.0, 5.0, 0.5, style="empty")),
        ("corridor", MapSpec(12.0, 5.0, 0.5, style="corridor",
                             corridor_width=2.0)),
        ("boxes", MapSpec(10.0, 8.0, 0.5, style="boxes", n_boxes=3)),
        ("rooms", MapSpec(14.0, 9.0, 0.5, style="rooms")),
    ]
    rng = np.random.default_rng(7)
    for name, spec in specs:
        grid = generate_map(spec, seed=3)
        x, y = sample_free_point(grid, rng)
        robot = RobotState(x, y, float(rng.uniform(-np.pi, np.pi)))
        scan = raycast(grid, robot)
        w, h = grid.extent
        free = int((~grid.cells).sum())
        print(f"--- {name}: {w:.0f} x {h:.0f} m at {grid.resolution} m/cell, "
              f"{free} free cells")
        print(render(grid, robot))
        print(f"lidar from ({x:.1f}, {y:.1f}): nearest hit "
              f"{scan.ranges.min():.2f} m, mean {scan.ranges.mean():.2f} m, "
              f"{int((scan.ranges >= scan.max_range).sum())} beams at "
              f"max range")
        print()


if __name__ == "__main__":
    main()
