"""Watch a social-force crowd wander a cluttered map.

Run:  python3 demos/crowd_flow.py
"""
import numpy as np

from navrl import Crowd, MapSpec, SfmParams, generate_map


def snapshot(grid, crowd):
    cell = max(grid.resolution, 0.5)
    w, h = grid.extent
    cols, rows = int(w / cell), int(h / cell)
    art = [["." for _ in range(cols)] for _ in range(rows)]
    for r in range(rows):
        for c in range(cols):
            if not grid.is_free_at((c + 0.5) * cell, (r + 0.5) * cell):
                art[r][c] = "#"
    for x, y in crowd.positions:
        r, c = min(int(y / cell), rows - 1), min(int(x / cell), cols - 1)
        art[r][c] = "o"
    return "\n".join("".join(row) for row in reversed(art))


def main():
    grid = generate_map(MapSpec(20.0, 12.0, 0.25, style="boxes", n_boxes=4),
                        seed=9)
    params = SfmParams()
    crowd = Crowd.spawn(grid, 25, np.random.default_rng(1), params)
    dt = 0.2

    for step in range(1, 601):
        crowd.step(dt)
        if step % 200 == 0:
            speeds = np.hypot(crowd.velocities[:, 0], crowd.velocities[:, 1])
            print(f"t = {step * dt:5.1f} s   mean speed "
                  f"{speeds.mean():.2f} m/s   max {speeds.max():.2f} m/s")
            print(snapshot(grid, crowd))
            print()


if __name__ == "__main__":
    main()
