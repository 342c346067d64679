"""Sweep lidar noise against the potential-field path follower.

Runs the evaluation harness over a noise grid on a fixed corridor and
prints the aggregate table it would write to metrics.csv.

Run:  python3 demos/noise_sweep.py
"""
from navrl import (
    MapSpec,
    SweepSpec,
    TaskConfig,
    generate_map,
    metrics_to_csv,
    run_sweep,
)


def main():
    grid = generate_map(MapSpec(24.0, 5.0, 0.25, style="corridor",
                                corridor_width=2.4))
    base = TaskConfig(kind="pf", fixed_start=(2.0, 2.5, 0.0),
                      fixed_path=((2.0, 2.5), (22.0, 2.5)))
    spec = SweepSpec(
        maps=(("corridor", grid),),
        kind="pf",
        policy="apf",
        episodes=10,
        sigma_lidar=(0.0, 0.3, 0.6, 1.0),
        sigma_localize=(0.1,),
        process_noise=((0.1, 0.1),),
        base_config=base,
    )
    rows, records = run_sweep(spec)
    print(f"{len(records)} episodes across {len(rows)} cells\n")
    print(f"{'sigma_lidar':>11}  {'success':>7}  {'waypoint frac':>13}  "
          f"{'finish time':>11}")
    for row in rows:
        finish = ("-" if row.mean_finish_time != row.mean_finish_time
                  else f"{row.mean_finish_time:.1f} s")
        print(f"{row.sigma_lidar:>11.1f}  {row.success_rate:>7.2f}  "
              f"{row.mean_objective:>13.2f}  {finish:>11}")
    print("\nmetrics.csv preview:")
    print("\n".join(metrics_to_csv(rows).splitlines()[:3]))


if __name__ == "__main__":
    main()
