#!/usr/bin/env python
import os
import sys

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))
import argparse
import time

import pandas as pd

from gswlr import config, design, sim
from gswlr.main import main

CONFIGS = os.path.join(os.path.dirname(__file__), "..", "configs")


def power_by_n(n_values):
    frames = []
    for dspec in config.load_designs(os.path.join(CONFIGS, "single_look.json")):
        table = design.power_table(dspec.scenario, n_values)
        table["design"] = dspec.name
        frames.append(table)
    long = pd.concat(frames, ignore_index=True)
    return long.pivot_table(index="n_per_arm", columns="design", values=["events", "power"])


def design_options():
    rows = []
    for dspec in config.load_designs(os.path.join(CONFIGS, "candidate_designs.json")):
        ev = design.gs_power(dspec.scenario)
        rows.append({
            "design": dspec.name,
            "times": ",".join("%g" % look.time for look in ev.looks),
            "events": ",".join("%.0f" % look.events for look in ev.looks),
            "expected_duration": ev.expected_duration,
            "power": ev.power,
        })
    return pd.DataFrame(rows)


if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--simulate", action='store_true', help="Also run the robustness simulation grids")
    parser.add_argument("--replicates", type=int, default=None)
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--out-dir", type=str, default="tables")
    parser.add_argument("--time-budget", type=float, default=15.0,
                        help="Warn when a simulation grid is projected to take longer than this many minutes")
    args = parser.parse_args()

    print("Events and power by patients per arm (single analysis at 21 months)")
    print(power_by_n(range(150, 181, 5)).round(2).to_string())
    print()
    print("Expected duration and power of the candidate designs")
    print(design_options().round(2).to_string(index=False))

    if args.simulate:
        for name in ("robustness_hsd", "robustness_fixed"):
            path = os.path.join(CONFIGS, name + ".json")
            grid = config.load_grid(path, replicates=args.replicates)

            # short timed run on the first cell before committing to the whole grid
            pilot = sim.with_replicates(grid[:1], n_replicates=min(200, grid[0].n_replicates))[0]
            start = time.perf_counter()
            sim.run_scenario(pilot, n_jobs=args.jobs)
            per_replicate = (time.perf_counter() - start) / pilot.n_replicates
            projected = per_replicate * sum(s.n_replicates for s in grid) / 60.0
            print("%s: %.2f ms per replicate, about %.1f minutes for %d cells" %
                  (name, 1000.0 * per_replicate, projected, len(grid)))
            if projected > args.time_budget:
                print("warning: %s is projected past the %.0f minute budget; raise --jobs or lower --replicates" %
                      (name, args.time_budget), file=sys.stderr)

            argv = ["simulate", "--config", path, "--jobs", str(args.jobs),
                    "--out-dir", os.path.join(args.out_dir, name)]
            if args.replicates is not None:
                argv += ["--replicates", str(args.replicates)]
            start = time.perf_counter()
            code = main(argv)
            if code:
                sys.exit(code)
            print("%s: finished in %.1f minutes" % (name, (time.perf_counter() - start) / 60.0))
