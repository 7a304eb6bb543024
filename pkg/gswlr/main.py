import argparse
import logging
import math
import sys

import pandas as pd

from gswlr import config, design, sim
from gswlr.counting import km_per_arm
from gswlr.default_values import DEFAULT_ARGUMENTS as DEFARGS
from gswlr.errors import GswlrError
from gswlr.gs_core import GsState, gs_step, state_stagewise_p
from gswlr.storage import FileStorage, load_state, read_dataset, save_state, setup
from gswlr.summaries import summary_report
from gswlr.wlrt import wlr_test

logger = logging.getLogger(__name__)


def n_grid(value):
    """``start:stop:step``, stop inclusive."""
    try:
        start, stop, step = (int(x) for x in value.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError("expected start:stop:step, got %r" % value)
    if start < 1 or stop < start or step < 1:
        raise argparse.ArgumentTypeError("need 1 <= start <= stop and step >= 1")
    return list(range(start, stop + 1, step))


def get_args(argv=None):
    parser = argparse.ArgumentParser(
        description="gswlr - Group-sequential weighted log-rank trials"
    )
    parser.add_argument(
        "--debug", default=DEFARGS['DEBUG'], action="store_true", help="Enable debug logging"
    )
    subparsers = parser.add_subparsers(
        help="", dest="command", required=True, title="Command List"
    )

    design_parser = subparsers.add_parser("design", help="Evaluate designs: events, information, power, duration")
    design_parser.add_argument("--config", type=str, required=True, metavar="<path>", help="Design config (JSON)")
    design_parser.add_argument(
        "--n-grid",
        type=n_grid,
        default=None,
        metavar="<start:stop:step>",
        help="Sweep patients per arm and write a power table",
    )
    design_parser.add_argument(
        "--target-power",
        type=float,
        default=None,
        metavar="<probability>",
        help="Also search the smallest n per arm reaching this power",
    )
    design_parser.add_argument(
        "--power-decimals",
        type=int,
        default=None,
        metavar="<digits>",
        help="Round power to this many decimals before comparing it with --target-power",
    )

    analyse_parser = subparsers.add_parser("analyse", help="Analyse the next look of a trial")
    analyse_parser.add_argument("--config", type=str, required=True, metavar="<path>", help="Design config (JSON)")
    analyse_parser.add_argument(
        "--data", type=str, required=True, metavar="<path>", help="Snapshot CSV with columns time,event,arm"
    )
    analyse_parser.add_argument(
        "--state",
        type=str,
        default="state.json",
        metavar="<path>",
        help="Sequential state, created at the first look, relative to --out-dir (%(default)s)",
    )
    analyse_parser.add_argument(
        "--futility-z",
        type=float,
        default=None,
        metavar="<z>",
        help="Non-binding futility bound on the z-scale (overrides the config)",
    )

    simulate_parser = subparsers.add_parser("simulate", help="Run a simulation grid")
    simulate_parser.add_argument("--config", type=str, required=True, metavar="<path>", help="Grid config (JSON)")
    simulate_parser.add_argument(
        "--replicates",
        type=int,
        default=None,
        metavar="<number>",
        help="Replicates per cell (grid value, else %d)" % DEFARGS['REPLICATES'],
    )
    simulate_parser.add_argument(
        "--seed", type=int, default=None, metavar="<number>", help="Master seed (grid value, else %d)" % DEFARGS['SEED']
    )
    simulate_parser.add_argument(
        "--jobs", type=int, default=DEFARGS['JOBS'], metavar="<number>", help="Parallel workers (%(default)s)"
    )
    simulate_parser.add_argument(
        "--futility-z",
        type=float,
        default=None,
        metavar="<z>",
        help="Non-binding futility bound on the z-scale",
    )

    km_parser = subparsers.add_parser("km", help="Write per-arm Kaplan-Meier plot data")
    km_parser.add_argument(
        "--data", type=str, required=True, metavar="<path>", help="Snapshot CSV with columns time,event,arm"
    )

    for p in (design_parser, analyse_parser, simulate_parser, km_parser):
        p.add_argument(
            "--out-dir",
            type=str,
            default=DEFARGS['OUT_DIR'],
            metavar="<path>",
            help="Directory for output files (%(default)s)",
        )

    return parser.parse_args(argv)


def _fmt(x, pattern="%.4f"):
    if x is None:
        return "n/a"
    if x == -math.inf:
        return "-inf"
    return pattern % x


def cmd_design(args):
    designs = config.load_designs(args.config)
    store = setup(args.out_dir)

    evaluations = {}
    tables = []
    curves = []
    for dspec in designs:
        ev = design.gs_power(dspec.scenario)
        evaluations[dspec.name] = ev.to_dict()
        print("%s: n=%d/arm, power %s, expected duration %s months, null rejection %s"
              % (dspec.name, ev.n_per_arm, _fmt(ev.power), _fmt(ev.expected_duration, "%.2f"),
                 _fmt(ev.null_power)))
        for look in ev.looks:
            print("  look %d: t=%.2f events=%.1f V=%.2f drift=%.3f cum alpha=%s critical=%s"
                  % (look.analysis, look.time, look.events, look.info, look.drift,
                     _fmt(look.cum_alpha, "%.5f"), _fmt(look.critical, "%.3f")))

        n_values = args.n_grid or [dspec.scenario.n_per_arm]
        table = design.power_table(dspec.scenario, n_values)
        table.insert(0, "design", dspec.name)
        tables.append(table)

        curve = design.events_curve(dspec.scenario)
        curve.insert(0, "design", dspec.name)
        curves.append(curve)

        if args.target_power is not None:
            n = design.sample_size_search(dspec.scenario, args.target_power, decimals=args.power_decimals)
            evaluations[dspec.name]["sample_size"] = {"target_power": args.target_power, "n_per_arm": n}
            print("  smallest n per arm for power %.2f: %d" % (args.target_power, n))

    store.write_json("design_eval.json", evaluations)
    store.write_frame("power_table.csv", pd.concat(tables, ignore_index=True), index=False)
    store.write_frame("events_curve.csv", pd.concat(curves, ignore_index=True), index=False)
    return 0


def cmd_analyse(args, statistic=wlr_test):
    """One interim or final analysis.

    ``statistic`` maps (cohort, scheme) to an object with ``u``, ``v`` and ``z``.
    """
    dspec = config.load_design(args.config)
    if args.futility_z is not None:
        dspec = config.DesignSpec(dspec.name, dspec.scenario, args.futility_z, dspec.info_caps,
                                 dspec.milestone, dspec.rmst_tau, dspec.raw)
    gs_config = dspec.gs_config()
    fingerprint = dspec.fingerprint()
    store = setup(args.out_dir)

    if store.exists(args.state):
        state = load_state(store, args.state, fingerprint, gs_config)
    else:
        state = GsState(gs_config)

    cohort = read_dataset(FileStorage("."), args.data)
    result = statistic(cohort, dspec.scenario.scheme)
    state = gs_step(state, result.v, result.z)
    save_state(store, args.state, fingerprint, state)

    look = state.looks[-1]
    store.write_json("look_%d.json" % look.analysis, look.to_dict())
    print("Analysis %d: U=%.3f V=%.3f Z=%.3f" % (look.analysis, look.u, look.v, look.z))
    print("Cumulative alpha %s, critical value %s" % (_fmt(look.cum_alpha, "%.5f"), _fmt(look.critical, "%.3f")))
    print("Decision: %s" % look.decision.value)

    if state.stopped:
        p = state_stagewise_p(state)
        report = summary_report(cohort, dspec.milestone, dspec.rmst_tau,
                                result if hasattr(result, "weights") else None, p)
        store.write_json("report.json", report.to_dict())
        print("Stage-wise p-value: %.4f" % p)
        for arm, s in sorted(report.arms.items()):
            print("  arm %d: milestone(%g)=%s median=%s RMST(%g)=%s"
                  % (arm, s.milestone_time, _fmt(s.milestone, "%.3f"), _fmt(s.median, "%.2f"),
                     s.rmst_tau, _fmt(s.rmst, "%.2f")))
    return 0


def cmd_simulate(args):
    scenarios = config.load_grid(args.config, args.replicates, args.seed, args.futility_z)
    store = setup(args.out_dir)
    print("Simulating %d cells x %d replicates" % (len(scenarios), scenarios[0].n_replicates))

    summaries = sim.run_grid(scenarios, n_jobs=args.jobs, chunk_size=DEFARGS['CHUNK_SIZE'])
    frame = sim.grid_frame(summaries)
    wide = sim.wide_table(frame)

    store.write_frame("simulation.csv", frame, index=False)
    store.write_frame("simulation_wide.csv", wide)
    store.write_json("simulation.json", [s.to_dict() for s in summaries])
    print(wide.round(3).to_string())
    return 0


def cmd_km(args):
    cohort = read_dataset(FileStorage("."), args.data)
    store = setup(args.out_dir)
    frames = []
    for arm, km in km_per_arm(cohort).items():
        frames.append(pd.DataFrame({
            "arm": arm,
            "time": km.times,
            "survival": km.survival,
            "n_at_risk": km.n_at_risk,
            "n_events": km.n_events,
        }))
        print("arm %d: %d subjects, %d events" % (arm, km.n_at_risk[0], km.n_events.sum()))
    store.write_frame("km.csv", pd.concat(frames, ignore_index=True), index=False)
    return 0


COMMANDS = {
    "design": cmd_design,
    "analyse": cmd_analyse,
    "simulate": cmd_simulate,
    "km": cmd_km,
}


def main(argv=None):
    args = get_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.debug else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except GswlrError as e:
        print("error: %s" % e, file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
