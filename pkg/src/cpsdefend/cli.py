"""Command-line entry point: ``cpsdefend run | region | list-golden``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .compensate import StabilityRegion, stability_region
from .config import ConfigError, ScenarioFile, load_config
from .lti import TransferFunction, tf_series
from .scenarios import GOLDEN, golden
from .sim import COLUMNS, SimLog, run_scenario, summarize

log = logging.getLogger("cpsdefend")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IDENT_FAILED = 2
EXIT_EMPTY_REGION = 3


def _num(x) -> str:
    return repr(float(x))


def write_timeseries(simlog: SimLog, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for k in range(len(simlog)):
            w.writerow([
                _num(simlog.t[k]), _num(simlog.r[k]), _num(simlog.e[k]), _num(simlog.u[k]),
                _num(simlog.u_attacked[k]), _num(simlog.y[k]), _num(simlog.y_model[k]),
                _num(simlog.residual[k]), int(simlog.ids_flag[k]), int(simlog.controller_id[k]),
            ])


def summary_dict(simlog: SimLog) -> dict:
    out = summarize(simlog).to_dict()
    ev = simlog.events
    out["ident_error_at_completion"] = ev.ident_error_at_completion
    out["gain_rejection"] = ev.gain_rejection
    out["thresholds"] = list(ev.thresholds) if ev.thresholds else None
    out["secure_mean"] = ev.secure_mean
    out["secure_std"] = ev.secure_std
    if ev.region is not None:
        out["region_stable_cells"] = ev.region.n_stable
    return out


def _load(args) -> tuple[ScenarioFile, TransferFunction]:
    """Resolve ``--scenario``/``--golden`` into a scenario and its region system."""
    if args.golden:
        g = golden(args.golden)
        return ScenarioFile(g.scenario, g.published_model), g.region_system()
    sf = load_config(args.scenario)
    s = sf.scenario
    system = sf.region_system
    if system is None:
        system = s.plant if s.attack.kind == "none" else tf_series(s.attack.as_tf(s.ts), s.plant)
    return sf, system


def cmd_run(args) -> int:
    try:
        sf, _ = _load(args)
    except (ConfigError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    scenario = sf.scenario.with_toggles(
        ids=False if args.no_ids else None,
        compensation=False if args.no_compensation else None,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    simlog = run_scenario(scenario)
    write_timeseries(simlog, out / "timeseries.csv")
    summary = summary_dict(simlog)
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    if args.export_region:
        if simlog.events.region is not None:
            simlog.events.region.to_csv(out / "region.csv")
        else:
            log.warning("no region computed during the run (no identification); region.csv not written")

    det = summary["detection_time"]
    print(f"{scenario.name}: detection={det if det is not None else '-'} "
          f"swap={summary['swap_time'] if summary['swap_time'] is not None else '-'} "
          f"sse={summary['steady_state_error']:.6g} peak={summary['peak_output']:.6g}")
    if summary["identification_failed"]:
        print("identification did not converge before the end of the run", file=sys.stderr)
        return EXIT_IDENT_FAILED
    return EXIT_OK


def cmd_region(args) -> int:
    try:
        sf, system = _load(args)
    except (ConfigError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    comp = sf.scenario.compensator
    kp_range = tuple(args.kp_range) if args.kp_range else comp.kp_range
    ki_range = tuple(args.ki_range) if args.ki_range else comp.ki_range
    steps = args.steps or comp.steps
    region: StabilityRegion = stability_region(system, kp_range, ki_range, steps)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    region.to_csv(out / "region.csv")
    if region.n_stable == 0:
        print("no stabilizing PI gains on the grid", file=sys.stderr)
        return EXIT_EMPTY_REGION
    print(f"{region.n_stable} of {region.mask.size} grid cells stable")
    return EXIT_OK


def cmd_list_golden(args) -> int:
    for name, factory in GOLDEN.items():
        print(f"{name:10s} {factory().description}")
    return EXIT_OK


def _add_source(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", help="scenario config file")
    src.add_argument("--golden", choices=sorted(GOLDEN), help="built-in reference scenario")
    p.add_argument("--out", default=".", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cpsdefend", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a scenario and write timeseries.csv / summary.json")
    _add_source(run)
    run.add_argument("--no-ids", action="store_true", help="disable detection (implies --no-compensation)")
    run.add_argument("--no-compensation", action="store_true", help="detect and identify, but never swap")
    run.add_argument("--export-region", action="store_true", help="also write region.csv")
    run.set_defaults(func=cmd_run)

    reg = sub.add_parser("region", help="PI stability region of the scenario's system")
    _add_source(reg)
    reg.add_argument("--kp-range", nargs=2, type=float, metavar=("LO", "HI"))
    reg.add_argument("--ki-range", nargs=2, type=float, metavar=("LO", "HI"))
    reg.add_argument("--steps", type=int)
    reg.set_defaults(func=cmd_region)

    lst = sub.add_parser("list-golden", help="list built-in scenarios")
    lst.set_defaults(func=cmd_list_golden)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
