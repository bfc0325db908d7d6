"""Command-line scenario runner.

Subcommands:
    simulate  run a scenario's flow and write trace/monitor CSVs (no checks)
    verify    run a scenario's flow plus all of its checks
    harnack   run only a differential-Harnack check against a scenario
    oracle    tabulate the closed-form radial solution (optionally vs a run)
    describe  print the statement and hypotheses a check verifies
    list      list bundled scenarios

Exit codes: 0 success / all non-vacuous checks pass, 1 a non-vacuous check
failed, 2 configuration or usage error. Default output root: --out, else
$FMCF_OUT, else ./fmcf_out.
"""

from __future__ import annotations

import argparse
import json
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .curve import curve_from_config
from .errors import ConfigError, FmcfError
from .flow import FlowConfig, run
from .harnack import verify_differential_harnack
from .oracles import RadialSolution, circle_radius_estimate, oracle_table
from .scenarios import (
    CHECK_TYPES,
    bundled_scenarios,
    default_output_root,
    describe_check,
    load_scenario,
    run_scenario,
    write_csv,
    write_json,
)
from .weights import isotropic_weight


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fmcf", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--config", required=True, action="append",
                        help="scenario JSON file (repeatable for verify)")
        sp.add_argument("--out", default=None, help="output root directory")
        sp.add_argument("--tol-scale", type=float, default=1.0,
                        help="multiply all default tolerances")

    sp = sub.add_parser("simulate", help="run the flow only")
    add_common(sp)

    sp = sub.add_parser("verify", help="run the flow and all checks")
    add_common(sp)
    sp.add_argument("--jobs", type=int, default=1, help="run configs concurrently")

    sp = sub.add_parser("harnack", help="run only the differential Harnack check")
    add_common(sp)
    sp.add_argument("--variant", default="plain",
                    choices=("plain", "hamilton_2t", "general_c"))

    sp = sub.add_parser("oracle", help="closed-form radial solution table")
    sp.add_argument("--n", type=int, default=1, choices=(1, 2))
    sp.add_argument("--r0", type=float, required=True)
    sp.add_argument("--c", type=float, default=0.0)
    sp.add_argument("--t-end", type=float, required=True)
    sp.add_argument("--samples", type=int, default=25)
    sp.add_argument("--simulate", type=int, default=None, metavar="N",
                    help="also run the polygon flow at N nodes and compare (n=1 only)")
    sp.add_argument("--scheme", default="rk4", choices=("explicit_euler", "rk4"))
    sp.add_argument("--out", default=None, help="CSV file (default: stdout)")

    sp = sub.add_parser("describe", help="print what a check verifies")
    sp.add_argument("check", help=f"one of: {', '.join(CHECK_TYPES)}")

    sub.add_parser("list", help="list bundled scenarios")
    return p


def _cmd_simulate(args) -> int:
    code = 0
    for cfg_path in args.config:
        outcome = run_scenario(
            _scenario_without_checks(cfg_path), out_dir=args.out, tol_scale=args.tol_scale
        )
        print(f"{outcome.scenario.name}: simulated {outcome.trace.n_steps} steps "
              f"-> {outcome.out_dir}")
        code = max(code, outcome.exit_code)
    return code


def _scenario_without_checks(path):
    scenario = load_scenario(path)
    scenario.checks = []
    return scenario


def _verify_one(cfg_path: str, out, tol_scale: float):
    outcome = run_scenario(cfg_path, out_dir=out, tol_scale=tol_scale)
    return outcome.scenario.name, outcome.exit_code, outcome.summary, str(outcome.out_dir)


def _cmd_verify(args) -> int:
    jobs = max(1, args.jobs)
    results = []
    if jobs == 1 or len(args.config) == 1:
        for cfg_path in args.config:
            results.append(_verify_one(cfg_path, args.out, args.tol_scale))
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futs = [pool.submit(_verify_one, c, args.out, args.tol_scale) for c in args.config]
            results = [f.result() for f in futs]
    code = 0
    for name, exit_code, summary, out_dir in results:
        status = "PASS" if exit_code == 0 else "FAIL"
        vac = summary.get("vacuous", [])
        suffix = f" (vacuous: {', '.join(vac)})" if vac else ""
        print(f"{name}: {status}{suffix} -> {out_dir}")
        for chk in summary["checks"]:
            mark = "vacuous" if chk["vacuous"] else ("pass" if chk["passed"] else "FAIL")
            print(f"  - {chk['name']}: {mark}")
        code = max(code, exit_code)
    return code


def _cmd_harnack(args) -> int:
    code = 0
    for cfg_path in args.config:
        scenario = load_scenario(cfg_path)
        rng = np.random.default_rng(scenario.seed)
        initial = curve_from_config(scenario.curve_cfg, rng=rng)
        trace = run(initial, scenario.weight, scenario.flow)
        rep = verify_differential_harnack(
            trace, scenario.weight, variant=args.variant, tol_scale=args.tol_scale
        )
        root = Path(args.out) if args.out else default_output_root()
        out_dir = root / scenario.name
        out_dir.mkdir(parents=True, exist_ok=True)
        write_json(out_dir / "harnack_report.json", rep.to_json_dict())
        status = "vacuous" if rep.vacuous else ("pass" if not rep.violations else "FAIL")
        print(f"{scenario.name} [{args.variant}]: {status}; "
              f"global_min={rep.global_min!r}, violations={len(rep.violations)}")
        if not rep.vacuous and rep.violations:
            code = max(code, 1)
    return code


def _cmd_oracle(args) -> int:
    sol = RadialSolution(n=args.n, R0=args.r0, c=args.c)
    t_ext = sol.extinction_time()
    t_max = args.t_end if args.t_end < t_ext else 0.999 * t_ext
    times = [t_max * k / (args.samples - 1) for k in range(args.samples)]

    sim_radii = None
    if args.simulate is not None:
        if args.n != 1:
            raise ConfigError("--simulate needs n = 1 (plane curves)", field="n")
        from .curve import circle_curve

        curve = circle_curve(args.r0, args.simulate)
        w = isotropic_weight(args.c)
        cfg = FlowConfig(scheme=args.scheme, dt="auto", t_end=t_max, record_every=1)
        trace = run(curve, w, cfg)
        sim_radii = [
            circle_radius_estimate(trace.curves[trace.snapshot_at(t, tol=2e-2 * (t_max or 1.0))])
            for t in times
        ]
        # snapshot times are step-quantized; re-anchor the oracle on them
        times = [float(trace.times[trace.snapshot_at(t, tol=2e-2 * (t_max or 1.0))]) for t in times]

    rows = [("t", "R_exact", "R_sim", "abs_err")] + oracle_table(
        args.n, args.r0, args.c, times, sim_radii
    )
    if args.out:
        write_csv(Path(args.out), rows)
        print(f"wrote {args.out}")
    else:
        for row in rows:
            print(",".join("" if v is None else (repr(v) if isinstance(v, float) else str(v))
                           for v in row))
    return 0


def _cmd_describe(args) -> int:
    print(describe_check(args.check))
    return 0


def _cmd_list(args) -> int:
    scenarios = bundled_scenarios()
    width = max(len(n) for n in scenarios)
    for name, cfg in scenarios.items():
        print(f"{name:<{width}}  {cfg.get('description', '')}")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "verify": _cmd_verify,
    "harnack": _cmd_harnack,
    "oracle": _cmd_oracle,
    "describe": _cmd_describe,
    "list": _cmd_list,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FmcfError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry():  # console-script entry point
    sys.exit(main())


if __name__ == "__main__":
    entry()
