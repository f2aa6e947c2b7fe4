"""Command line entry point ``rangeloc``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .analysis import fisher
from .errors import ConfigurationError, NumericalError
from .estimators import Method, first_step
from .harness import BUILTINS, ESTIMATORS, builtin_config, load_config, load_report, run_trial, save_report
from .model import MeasurementSet, NoiseModel, load_scenario, simulate
from .refine import ls_estimate, second_step
from .svgplot import emit_svg


def _scenario(args):
    sc = load_scenario(args.scenario)
    if getattr(args, "sigma2", None) is not None:
        sc = sc.with_noise(NoiseModel.homogeneous(args.sigma2))
    return sc


def cmd_simulate(args) -> int:
    sc = load_scenario(args.scenario)
    simulate(sc, args.seed).to_csv(args.out)
    return 0


def cmd_estimate(args) -> int:
    sc = _scenario(args)
    meas = MeasurementSet.from_csv(args.measurements, sc.n_sensors)
    if args.method == Method.LS_GN.value:
        est = ls_estimate(sc, meas)
    else:
        est = first_step(args.method, sc, meas, args.sigma2)
        if args.two_step:
            est = second_step(est, sc, meas, args.sigma2)
    json.dump(est.to_dict(), sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def cmd_crlb(args) -> int:
    json.dump(fisher(_scenario(args)).to_dict(), sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def cmd_trial(args) -> int:
    if (args.config is None) == (args.builtin is None):
        raise ConfigurationError("give exactly one of --config or --builtin")
    config = load_config(args.config) if args.config else builtin_config(args.builtin, args.full)
    report = run_trial(config, workers=args.workers)
    save_report(report, args.out)
    bad = sum(c.failures for c in report.cells)
    print(f"{config.name}: {len(report.cells)} cells, {bad} failed runs -> {args.out}")
    return 0


def cmd_plot(args) -> int:
    emit_svg(load_report(args.report), args.kind, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rangeloc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="synthesize range measurements to CSV")
    s.add_argument("--scenario", required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("estimate", help="estimate the position from a measurement CSV")
    s.add_argument("--scenario", required=True)
    s.add_argument("--measurements", required=True)
    s.add_argument("--method", required=True,
                   choices=[m.value for m in Method])
    s.add_argument("--sigma2", type=float)
    s.add_argument("--two-step", action="store_true")
    s.set_defaults(func=cmd_estimate)

    s = sub.add_parser("crlb", help="Fisher information and CRLB at the true target")
    s.add_argument("--scenario", required=True)
    s.add_argument("--sigma2", type=float)
    s.set_defaults(func=cmd_crlb)

    s = sub.add_parser("trial", help="run a Monte-Carlo trial",
                       epilog=f"builtins: {', '.join(BUILTINS)}; estimators: {', '.join(ESTIMATORS)}")
    s.add_argument("--config")
    s.add_argument("--builtin")
    s.add_argument("--full", action="store_true", help="full-scale run counts (N=1000) and T sweep up to 1e4")
    s.add_argument("--out", required=True)
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_trial)

    s = sub.add_parser("plot", help="render a report as SVG")
    s.add_argument("--report", required=True)
    s.add_argument("--kind", required=True, choices=["bias_vs_runs", "mse_vs_T", "mse_vs_noise"])
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, OSError) as exc:
        code = 2 if isinstance(exc, OSError) else 3
        print(f"{'I/O' if code == 2 else 'numerical'} error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
