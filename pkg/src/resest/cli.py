"""Command-line driver.

Exit codes: 0 success, 2 invalid spec or arguments, 3 solver did not reach a
certified optimum (artifacts are still written).
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .analysis import resilience_report
from .baseline import kalman_filter, rts_smooth
from .estimator import NotObservableError, solve
from .experiment import (
    EXIT_INVALID,
    EXIT_NONCONVERGED,
    EXIT_OK,
    SWEEP_VARIABLES,
    ExperimentSpec,
    SpecError,
    baseline_covariances,
    baseline_prior,
    load_spec,
    run,
    sweep,
)
from .model import generate_scenario, simulate

log = logging.getLogger("resest")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--spec", help="experiment spec (JSON); defaults reproduce the simulation study")
    p.add_argument("--seed", type=int, help="override scenario.seed")
    p.add_argument("--out", help="output directory (overrides output_dir)")
    p.add_argument("--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="resest", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="generate a scenario and simulate the plant")
    for name, text in (("estimate", "run the resilient estimator"), ("smooth", "run the RTS smoother")):
        sp = sub.add_parser(name, parents=[common], help=text)
        sp.add_argument("--scenario", help="scenario.json written by `simulate` (default: regenerate)")
    sub.add_parser("analyze", parents=[common], help="resilience report: D, p_r, bound")
    sub.add_parser("run", parents=[common], help="full experiment with CSVs, report and figures")
    sp = sub.add_parser("sweep", parents=[common], help="repeat the experiment over one variable")
    sp.add_argument("--variable", required=True, choices=SWEEP_VARIABLES)
    sp.add_argument("--values", required=True, help="comma-separated values")
    return parser


def _spec(args) -> ExperimentSpec:
    spec = load_spec(args.spec) if args.spec else ExperimentSpec()
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise SpecError("--seed", "must be an unsigned 64-bit integer")
        spec = replace(spec, scenario=replace(spec.scenario, seed=args.seed))
    if args.out:
        spec = replace(spec, output_dir=args.out)
    if args.verbose:
        spec = replace(spec, estimator=replace(spec.estimator, verbose=True))
    return spec


def _scenario(spec, path):
    model = spec.model
    if path:
        d = io.read_json(path)
        noise = io.noise_from_dict(d["noise"], model)
        X, Y = np.array(d["X"], float), np.array(d["Y"], float)
    else:
        noise = generate_scenario(model, spec.scenario)
        X, Y = simulate(model, noise, spec.scenario.x0(model))
    return noise, X, Y


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        spec = _spec(args)
    except SpecError as exc:
        print(f"invalid spec: {exc}", file=sys.stderr)
        return EXIT_INVALID

    out = Path(spec.output_dir)
    try:
        if args.command == "run":
            result = run(spec, out)
            for f in result.files:
                log.info("wrote %s", f)
            if result.exit_code == EXIT_NONCONVERGED:
                print("warning: solver did not reach a certified optimum", file=sys.stderr)
            return result.exit_code

        if args.command == "sweep":
            values = [v.strip() for v in args.values.split(",") if v.strip()]
            values = [int(v) if args.variable in ("attack_count", "T") else float(v) for v in values]
            sweep(spec, args.variable, values, out)
            return EXIT_OK

        model = spec.model
        if args.command == "simulate":
            noise, X, Y = _scenario(spec, None)
            out.mkdir(parents=True, exist_ok=True)
            io.write_json(out / "scenario.json", {
                "model": io.model_to_dict(model),
                "scenario": io.scenario_to_dict(spec.scenario, model),
                "noise": io.noise_to_dict(noise),
                "X": X, "Y": Y,
            })
            return EXIT_OK

        if args.command == "estimate":
            noise, X, Y = _scenario(spec, args.scenario)
            res = solve(model, Y, spec.estimator)
            out.mkdir(parents=True, exist_ok=True)
            io.write_json(out / "estimate.json", io.estimate_to_dict(res, include_trace=args.verbose))
            return EXIT_OK if res.certificate.satisfied else EXIT_NONCONVERGED

        if args.command == "smooth":
            noise, X, Y = _scenario(spec, args.scenario)
            filt = kalman_filter(model, Y, baseline_prior(spec), baseline_covariances(spec, noise))
            sm = rts_smooth(model, filt)
            out.mkdir(parents=True, exist_ok=True)
            io.write_json(out / "smooth.json", {
                "estimate": sm.x_smooth, "covariances": sm.P_smooth, "filtered": filt.x_filt,
            })
            return EXIT_OK

        if args.command == "analyze":
            noise = generate_scenario(model, spec.scenario)
            a = spec.analysis
            rep = resilience_report(model, noise, spec.estimator.lam, spec.estimator.norm,
                                    a.samples, a.restarts, a.steps, a.seed, a.r_max, a.constrained)
            d = rep.to_dict()
            out.mkdir(parents=True, exist_ok=True)
            io.write_json(out / "report.json", d)
            io.write_csv(out / "pr_table.csv", ["r", "pr_hat"], sorted(rep.pr_table.items()))
            io.write_csv(out / "beta_curve.csv", ["epsilon", "r", "beta", "bound"],
                         [[r.epsilon, r.r, r.beta, r.bound] for r in rep.beta_curve])
            return EXIT_OK
    except (SpecError, NotObservableError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
