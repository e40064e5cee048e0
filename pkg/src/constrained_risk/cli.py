"""Command line entry point: ``constrained-risk <command> ...``.

Every command prints one JSON document (sorted keys) to stdout.
Exit codes: 0 success, 1 an invariant failed (bound violation or a report
row below its bound), 2 bad input or configuration, 3 numerical failure.
"""

import argparse
import json
import sys

from . import __version__
from .bounds import bound_from_models
from .dist import parse_model
from .divergence import affinity
from .errors import ConfigError, InvalidInputError, NumericError
from .experiments import CLI_NAMES, ExperimentConfig, run_experiment
from .loss import parse_loss
from .simulate import hodges_estimator, mc_risk, sample_mean, violation_search

EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def dumps(obj):
    return json.dumps(obj, sort_keys=True, indent=2)


def parse_estimator(spec):
    if spec == "mean":
        return sample_mean()
    head, _, arg = spec.partition(":")
    if head == "hodges":
        try:
            return hodges_estimator(float(arg))
        except ValueError:
            pass
    raise ConfigError(f"unknown estimator {spec!r}; expected 'mean' or 'hodges:<tau>'")


def _cmd_affinity(args):
    res = affinity(parse_model(args.p1), parse_model(args.p0), method=args.method,
                   count=args.count, seed=args.seed)
    return res.to_dict(), EXIT_OK


def _cmd_bound(args):
    rep = bound_from_models(parse_model(args.p1), parse_model(args.p0), parse_loss(args.loss),
                            args.delta, method=args.affinity_method, count=args.count,
                            seed=args.seed)
    return rep.to_dict(), EXIT_OK


def _cmd_simulate(args):
    est = parse_estimator(args.est)
    risk = mc_risk(est, parse_model(args.model), parse_loss(args.loss), args.reps, args.seed)
    out = risk.to_dict()
    out.update(estimator=est.name, model=args.model, loss=args.loss)
    return out, EXIT_OK


def _cmd_oracle(args):
    rep = violation_search(args.instances, args.seed, parse_loss(args.loss), m_max=args.m_max)
    return rep.to_dict(), EXIT_OK if rep.violations == 0 else EXIT_INVARIANT


def _cmd_experiment(args):
    cfg = ExperimentConfig.load(args.config, CLI_NAMES[args.name])
    report = run_experiment(cfg)
    text = report.to_json()
    out = args.out or cfg.output_path
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    if args.csv:
        report.write_csv(args.csv)
    return report.to_dict(), EXIT_OK if report.ok else EXIT_INVARIANT


def build_parser():
    parser = argparse.ArgumentParser(prog="constrained-risk",
                                     description="Constrained risk lower bounds and checks.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("affinity", help="chi-square affinity of two models")
    p.add_argument("--p1", required=True)
    p.add_argument("--p0", required=True)
    p.add_argument("--method", choices=("closed", "quad", "mc"), default="quad")
    p.add_argument("--count", type=int, default=10**6)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_affinity)

    p = sub.add_parser("bound", help="lower bound on the P1 risk under a P0 budget")
    p.add_argument("--loss", required=True)
    p.add_argument("--p0", required=True)
    p.add_argument("--p1", required=True)
    p.add_argument("--delta", type=float, required=True,
                   help="bound on the P0 risk (delta^k for pow:<k>)")
    p.add_argument("--affinity-method", choices=("closed", "quad", "mc"), default="quad")
    p.add_argument("--count", type=int, default=10**6)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_bound)

    p = sub.add_parser("simulate", help="Monte Carlo risk of an estimator")
    p.add_argument("--est", required=True, help="'mean' or 'hodges:<tau>'")
    p.add_argument("--model", required=True)
    p.add_argument("--loss", required=True)
    p.add_argument("--reps", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("oracle", help="search random finite problems for bound violations")
    p.add_argument("--instances", type=int, default=1000)
    p.add_argument("--loss", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--m-max", type=int, default=8)
    p.set_defaults(func=_cmd_oracle)

    p = sub.add_parser("experiment", help="run an experiment driver from a JSON config")
    p.add_argument("name", choices=sorted(CLI_NAMES))
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--csv")
    p.set_defaults(func=_cmd_experiment)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        payload, code = args.func(args)
    except (ConfigError, InvalidInputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(dumps(payload))
    return code


if __name__ == "__main__":
    sys.exit(main())
