"""Command line: ``dfw generate | experiment | cvstudy | balance | plots``.

Exit status is 0 on success, otherwise the ``exit_code`` of the raised
error category (3 data, 4 numerical, 5 I/O, 1 anything else of ours,
2 for argument errors).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

from .errors import EXIT_IO, DFWError
from .harness import CONFIG_KEYS, ExperimentConfig, audit_report, load_dataset, run_cv_study, run_experiment

log = logging.getLogger("dfw")


def _cmd_generate(args):
    cfg = ExperimentConfig(dataset=args.dataset, n=args.n, replications=1)
    if cfg.dataset.split(":")[0] in ("ihdp", "jobs"):
        raise DFWError("generate only handles synthetic datasets")
    from .data import write_bundle_csv

    bundle = load_dataset(cfg, 0, args.seed)
    path = write_bundle_csv(bundle, args.out, config={"dataset": args.dataset, "seed": args.seed})
    print(path)


def _cmd_experiment(args):
    cfg = ExperimentConfig.from_file(args.config)
    if args.output_dir:
        cfg = replace(cfg, output_dir=args.output_dir)
    if not cfg.output_dir:
        raise DFWError("no output_dir in the config or on the command line")
    report = run_experiment(cfg, workers=args.workers)
    for scheme, agg in report.schemes.items():
        e = agg["epsilon_ate"]
        print(f"{scheme:8s} {agg['estimator']:20s} eps_ate mean={e['mean']} std={e['std']}")
    problems = audit_report(cfg.output_dir)
    if problems:
        raise DFWError("audit failed: " + "; ".join(problems[:5]))
    if args.plots:
        from .plots import emit_plots

        emit_plots(cfg.output_dir)


def _cmd_cvstudy(args):
    r = run_cv_study(args.grid_min, args.grid_max, args.step, args.size, args.mode, args.out)
    print(f"{r.mode}: {r.wins}/{r.count} = {r.fraction:.6f} (over ordered tuples {r.weighted_fraction:.6f})")


def _cmd_balance(args):
    from .balance import balance_report
    from .data import read_bundle_csv
    from .propensity import LogisticConfig, fit_logistic
    from .weighting import scheme_weights

    bundle = read_bundle_csv(args.data)
    fit = fit_logistic(bundle.covariates, bundle.treatment, LogisticConfig())
    out = {}
    for scheme in args.schemes:
        if scheme == "CBPS":
            from .propensity import fit_cbps

            w = scheme_weights(scheme, fit.probabilities, bundle.treatment,
                               fit_cbps(bundle.covariates, bundle.treatment).probabilities)
        else:
            w = scheme_weights(scheme, fit.probabilities, bundle.treatment)
        r = balance_report(bundle.covariates, bundle.treatment, w, bundle.feature_names, with_traces=False)
        out[scheme] = {f: {"smd_unweighted": float(a), "smd_weighted": float(b), "ks_weighted": float(c)}
                       for f, a, b, c in zip(r.features, r.smd_unweighted, r.smd_weighted, r.ks_weighted)}
    print(json.dumps(out, indent=2, sort_keys=True))


def _cmd_plots(args):
    from .plots import emit_plots

    for p in emit_plots(args.report_dir):
        print(p)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dfw", description="Propensity weighting experiments.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic bundle as CSV")
    g.add_argument("--dataset", default="linear:low")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--n", type=int)
    g.add_argument("--out", required=True)
    g.set_defaults(func=_cmd_generate)

    keys = "\n".join(f"  {k:18s} {v}" for k, v in CONFIG_KEYS.items())
    e = sub.add_parser("experiment", help="run a replicated experiment from a config file",
                       epilog="config keys (key = value, '#' comments, config_version = 1):\n" + keys,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    e.add_argument("config")
    e.add_argument("--output-dir")
    e.add_argument("--workers", type=int, default=1)
    e.add_argument("--plots", action="store_true")
    e.set_defaults(func=_cmd_experiment)

    c = sub.add_parser("cvstudy", help="enumerate propensity tuples, compare weight CVs")
    c.add_argument("--grid-min", type=float, default=0.1)
    c.add_argument("--grid-max", type=float, default=0.9)
    c.add_argument("--step", type=float, default=0.1)
    c.add_argument("--size", type=int, default=6)
    c.add_argument("--mode", choices=("TUPLES", "MULTISETS"), default="TUPLES")
    c.add_argument("--out")
    c.set_defaults(func=_cmd_cvstudy)

    b = sub.add_parser("balance", help="balance diagnostics for a bundle CSV")
    b.add_argument("data")
    b.add_argument("--schemes", nargs="+", default=["DFW", "IPW", "OVERLAP"])
    b.set_defaults(func=_cmd_balance)

    pl = sub.add_parser("plots", help="render SVGs from a report directory")
    pl.add_argument("report_dir")
    pl.set_defaults(func=_cmd_plots)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except DFWError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
