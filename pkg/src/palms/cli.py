"""Command-line interface: benchmark runs, limited-set analysis, and the labeling service.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical/solver error.
"""

from __future__ import annotations

import argparse
import sys

from .benchmark import ExperimentConfig, Method, emit_results, run_experiment
from .data import SeededRng, apply_standardizer, fit_standardizer, load_csv, stratified_test_split
from .errors import DataError, SolverError
from .limited import LimitedSetParams, limited_fraction

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_SOLVER = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="palms", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the benchmark protocol on a dataset")
    run.add_argument("--dataset", required=True, help="CSV with a trailing 'label' column")
    run.add_argument("--methods", default=",".join(m.value for m in Method),
                     help="comma list from: " + ", ".join(m.value for m in Method))
    run.add_argument("--budget", type=int, default=55)
    run.add_argument("--trials", type=int, default=50)
    run.add_argument("--test-per-class", type=int, default=50)
    run.add_argument("--init-per-class", type=int, default=2)
    run.add_argument("--weight", type=float, default=1.5)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--stride", type=int, default=1)
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--oracle-final-budget", action="store_true",
                     help="ORACLE fixes the model best at the final budget instead of per budget")
    run.add_argument("--out", required=True, help="output directory for results and plot data")

    lim = sub.add_parser("limited", help="mean limited-set fraction over balanced test draws")
    lim.add_argument("--dataset", required=True)
    lim.add_argument("--k", type=int, default=20)
    lim.add_argument("--rho", type=float, default=0.3)
    lim.add_argument("--test-per-class", type=int, default=50)
    lim.add_argument("--draws", type=int, default=20)
    lim.add_argument("--seed", type=int, default=0)

    srv = sub.add_parser("serve", help="serve the interactive labeling sessions API")
    srv.add_argument("--port", type=int, default=8000)
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--dataset", default=None, help="server-side dataset usable as a session pool")
    srv.add_argument("--log", default="palms_sessions.log", help="append-only session event log")
    return parser


def cmd_run(args) -> int:
    config = ExperimentConfig(
        dataset=args.dataset,
        methods=tuple(m.strip() for m in args.methods.split(",") if m.strip()),
        budget=args.budget,
        trials=args.trials,
        test_per_class=args.test_per_class,
        init_per_class=args.init_per_class,
        weight=args.weight,
        base_seed=args.seed,
        stride=args.stride,
        oracle_final_budget=args.oracle_final_budget,
    )
    result = run_experiment(config, workers=args.workers)
    written = emit_results(result, args.out)
    final = result.budgets[-1]
    for m in config.methods:
        print(f"{m}: mean accuracy {result.mean[m][-1]:.4f} (std {result.std[m][-1]:.4f}) at budget {final}")
    print(f"wrote {len(written)} files to {args.out}")
    return EXIT_OK


def cmd_limited(args) -> int:
    data = load_csv(args.dataset)
    scaler = fit_standardizer(data)
    standardized = apply_standardizer(scaler, data)
    params = LimitedSetParams(k=args.k, rho=args.rho)
    rng = SeededRng(args.seed)
    fractions = []
    for _ in range(args.draws):
        test, _ = stratified_test_split(standardized, args.test_per_class, rng)
        fractions.append(limited_fraction(test, standardized, params))
    mean = sum(fractions) / len(fractions)
    print(f"mean %limited over {args.draws} draws (k={params.k}, rho={params.rho}): {100 * mean:.2f}%")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    app = create_app(dataset_path=args.dataset, log_path=args.log)
    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "limited":
            return cmd_limited(args)
        if args.command == "serve":
            return cmd_serve(args)
        raise AssertionError(f"unknown command {args.command}")
    except (ValueError, DataError) as exc:
        if isinstance(exc, DataError):
            print(f"data error: {exc}", file=sys.stderr)
            return EXIT_DATA
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    raise SystemExit(main())
