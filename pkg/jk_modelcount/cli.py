"""
Command Line Interface for JK-ModelCounter

    python -m jk_modelcount count [options] FILE.cnf
    python -m jk_modelcount density-table --n 64 [--plot trend.png]
    python -m jk_modelcount verify [--with-pac] [--quality-plot quality.png]
    python -m jk_modelcount bench DIRECTORY [--timeout 60]

Payloads (JSON / CSV) go to stdout, summaries and logs to stderr.
Exit codes: 0 success, 1 oracle failure (or failed verification), 2 usage error.
"""

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field

from .counter import CounterParams, approxmc5, compute_pivot
from .density import density_table, table_to_csv
from .errors import ContractError, DimacsParseError, ModelCountError, OracleError
from .formula import XorEncoding, read_dimacs
from .oracle import OracleConfig
from .verify import pac_rows_from_report, run_verification_suite

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_ORACLE, EXIT_USAGE = 0, 1, 2
BENCH_HEADER = (
    "instance", "num_vars", "num_clauses", "log2_estimate_sparse", "dense_time", "sparse_time", "speedup",
)
TIMEOUT_MARK = "--"


class UsageError(ModelCountError):
    """Bad command-line input (missing file, out-of-range value)."""


@dataclass
class RunReport:
    """
    What a subcommand did.

    results is the reproducible payload; timings are kept apart so equal
    seeds and inputs give byte-identical results.
    """

    command: str
    parameters: dict
    results: object
    seed: int = None
    timings: dict = field(default_factory=dict)

    def to_json(self, include_timings=True):
        payload = {
            "command": self.command,
            "parameters": self.parameters,
            "seed": self.seed,
            "results": self.results,
        }
        if include_timings:
            payload["timings"] = self.timings
        return json.dumps(payload, indent=2, sort_keys=True)


def _oracle_from_args(args):
    xor_mode = XorEncoding.parse(args.xor_mode)
    if args.solver_cmd:
        return OracleConfig(backend="external", command=args.solver_cmd, xor_mode=xor_mode,
                            timeout=args.solver_timeout)
    return OracleConfig(xor_mode=xor_mode, timeout=args.solver_timeout)


def _params_from_args(args, schedule=None, seed=None):
    return CounterParams(
        epsilon=args.epsilon,
        delta=args.delta,
        rho=args.rho,
        qs=args.qs,
        schedule_kind=schedule or args.schedule,
        master_seed=args.seed if seed is None else seed,
        improved_t=args.improved_t,
    )


def _read_formula(path):
    if not os.path.isfile(path):
        raise UsageError(f"No such file: {path}")
    return read_dimacs(path)


def cmd_count(args, out=sys.stdout):
    """Approximate count of one DIMACS file."""
    started = time.perf_counter()
    formula = _read_formula(args.cnf)
    params = _params_from_args(args)
    oracle = _oracle_from_args(args)
    estimate = approxmc5(formula, params, oracle, workers=args.workers, time_budget=args.time_budget)

    raw_pivot, pivot = compute_pivot(params.epsilon, params.rho)
    parameters = {
        "file": args.cnf,
        "epsilon": params.epsilon,
        "delta": params.delta,
        "rho": params.rho,
        "qs": params.qs,
        "schedule": params.schedule_kind,
        "improved_t": params.improved_t,
        "pivot_raw": raw_pivot,
        "pivot": pivot,
        "workers": args.workers,
        "oracle": oracle.describe(),
    }
    report = RunReport(
        command="count",
        parameters=parameters,
        results=estimate.to_dict(include_timing=False),
        seed=params.master_seed,
        timings={"wall_time": time.perf_counter() - started},
    )

    if args.json:
        out.write(report.to_json() + "\n")
    else:
        out.write(f"{estimate.value}\n")
    how = "exact (below iniThresh)" if estimate.exact_shortcut else f"median of {len(estimate.iterations)} iterations"
    print(f"Estimate {estimate.value} [{how}], {estimate.solver_calls} solver calls", file=sys.stderr)
    return report


def cmd_density_table(args, out=sys.stdout):
    """CSV of i, p_lsa, p_solved, p_theoretical, bound_at_i."""
    if args.n < 1:
        raise UsageError(f"--n must be >= 1, got {args.n}")
    started = time.perf_counter()
    rows, qs_lsa = density_table(args.n, k=args.k, rho=args.rho, qs=args.qs)
    text = table_to_csv(rows)
    out.write(text)
    if args.plot:
        from .plots import plot_density_trend

        plot_density_trend(rows, args.k, args.plot)
    print(f"lsa schedule qs = {qs_lsa}", file=sys.stderr)
    return RunReport(
        command="density-table",
        parameters={"n": args.n, "k": args.k, "rho": args.rho, "qs": args.qs},
        results={"csv": text, "qs_lsa": qs_lsa},
        timings={"wall_time": time.perf_counter() - started},
    )


def cmd_verify(args, out=sys.stdout):
    """Run the verification suite; JSON report per check. --quality-plot reuses the PAC rows."""
    started = time.perf_counter()
    with_pac = args.with_pac or bool(args.quality_plot)
    results = run_verification_suite(
        with_pac=with_pac, pac_runs=args.pac_runs, seed=args.seed,
        downleft_ns=tuple(range(2, args.downleft_max_n + 1)),
    )
    if args.quality_plot:
        rows = pac_rows_from_report(results)
        if rows:
            from .plots import plot_quality

            plot_quality(rows, 0.8, args.quality_plot)
        else:
            logger.warning("PAC sweep produced no rows; %s not written", args.quality_plot)

    report = RunReport(
        command="verify",
        parameters={"with_pac": with_pac, "pac_runs": args.pac_runs,
                    "downleft_max_n": args.downleft_max_n},
        results=results,
        seed=args.seed,
        timings={"wall_time": time.perf_counter() - started},
    )
    out.write(report.to_json() + "\n")
    failed = [name for name, entry in results.items() if not entry["passed"]]
    print("All checks passed" if not failed else f"Failed: {', '.join(failed)}", file=sys.stderr)
    return report


def _timed_count(formula, params, oracle, budget, workers):
    start = time.perf_counter()
    try:
        estimate = approxmc5(formula, params, oracle, workers=workers, time_budget=budget)
    except OracleError as e:
        logger.warning("Run timed out or failed: %s", e)
        return None, None
    return estimate, time.perf_counter() - start


def _fmt(value, digits=4):
    return TIMEOUT_MARK if value is None else f"{value:.{digits}f}"


def cmd_bench(args, out=sys.stdout):
    """
    Dense vs sparse (lsa) runtime on every *.cnf in a directory.

    Timed-out runs are written as `--`; speedup is dense_time / sparse_time.
    """
    if not os.path.isdir(args.directory):
        raise UsageError(f"No such directory: {args.directory}")
    started = time.perf_counter()
    oracle = _oracle_from_args(args)
    names = sorted(name for name in os.listdir(args.directory) if name.endswith(".cnf"))

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(BENCH_HEADER)
    rows = []
    for index, name in enumerate(names):
        formula = read_dimacs(os.path.join(args.directory, name))
        seed = args.seed + index
        dense, dense_time = _timed_count(formula, _params_from_args(args, "dense", seed), oracle,
                                         args.timeout, args.workers)
        sparse, sparse_time = _timed_count(formula, _params_from_args(args, "lsa", seed), oracle,
                                           args.timeout, args.workers)
        log2_sparse = sparse.log2_value if sparse is not None else None
        speedup = dense_time / sparse_time if dense_time and sparse_time else None
        row = [
            name, formula.num_vars, formula.num_clauses,
            _fmt(log2_sparse, 3), _fmt(dense_time), _fmt(sparse_time), _fmt(speedup, 2),
        ]
        writer.writerow(row)
        rows.append(dict(zip(BENCH_HEADER, row)))
        logger.info("%s: dense %s s, sparse %s s", name, _fmt(dense_time), _fmt(sparse_time))

    out.write(buffer.getvalue())
    return RunReport(
        command="bench",
        parameters={"directory": args.directory, "timeout": args.timeout, "epsilon": args.epsilon,
                    "delta": args.delta, "oracle": oracle.describe()},
        results=rows,
        seed=args.seed,
        timings={"wall_time": time.perf_counter() - started},
    )


def _add_counter_options(parser):
    defaults = CounterParams()
    parser.add_argument("--epsilon", type=float, default=defaults.epsilon, help="tolerance")
    parser.add_argument("--delta", type=float, default=defaults.delta, help="confidence")
    parser.add_argument("--rho", type=float, default=defaults.rho, help="dispersion target of the hash family")
    parser.add_argument("--qs", type=int, default=defaults.qs, help="first concentrated prefix")
    parser.add_argument("--seed", type=int, default=defaults.master_seed, help="master seed")
    parser.add_argument("--improved-t", action="store_true", help="use the binomial-tail iteration count")
    parser.add_argument("--solver-cmd", default=None,
                        help="external solver command, e.g. 'cryptominisat5 --verb 0 {input}'")
    parser.add_argument("--solver-timeout", type=float, default=None, help="per-call solver timeout (s)")
    parser.add_argument("--xor-mode", default="native", help="native or tseitin:<width>")
    parser.add_argument("--workers", type=int, default=1, help="processes for core iterations")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="jk_modelcount",
        description="Approximate projected model counting with sparse prefix hashing",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    count = sub.add_parser("count", help="approximate count of a DIMACS file",
                           formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    count.add_argument("cnf", help="DIMACS CNF file (c ind / c p show lines set the projection)")
    _add_counter_options(count)
    count.add_argument("--schedule", choices=("dense", "lsa", "solved", "theoretical"), default="lsa")
    count.add_argument("--json", action="store_true", help="print the full JSON report")
    count.add_argument("--time-budget", type=float, default=None, help="overall time budget (s)")

    table = sub.add_parser("density-table", help="density schedules as CSV",
                           formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    table.add_argument("--n", type=int, default=64, help="number of rows")
    table.add_argument("--k", type=int, default=512, help="cell-load parameter")
    table.add_argument("--rho", type=float, default=1.1)
    table.add_argument("--qs", type=int, default=1)
    table.add_argument("--plot", default=None, help="write the density trend figure here")

    verify = sub.add_parser("verify", help="run the verification suite",
                            formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    verify.add_argument("--with-pac", action="store_true", help="include the PAC sweep (slow)")
    verify.add_argument("--pac-runs", type=int, default=20)
    verify.add_argument("--seed", type=int, default=1)
    verify.add_argument("--downleft-max-n", type=int, default=4, choices=(2, 3, 4))
    verify.add_argument("--quality-plot", default=None,
                        help="write the approximation quality figure here (runs the PAC sweep)")

    bench = sub.add_parser("bench", help="dense vs sparse runtime on a directory of .cnf files",
                           formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    bench.add_argument("directory")
    _add_counter_options(bench)
    bench.add_argument("--timeout", type=float, default=60.0, help="time budget per run (s)")

    return parser


COMMANDS = {
    "count": cmd_count,
    "density-table": cmd_density_table,
    "verify": cmd_verify,
    "bench": cmd_bench,
}


def main(argv=None, out=sys.stdout):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )

    try:
        report = COMMANDS[args.command](args, out)
    except (UsageError, DimacsParseError, ContractError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OracleError as e:
        print(f"Oracle error: {e}", file=sys.stderr)
        return EXIT_ORACLE
    except ModelCountError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_ORACLE

    if args.command == "verify" and not all(entry["passed"] for entry in report.results.values()):
        return EXIT_ORACLE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
