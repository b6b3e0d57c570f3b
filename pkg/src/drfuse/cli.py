"""Command-line front end.

Every subcommand is a thin wrapper over one library call: `reduce` designs a
compression map, `fuse` combines two estimates, `encode`/`decode` convert a
reduced estimate to and from wire bytes, `cost` prints the message size
arithmetic, and `rho-example`/`dtt`/`convergence` run the bundled studies.

Matrices cross the CLI boundary as rectangular CSV files written with 17
significant digits, so a write/read cycle is value-exact; wire messages are
binary (or hex on stdout).  Exit codes: 0 success, 1 usage error, 2 numerical
or domain error.  The environment variable DRFUSE_SEED supplies the seed for
the study subcommands when --seed is absent.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import os
import sys

import numpy as np

from .codec import cost_report, decode, deserialize, encode, serialize
from .exceptions import DegenerateInputError, DrfuseError, InputError
from .fusion import Estimate, ReducedEstimate, fuse_bsc, fuse_ci, fuse_kf, fuse_le
from .reduction import (
    GevoCiConfig,
    GevoInputs,
    dca_eig,
    gevo,
    gevo_ci,
    gevo_kf,
    gevo_le,
    loss_ladder,
    pco,
    select_m,
)
from .scenarios import (
    ConvergenceStudyConfig,
    DttConfig,
    RhoScenario,
    load_convergence_config,
    load_dtt_config,
    load_rho_scenario,
    run_convergence_study,
    run_dtt,
    run_rho_example,
)
from .scenarios.tracking import STATE_DIM

METRIC_COLUMNS = ("step", "method", "m", "coin", "anees", "rmtr")


class UsageError(Exception):
    """Bad flags or flag combinations; mapped to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):        # argparse would exit(2); we own the exit code
        raise UsageError(message)


def read_matrix_csv(path: str) -> np.ndarray:
    """Parse a rectangular numeric CSV file into a 2-d array."""
    rows: list[list[float]] = []
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: cannot open: {exc}") from exc
    with fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            try:
                rows.append([float(cell) for cell in row])
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: non-numeric cell") from exc
            if len(rows[-1]) != len(rows[0]):
                raise InputError(
                    f"{path}:{lineno}: ragged row (expected {len(rows[0])} columns)"
                )
    if not rows:
        raise InputError(f"{path}: empty matrix file")
    return np.array(rows)


def _read_vector_csv(path: str) -> np.ndarray:
    mat = read_matrix_csv(path)
    if 1 not in mat.shape:
        raise InputError(f"{path}: expected a single row or column, got {mat.shape}")
    return mat.reshape(-1)


def _format_cell(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return "%.17g" % float(value)


def write_results_csv(path: str | None, rows, header=None) -> None:
    """Emit rows as CSV to a file or stdout; floats keep 17 significant digits."""
    out = open(path, "w", newline="", encoding="utf-8") if path else sys.stdout
    try:
        writer = csv.writer(out, lineterminator="\n")
        if header is not None:
            writer.writerow(header)
        for row in rows:
            writer.writerow([_format_cell(cell) for cell in row])
    finally:
        if path:
            out.close()


def write_matrix_csv(path: str | None, mat: np.ndarray) -> None:
    write_results_csv(path, np.atleast_2d(np.asarray(mat, dtype=float)))


def _resolve_seed(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get("DRFUSE_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError as exc:
        raise UsageError(f"DRFUSE_SEED must be an integer, got {env!r}") from exc


def _optional_matrix(path: str | None):
    return read_matrix_csv(path) if path else None


def _cmd_reduce(args) -> int:
    r2 = read_matrix_csv(args.r2)
    if args.tau is not None and args.method not in ("gevo", "gevo-kf"):
        raise UsageError("--tau rank selection applies to gevo and gevo-kf only")
    if args.method == "dca-eig":
        write_matrix_csv(args.out, dca_eig(r2))
        return 0
    if args.method == "pco":
        if args.m is None:
            raise UsageError("--method pco requires --m")
        write_matrix_csv(args.out, pco(r2, args.m))
        return 0

    if args.r1 is None:
        raise UsageError(f"--method {args.method} requires --r1")
    r1 = read_matrix_csv(args.r1)
    h2 = _optional_matrix(args.h2)
    r12 = _optional_matrix(args.r12)
    if r12 is not None and args.method != "gevo":
        raise UsageError("--r12 is only meaningful with --method gevo")

    m = args.m
    if m is None:
        if args.tau is None:
            raise UsageError("one of --m or --tau is required")
        ladder = loss_ladder(GevoInputs(r1=r1, r2=r2, r12=r12, h2=h2))
        m = select_m(ladder, args.tau)
        if m == 0:
            raise DegenerateInputError(
                "no rank gives any fusion gain at this tau; nothing to transmit"
            )
    elif args.tau is not None:
        raise UsageError("--m and --tau are mutually exclusive")

    if args.method == "gevo":
        mapping = gevo(GevoInputs(r1=r1, r2=r2, r12=r12, h2=h2, m=m))
    elif args.method == "gevo-kf":
        mapping = gevo_kf(r1, r2, h2=h2, m=m)
    elif args.method == "gevo-ci":
        cfg = GevoCiConfig() if args.epsilon is None else GevoCiConfig(epsilon=args.epsilon)
        mapping, omega, _ = gevo_ci(r1, r2, h2=h2, m=m, config=cfg)
        print("omega %.17g" % omega, file=sys.stderr)
    else:
        mapping = gevo_le(r1, r2, h2=h2, m=m)
    write_matrix_csv(args.out, mapping)
    return 0


def _cmd_fuse(args) -> int:
    e1 = Estimate(mean=_read_vector_csv(args.y1), cov=read_matrix_csv(args.r1))
    e2 = ReducedEstimate(
        mean=_read_vector_csv(args.ym),
        cov=read_matrix_csv(args.rm),
        mapping=read_matrix_csv(args.map),
    )
    h2 = _optional_matrix(args.h2)
    if args.method == "bsc":
        fused = fuse_bsc(e1, e2, h2=h2, r12=_optional_matrix(args.r12))
    elif args.method in ("kf", "nkf"):
        if args.r12 is not None:
            raise UsageError("--r12 is only meaningful with --method bsc")
        fused = fuse_kf(e1, e2, h2=h2)
    elif args.method == "ci":
        if args.r12 is not None:
            raise UsageError("--r12 is only meaningful with --method bsc")
        fused = fuse_ci(e1, e2, h2=h2, omega=args.omega)
    else:
        if args.r12 is not None or args.omega is not None:
            raise UsageError("--r12/--omega do not apply to --method le")
        fused = fuse_le(e1, e2, h2=h2)
    # One rectangular block: fused mean on the first row, covariance below it.
    write_matrix_csv(args.out, np.vstack([fused.mean, fused.cov]))
    return 0


def _cmd_encode(args) -> int:
    est = ReducedEstimate(
        mean=_read_vector_csv(args.ym),
        cov=read_matrix_csv(args.rm),
        mapping=read_matrix_csv(args.map),
    )
    blob = serialize(encode(est))
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(blob)
    else:
        print(blob.hex())
    return 0


def _cmd_decode(args) -> int:
    try:
        with open(args.message, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise InputError(f"{args.message}: cannot open: {exc}") from exc
    est = decode(deserialize(blob))
    if args.out:
        write_matrix_csv(args.out + ".ym.csv", est.mean)
        write_matrix_csv(args.out + ".rm.csv", est.cov)
        write_matrix_csv(args.out + ".map.csv", est.mapping)
    else:
        for label, mat in (("ym", est.mean), ("rm", est.cov), ("map", est.mapping)):
            print(label)
            write_matrix_csv(None, mat)
    return 0


def _cmd_cost(args) -> int:
    rep = cost_report(args.n2, args.m)
    write_results_csv(
        args.out,
        [
            [
                rep.n2,
                rep.m,
                rep.n_dr,
                rep.n_full,
                rep.n_dca,
                "%.3f" % float(rep.ratio),
                "%.2f" % (100.0 * float(rep.extra_bits_ratio)),
            ]
        ],
        header=("n2", "m", "n_dr", "n_full", "n_dca", "ratio", "extra_bits_percent"),
    )
    return 0


def _cmd_rho_example(args) -> int:
    scenario = load_rho_scenario(args.config) if args.config else RhoScenario()
    if args.m is not None:
        scenario = dataclasses.replace(scenario, m_values=(args.m,))
    result = run_rho_example(scenario)
    for method, m, rho, reason in result.skipped:
        print(f"skipped {method} m={m} rho={rho}: {reason}", file=sys.stderr)
    rows = []
    for method in scenario.methods:
        for m in scenario.m_values:
            series = result.series[(method, m)]
            for i in range(len(series)):
                rows.append(
                    [
                        int(series.times[i]),
                        method,
                        m,
                        series.coin[i],
                        series.anees[i],
                        series.rmtr[i],
                    ]
                )
    write_results_csv(args.out, rows, header=METRIC_COLUMNS)
    return 0


def _cmd_dtt(args) -> int:
    cfg = load_dtt_config(args.config) if args.config else DttConfig()
    overrides = {
        key: getattr(args, key)
        for key in ("m", "runs", "steps", "threads")
        if getattr(args, key) is not None
    }
    # Seed precedence: --seed, then the config file, then DRFUSE_SEED, then 0.
    if args.seed is not None or not args.config:
        overrides["seed"] = _resolve_seed(args.seed)
    cfg = dataclasses.replace(cfg, **overrides)
    result = run_dtt(cfg)
    rows = []
    for bank in result.banks:
        series = result.series.get((bank, args.agent))
        if series is None:
            continue
        rank = cfg.m if not (bank.endswith("-full") or bank == "dca-eig") else STATE_DIM
        for i in range(len(series)):
            rows.append(
                [
                    int(series.times[i]),
                    bank,
                    rank,
                    series.coin[i],
                    series.anees[i],
                    series.rmtr[i],
                ]
            )
    write_results_csv(args.out, rows, header=METRIC_COLUMNS)
    return 0


def _cmd_convergence(args) -> int:
    cfg = load_convergence_config(args.config) if args.config else ConvergenceStudyConfig()
    overrides = {}
    if args.nx is not None:
        overrides["nx_values"] = (args.nx,)
    if args.epsilon is not None:
        overrides["epsilons"] = (args.epsilon,)
    if args.m is not None:
        overrides["m_values"] = (args.m,)
    if args.runs is not None:
        overrides["trials"] = args.runs
    if args.threads is not None:
        overrides["threads"] = args.threads
    if args.seed is not None or not args.config:
        overrides["seed"] = _resolve_seed(args.seed)
    cfg = dataclasses.replace(cfg, **overrides)
    results = run_convergence_study(cfg)
    rows = [
        [nx, eps, m, stats.trials, stats.mean, stats.std, stats.mode]
        for (nx, eps, m), stats in results.items()
    ]
    write_results_csv(
        args.out, rows, header=("nx", "epsilon", "m", "trials", "mean", "std", "mode")
    )
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="drfuse", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    reduce_p = sub.add_parser("reduce", help="design a dimension-reducing map")
    reduce_p.add_argument(
        "--method",
        required=True,
        choices=["gevo", "gevo-kf", "gevo-ci", "gevo-le", "pco", "dca-eig"],
    )
    reduce_p.add_argument("--r1", help="local covariance CSV")
    reduce_p.add_argument("--r2", required=True, help="remote covariance CSV")
    reduce_p.add_argument("--r12", help="cross-covariance CSV (gevo only)")
    reduce_p.add_argument("--h2", help="remote observation matrix CSV")
    reduce_p.add_argument("--m", type=int, help="number of map rows")
    reduce_p.add_argument(
        "--tau", type=float, help="pick the smallest m capturing this gain fraction"
    )
    reduce_p.add_argument("--epsilon", type=float, help="gevo-ci stopping tolerance")
    reduce_p.add_argument("--out", help="output CSV path (default stdout)")
    reduce_p.set_defaults(func=_cmd_reduce)

    fuse_p = sub.add_parser("fuse", help="fuse a local estimate with a reduced message")
    fuse_p.add_argument(
        "--method", required=True, choices=["bsc", "kf", "nkf", "ci", "le"]
    )
    fuse_p.add_argument("--y1", required=True, help="local mean CSV")
    fuse_p.add_argument("--r1", required=True, help="local covariance CSV")
    fuse_p.add_argument("--ym", required=True, help="reduced mean CSV")
    fuse_p.add_argument("--rm", required=True, help="reduced covariance CSV")
    fuse_p.add_argument("--map", required=True, help="reducing map CSV")
    fuse_p.add_argument("--h2", help="remote observation matrix CSV")
    fuse_p.add_argument("--r12", help="cross-covariance CSV (bsc only)")
    fuse_p.add_argument("--omega", type=float, help="CI weight (default: optimized)")
    fuse_p.add_argument("--out", help="output CSV path: mean row, then covariance")
    fuse_p.set_defaults(func=_cmd_fuse)

    encode_p = sub.add_parser("encode", help="encode a reduced estimate to wire bytes")
    encode_p.add_argument("--ym", required=True, help="reduced mean CSV")
    encode_p.add_argument("--rm", required=True, help="reduced (diagonal) covariance CSV")
    encode_p.add_argument("--map", required=True, help="reducing map CSV")
    encode_p.add_argument("--out", help="binary output path (default: hex to stdout)")
    encode_p.set_defaults(func=_cmd_encode)

    decode_p = sub.add_parser("decode", help="decode wire bytes back to an estimate")
    decode_p.add_argument("message", help="binary message file")
    decode_p.add_argument(
        "--out", help="output prefix; writes PREFIX.ym.csv / .rm.csv / .map.csv"
    )
    decode_p.set_defaults(func=_cmd_decode)

    cost_p = sub.add_parser("cost", help="message size arithmetic for (n2, m)")
    cost_p.add_argument("--n2", type=int, required=True)
    cost_p.add_argument("--m", type=int, required=True)
    cost_p.add_argument("--out", help="output CSV path (default stdout)")
    cost_p.set_defaults(func=_cmd_cost)

    rho_p = sub.add_parser(
        "rho-example", help="analytic fusion sweep over correlation strength"
    )
    rho_p.add_argument("--config", help="scenario JSON file")
    rho_p.add_argument("--m", type=int, help="restrict to one message rank")
    rho_p.add_argument("--out", help="output CSV path (default stdout)")
    rho_p.set_defaults(func=_cmd_rho_example)

    dtt_p = sub.add_parser("dtt", help="decentralized tracking Monte Carlo study")
    dtt_p.add_argument("--config", help="scenario JSON file")
    dtt_p.add_argument("--m", type=int, help="message rank for the reduced banks")
    dtt_p.add_argument("--runs", type=int, help="Monte Carlo runs")
    dtt_p.add_argument("--steps", type=int, help="tracking steps")
    dtt_p.add_argument("--seed", type=int, help="master seed (or DRFUSE_SEED)")
    dtt_p.add_argument("--threads", type=int, help="worker processes")
    dtt_p.add_argument(
        "--agent", type=int, default=3, help="receiving agent to report (default 3)"
    )
    dtt_p.add_argument("--out", help="output CSV path (default stdout)")
    dtt_p.set_defaults(func=_cmd_dtt)

    conv_p = sub.add_parser(
        "convergence", help="alternating-minimization convergence statistics"
    )
    conv_p.add_argument("--config", help="scenario JSON file")
    conv_p.add_argument("--nx", type=int, help="restrict to one state dimension")
    conv_p.add_argument("--epsilon", type=float, help="restrict to one tolerance")
    conv_p.add_argument("--m", type=int, help="restrict to one message rank")
    conv_p.add_argument("--runs", type=int, help="Monte Carlo trials per cell")
    conv_p.add_argument("--seed", type=int, help="master seed (or DRFUSE_SEED)")
    conv_p.add_argument("--threads", type=int, help="worker processes")
    conv_p.add_argument("--out", help="output CSV path (default stdout)")
    conv_p.set_defaults(func=_cmd_convergence)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"drfuse: error: {exc}", file=sys.stderr)
        return 1
    except (DrfuseError, np.linalg.LinAlgError) as exc:
        print(f"drfuse: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
