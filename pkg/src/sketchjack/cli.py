"""Command line interface: ``sketchjack <command> [options]``."""

import argparse
import csv
import io
import json
import logging
import math
import sys

import numpy as np

from . import jack, nystrom as nys, rsvd as rs
from .errors import CsvParseError, DegeneracyError, IngestionError, MatrixFormatError, \
    MemoryCapError, ParameterError
from .harness import (DEFAULT_MEMORY_CAP, DEFAULT_S_VALUES, ExperimentConfig, build_matrix,
                      orthoprojector_check, projector_sweep, rows_to_csv, sweep_experiment)
from .rng import derive_seed
from .testmat import save_matrix

MAX_SCHATTEN_P = 16

EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_NUMERIC = 4
EXIT_MEMORY = 5


def _schatten_p(text):
    p = int(text)
    if p < 2 or p % 2 or p > MAX_SCHATTEN_P:
        raise argparse.ArgumentTypeError(f"Schatten p must be even and in [2, {MAX_SCHATTEN_P}]")
    return p


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _add_matrix(p, required=True):
    p.add_argument("--matrix", required=required,
                   help="matrix spec: noisylr:R=5,xi=1e-4 | expdecay:R=5,rate=0.1 | "
                        "polydecay:R=5,p=1 | rbf:PATH[,sigma=..][,drop=a;b] | file:PATH | PATH.mjk")
    p.add_argument("--d", type=_positive_int, default=1000, help="size of synthetic matrices")
    p.add_argument("--delimiter", default=",", help="field delimiter for tabular input")


def _add_common(p, s_many=False, q_default=2):
    _add_matrix(p)
    if s_many:
        p.add_argument("--s", type=int, nargs="+", default=list(DEFAULT_S_VALUES),
                       help="sketch sizes")
    else:
        p.add_argument("--s", type=int, required=True, help="sketch size")
    p.add_argument("--q", type=int, default=q_default, help="subspace iteration steps (rsvd)")
    p.add_argument("--seed", type=int, default=0)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--fast", dest="fast", action="store_true", default=True,
                      help="downdating core replicates (default)")
    mode.add_argument("--baseline", dest="fast", action="store_false",
                      help="direct O(s^4) core replicates")
    p.add_argument("--shift-multiplier", type=float, default=1.0,
                   help="Nystrom stabilizing shift in units of roundoff * ||Y||")
    p.add_argument("--out", help="output path (stdout when omitted)")


def _add_sweep(p):
    _add_common(p, s_many=True)
    p.add_argument("--algorithm", choices=("rsvd", "nystrom"), default="rsvd")
    p.add_argument("--trials", type=_positive_int, default=1000)
    p.add_argument("--side", choices=("left", "right"), default="left")
    p.add_argument("--memory-cap", type=int, default=DEFAULT_MEMORY_CAP, help="bytes")
    p.add_argument("--workers", type=_positive_int, default=1)


def build_parser():
    parser = argparse.ArgumentParser(prog="sketchjack",
                                     description="Jackknife variance estimates for randomized "
                                                 "low-rank approximation.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a test matrix to an .mjk file")
    _add_matrix(g)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)

    for name in ("rsvd", "nystrom"):
        p = sub.add_parser(name, help=f"one {name} run with its jackknife estimate (JSON)")
        _add_common(p)
        p.add_argument("--schatten-p", type=_schatten_p, default=None,
                       help="also report the Schatten-p jackknife")
        p.add_argument("--truncate-rank", type=int, default=None,
                       help="also report Jack of the rank-r truncation")
        p.add_argument("--projector-index", type=int, default=None,
                       help="also report Jack of the i-th (1-based) projector")
        p.add_argument("--side", choices=("left", "right"), default="left")

    sw = sub.add_parser("sweep", help="Monte Carlo sweep over sketch sizes (CSV)")
    _add_sweep(sw)
    sw.add_argument("--target", choices=("none", "projector", "truncation", "schatten"),
                    default="none")
    sw.add_argument("--projector-index", type=int, default=1)
    sw.add_argument("--truncate-rank", type=int, default=10)
    sw.add_argument("--schatten-p", type=_schatten_p, default=4)

    ps = sub.add_parser("projector-sweep", help="sweeps for several projector indices (CSV)")
    _add_sweep(ps)
    ps.add_argument("--projector-index", type=int, nargs="+", required=True)

    oc = sub.add_parser("ortho-check", help="random orthoprojector bias and variance")
    oc.add_argument("--d", type=_positive_int, default=20)
    oc.add_argument("--s", type=_positive_int, default=5)
    oc.add_argument("--trials", type=int, default=5000)
    oc.add_argument("--seed", type=int, default=0)

    em = sub.add_parser("entry-map", help="entrywise jackknife for a singular vector (CSV)")
    _add_common(em, q_default=0)
    em.add_argument("--algorithm", choices=("rsvd", "nystrom"), default="rsvd")
    em.add_argument("--projector-index", type=int, default=1,
                    help="which singular vector (1-based)")
    em.add_argument("--side", choices=("left", "right"), default="left")
    return parser


def _emit(text, out):
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load(args):
    return build_matrix(args.matrix, args.d, derive_seed(args.seed, "matrix"), args.delimiter)


def _cmd_generate(args):
    matrix_id, A = _load(args)
    save_matrix(A, args.out)
    print(f"wrote {matrix_id} ({A.kind}, {A.shape[0]}x{A.shape[1]}) to {args.out}")


def _cmd_single(args):
    matrix_id, A = _load(args)
    if args.command == "rsvd":
        res = rs.rsvd(A, args.s, args.q, args.seed)
        cores = rs.core_replicates(res, fast=args.fast)
        values = res.Sigma
    else:
        res = nys.nystrom(A, args.s, args.seed, args.shift_multiplier)
        cores = nys.core_replicates(res, fast=args.fast)
        values = res.Lambda
    norm = A.fro_norm()
    X = res.approximation()
    summary = {
        "matrix": matrix_id,
        "algorithm": args.command,
        "shape": list(A.shape),
        "s": args.s,
        "q": args.q if args.command == "rsvd" else 0,
        "seed": args.seed,
        "fast": args.fast,
        "representation": cores.representation,
        "leading_values": [float(v) for v in values[:10]],
        "relative_error": float(np.linalg.norm(A.to_dense() - X) / norm) if norm else 0.0,
        "jack": jack.jack_frobenius(cores).value,
    }
    summary["relative_jack"] = summary["jack"] / norm if norm else 0.0
    if args.schatten_p:
        summary[f"jack_schatten_{args.schatten_p}"] = jack.jack_schatten(cores, args.schatten_p).value
    if args.truncate_rank:
        summary[f"jack_truncation_{args.truncate_rank}"] = \
            jack.jack_frobenius(jack.truncate_cores(cores, args.truncate_rank)).value
    if args.projector_index:
        i0 = args.projector_index - 1
        summary[f"jack_projector_{args.projector_index}"] = \
            jack.jack_frobenius(rs.projector_replicates(cores, i0, args.side)).value
    if hasattr(res, "nu"):
        summary["shift"] = float(res.nu)
    _emit(json.dumps(summary, indent=2) + "\n", args.out)


def _config(args, **extra):
    return ExperimentConfig(matrix=args.matrix, algorithm=args.algorithm, d=args.d,
                            s_values=tuple(args.s), q=args.q, trials=args.trials, seed=args.seed,
                            side=args.side, fast=args.fast, shift_multiplier=args.shift_multiplier,
                            delimiter=args.delimiter, memory_cap=args.memory_cap,
                            workers=args.workers, **extra)


def _cmd_sweep(args):
    cfg = _config(args, target=args.target, projector_index=args.projector_index,
                  truncate_rank=args.truncate_rank, schatten_p=args.schatten_p)
    return _report_rows(sweep_experiment(cfg), args.out)


def _cmd_projector_sweep(args):
    return _report_rows(projector_sweep(_config(args), args.projector_index), args.out)


def _report_rows(rows, out):
    _emit(rows_to_csv(rows), out)
    failed = [r for r in rows if r.error]
    for r in failed:
        print(f"s={r.s}: {r.error}", file=sys.stderr)
    if failed and len(failed) == len(rows):
        # nothing usable was produced; surface the first failure's class
        return EXIT_MEMORY if "MemoryCapError" in failed[0].error else EXIT_INPUT
    return 0


def _cmd_ortho(args):
    rec = orthoprojector_check(args.d, args.s, args.trials, args.seed)
    print(json.dumps(vars(rec), indent=2))


def _cmd_entry_map(args):
    matrix_id, A = _load(args)
    if args.algorithm == "rsvd":
        res = rs.rsvd(A, args.s, args.q, args.seed)
        cores = rs.core_replicates(res, fast=args.fast)
    else:
        res = nys.nystrom(A, args.s, args.seed, args.shift_multiplier)
        cores = nys.core_replicates(res, fast=args.fast)
    if not 1 <= args.projector_index <= args.s:
        raise ParameterError(f"--projector-index must lie in [1, {args.s}]")
    values, variances = rs.singular_vector_tukey(cores, res, args.projector_index - 1, args.side)
    rows = [["row", "value", "estimate"]]
    for k, (v, var) in enumerate(zip(values, variances)):
        rows.append([k, format(float(v), ".17g"), format(math.sqrt(max(float(var), 0.0)), ".17g")])
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    _emit(buf.getvalue(), args.out)


_COMMANDS = {
    "generate": _cmd_generate,
    "rsvd": _cmd_single,
    "nystrom": _cmd_single,
    "sweep": _cmd_sweep,
    "projector-sweep": _cmd_projector_sweep,
    "ortho-check": _cmd_ortho,
    "entry-map": _cmd_entry_map,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args) or 0
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MatrixFormatError, IngestionError, CsvParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except MemoryCapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MEMORY
    except (DegeneracyError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
