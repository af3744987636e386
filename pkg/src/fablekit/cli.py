"""``fablekit`` command line: generate, encode, verify, sweep, counts.

Exit codes: 0 success, 1 a check ran and failed, 2 usage error, 3 the
operation could not be carried out (bad input, size guard, I/O).
Diagnostics go to stderr; reports and tables go to files or stdout.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

import numpy as np

from . import __version__, kernels
from .angles import AngleDomainError
from .circuit import count_gates, iter_text, parse_text, recover_angles
from .encoders import METHODS, encoding_error, from_angles, normalize_method, predicted_block, prepare_angles
from .formats import read_matrix, write_dense_csv, write_matrix_market
from .generators import FAMILIES, GenSpec, _parse_scalar, generate
from .linalg import SparseMatrix, as_dense, max_abs_entry, qubits_of, spectral_norm
from .metrics import PRESETS, WORKERS_ENV, ErrorLadder, SweepConfig, memory_estimate_bytes, preset, \
    rotations_for_accuracy, run_sweep
from .simulator import MAX_BLOCK_QUBITS, SimulationSizeError, extract_block

log = logging.getLogger("fablekit")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_ERROR = 0, 1, 2, 3
REPORT_SCHEMA = 1


class UsageError(Exception):
    pass


def _method(text: str) -> str:
    try:
        return normalize_method(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _params(items) -> dict:
    out = {}
    for item in items or ():
        key, sep, val = item.partition("=")
        if not sep:
            raise UsageError(f"--param expects key=value, got {item!r}")
        out[key.strip()] = _parse_scalar(val.strip())
    return out


def _write_json(obj, path):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _resolved(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "func"}


# --------------------------------------------------------------------------

def cmd_generate(args) -> int:
    if args.spec:
        with open(args.spec) as fh:
            spec = GenSpec.from_text(fh.read())
    else:
        if args.family is None or args.n is None:
            raise UsageError("generate needs --spec or both --family and -n")
        spec = GenSpec(args.family, args.n, args.s, args.seed, _params(args.param))
    A = generate(spec)
    if args.prescale:
        peak = max_abs_entry(A)
        A = A.scaled(1.0 / peak) if isinstance(A, SparseMatrix) else as_dense(A) / peak
    sparse = A if isinstance(A, SparseMatrix) else SparseMatrix.from_dense(A)
    comments = spec.to_text().splitlines()
    if args.output.endswith(".csv"):
        write_dense_csv(args.output, as_dense(A))
    else:
        write_matrix_market(args.output, sparse, comments)
    print(f"nonzeros={sparse.nnz}")
    print(f"s={format(sparse.sparsity, '.17g')}")
    print(f"max_abs_entry={format(max_abs_entry(sparse), '.17g')}")
    return EXIT_OK


def cmd_encode(args) -> int:
    A = read_matrix(args.matrix)
    method = args.method
    if method == "LSFABLE" and (args.delta is not None or args.eps is not None or args.budget is not None):
        raise UsageError("LS-FABLE has a fixed rotation set; --delta/--eps/--budget do not apply")
    if args.rescale and method != "FABLE":
        raise UsageError("--rescale applies to FABLE only")
    n, scale, angles = prepare_angles(A, method, args.normalize, args.rescale)
    target = None
    reached = True
    if method == "LSFABLE":
        keep, delta = angles.keep_mask(0.0), 0.0
    elif args.eps is not None:
        target = args.eps
        ladder = ErrorLadder(A, method, prepared=(n, scale, angles))
        res = rotations_for_accuracy(A, target, method, ladder=ladder)
        keep, delta, reached = angles.budget_mask(res.rotations), res.delta, res.reached
        if not reached:
            log.warning("target eps=%g not reachable; full circuit gives %g", target, res.epsilon)
    elif args.budget is not None:
        keep, delta = angles.budget_mask(args.budget), angles.threshold_for_budget(args.budget)
    else:
        delta = args.delta or 0.0
        keep = angles.keep_mask(delta)
    enc = from_angles(method, n, scale, angles, keep, delta)
    eps = encoding_error(A, enc)
    counts = enc.counts()
    report = {
        "schema": REPORT_SCHEMA,
        "version": __version__,
        "method": method,
        "n": n,
        "alpha": enc.alpha,
        "scale": scale,
        "ancillas": enc.ancillas,
        "delta": delta,
        "epsilon": eps,
        "counts": counts.as_dict(),
        "rotations": counts.rotations,
        "nonzeros": int(np.count_nonzero(as_dense(A))),
        "config": _resolved(args),
    }
    if method == "LSFABLE":
        report["rotations_without_offset"] = counts.rotations - (1 if as_dense(A)[0, 0] == 0.0 else 0)
    if target is not None:
        report["target_epsilon"] = target
        report["reached"] = reached
    if args.circuit:
        with open(args.circuit, "w") as fh:
            for line in iter_text(enc.circuit):
                fh.write(line + "\n")
    _write_json(report, args.report)
    return EXIT_OK if reached else EXIT_FAIL


def cmd_verify(args) -> int:
    A = as_dense(read_matrix(args.matrix))
    n = qubits_of(A)
    with open(args.circuit_file) as fh:
        c = parse_text(fh.read())
    method = args.method or c.meta.method
    alpha = args.alpha if args.alpha is not None else c.meta.alpha
    if method is None or alpha is None:
        raise UsageError("circuit has no metadata line; pass --method and --alpha")
    method = normalize_method(method)
    if n > args.max_qubits:
        raise SimulationSizeError(
            f"n={n} exceeds the simulation guard n <= {args.max_qubits}; "
            "use `fablekit encode` for the closed-form error instead")
    block = extract_block(c, n, max_qubits=args.max_qubits) / alpha
    scale = 1.0 / (alpha * 2**n)
    closed = predicted_block(method, scale, recover_angles(c), None)
    deviation = float(np.abs(block - closed).max())
    eps = spectral_norm(A - block)
    ok = deviation <= args.tol and (args.eps is None or eps < args.eps)
    _write_json({"schema": REPORT_SCHEMA, "method": method, "n": n, "alpha": alpha, "epsilon": eps,
                 "max_deviation": deviation, "pass": ok, "config": _resolved(args)}, args.report)
    print("PASS" if ok else "FAIL", file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_sweep(args) -> int:
    if (args.preset is None) == (args.config is None):
        raise UsageError("sweep needs exactly one of a preset name or --config")
    if args.config:
        with open(args.config) as fh:
            cfg = SweepConfig.from_dict(json.load(fh))
    else:
        cfg = preset(args.preset)
    overrides = {}
    if args.samples is not None:
        overrides["samples"] = args.samples
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.max_n is not None:
        overrides["max_n"] = args.max_n
    if args.timing:
        overrides["timing"] = True
    if overrides:
        cfg = replace(cfg, **overrides)
    top = max((n for n in cfg.n if n <= cfg.max_n), default=0)
    if top >= 12:
        log.warning("n=%d points need about %.0f MiB per evaluation", top, memory_estimate_bytes(top) / 2**20)
    result = run_sweep(cfg, args.output, workers=args.workers)
    summary = {"schema": REPORT_SCHEMA, "records": len(result.records), "bound_checks": result.bound_checks,
               "bound_violations": result.bound_violations, "max_bound_ratio": result.max_bound_ratio,
               "sweep": cfg.as_dict(), "config": _resolved(args)}
    if args.report:
        _write_json(summary, args.report)
    log.info("%d records, %d bound violations", len(result.records), result.bound_violations)
    return EXIT_OK if result.bound_violations == 0 else EXIT_FAIL


def cmd_counts(args) -> int:
    if args.circuit_file:
        with open(args.circuit_file) as fh:
            c = parse_text(fh.read())
        counts = count_gates(c, expand_swaps=not args.keep_swaps)
        _write_json({"schema": REPORT_SCHEMA, "counts": counts.as_dict()}, None)
        return EXIT_OK
    if args.matrix is None or args.method is None:
        raise UsageError("counts needs a circuit file, or --matrix with --method")
    A = read_matrix(args.matrix)
    n, scale, angles = prepare_angles(A, args.method, args.normalize, args.rescale)
    if args.method == "LSFABLE":
        keep = angles.keep_mask(0.0)
    elif args.budget is not None:
        keep = angles.budget_mask(args.budget)
    else:
        keep = angles.keep_mask(args.delta)
    enc = from_angles(args.method, n, scale, angles, keep, args.delta)
    _write_json({"schema": REPORT_SCHEMA, "method": args.method, "n": n, "counts": enc.counts().as_dict()}, None)
    return EXIT_OK


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fablekit", description="Block-encoding circuits via FABLE, S-FABLE and LS-FABLE.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging on stderr")
    p.add_argument("--version", action="version", version=f"fablekit {__version__} ({kernels.BACKEND})")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a seeded test matrix")
    g.add_argument("--family", choices=FAMILIES)
    g.add_argument("-n", type=int, help="matrix qubits (N = 2**n)")
    g.add_argument("-s", type=float, default=0.0, help="relative sparsity, nonzeros per row on average")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--param", action="append", metavar="KEY=VALUE", help="family parameter (repeatable)")
    g.add_argument("--spec", help="key=value spec file instead of flags")
    g.add_argument("--prescale", action="store_true", help="divide by the largest |entry|")
    g.add_argument("-o", "--output", required=True, help=".mtx (MatrixMarket) or .csv (dense)")
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("encode", help="build a block-encoding circuit and report its error")
    e.add_argument("matrix")
    e.add_argument("-m", "--method", type=_method, default="FABLE", help=f"one of {', '.join(METHODS)}")
    sel = e.add_mutually_exclusive_group()
    sel.add_argument("--delta", type=float, help="drop rotations with |angle| below this")
    sel.add_argument("--eps", type=float, help="fewest rotations with spectral error below this")
    sel.add_argument("--budget", type=int, help="keep this many largest rotations")
    e.add_argument("--rescale", action="store_true", help="FABLE: divide by max|entry| when it exceeds 1")
    e.add_argument("--normalize", choices=("auto", "always"), default="auto",
                   help="S-FABLE: divide HAH by its max entry only when above 1 (auto) or always")
    e.add_argument("--circuit", help="write the OpenQASM circuit here")
    e.add_argument("--report", help="write the JSON report here (default stdout)")
    e.set_defaults(func=cmd_encode)

    v = sub.add_parser("verify", help="simulate a circuit file and compare with the matrix")
    v.add_argument("matrix")
    v.add_argument("circuit_file")
    v.add_argument("-m", "--method", help="override the method recorded in the circuit")
    v.add_argument("--alpha", type=float, help="override the subnormalization recorded in the circuit")
    v.add_argument("--tol", type=float, default=1e-10, help="allowed deviation from the closed form")
    v.add_argument("--eps", type=float, help="also require spectral error below this")
    v.add_argument("--max-qubits", type=int, default=MAX_BLOCK_QUBITS, help="simulation guard on n")
    v.add_argument("--report", help="write the JSON report here (default stdout)")
    v.set_defaults(func=cmd_verify)

    w = sub.add_parser("sweep", help="run a named preset or a JSON sweep config, write CSV")
    w.add_argument("preset", nargs="?", help=f"one of: {', '.join(sorted(PRESETS))}")
    w.add_argument("--config", help="JSON sweep config instead of a preset")
    w.add_argument("-o", "--output", required=True, help="CSV path")
    w.add_argument("--samples", type=int, help="override samples per (n, s)")
    w.add_argument("--seed", type=int, help="override the base seed")
    w.add_argument("--max-n", type=int, help="size ceiling (default 11; 12 and 13 are opt-in)")
    w.add_argument("--timing", action="store_true", help="fill wall_time_ms (output no longer reproducible)")
    w.add_argument("--workers", type=int, help=f"process pool size (default ${WORKERS_ENV} or 1)")
    w.add_argument("--report", help="write a JSON summary here")
    w.set_defaults(func=cmd_sweep)

    c = sub.add_parser("counts", help="gate counts of a circuit file, or of an encoding without building it")
    c.add_argument("circuit_file", nargs="?")
    c.add_argument("--matrix")
    c.add_argument("-m", "--method", type=_method)
    csel = c.add_mutually_exclusive_group()
    csel.add_argument("--delta", type=float, default=0.0)
    csel.add_argument("--budget", type=int)
    c.add_argument("--rescale", action="store_true")
    c.add_argument("--normalize", choices=("auto", "always"), default="auto")
    c.add_argument("--keep-swaps", action="store_true", help="count SWAPs as SWAPs, not 3 CNOTs")
    c.set_defaults(func=cmd_counts)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), stream=sys.stderr,
                        format="fablekit: %(levelname)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"fablekit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (AngleDomainError, SimulationSizeError, ValueError, KeyError, OSError) as exc:
        print(f"fablekit: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
