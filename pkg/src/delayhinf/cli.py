"""Command-line front end.

Subcommands::

    delay-hinf norm SYSTEM [--N N | --omega-c W] [--omega-t W] [--tol T] [--out F]
    delay-hinf svplot SYSTEM --omega-max W --points K [--all] [--out F]
    delay-hinf levelset-trace SYSTEM [--N N] [--omega-t W] [--tol T] [--out F]
    delay-hinf cutoff-table [--delta D] [--nmax M] [--out F]
    delay-hinf bench DIRECTORY [--N N] [--tol T] [--out F]

Errors are reported on stderr as ``category: detail`` with exit status 2
(input), 3 (numerical) or 4 (unstable system).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .corrector import compute_hinf, max_workers
from .errors import DelayHinfError, InputError, InstabilityError
from .levelset import predict_gmax
from .oracles import sweep_oracle
from .spectral import DEFAULT_DELTA, N_MAX, choose_N, cutoff_table
from .system import as_scaled, check_stability, load_system

EXIT_INPUT = 2
EXIT_NUMERICAL = 3
EXIT_UNSTABLE = 4


# ---------------------------------------------------------------- formatting


def _fmt_float(x):
    if not math.isfinite(x):
        return "null"
    s = f"{x:.12g}"
    return "0" if s == "-0" else s


def dumps(obj):
    """JSON with floats at 12 significant digits and ``null`` for +-inf/nan.

    Dict order is kept as given, so the output is byte-stable.
    """
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        return _fmt_float(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {dumps(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(dumps(v) for v in obj) + "]"
    if hasattr(obj, "item"):
        return dumps(obj.item())
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _emit(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


# ---------------------------------------------------------------- arguments


def _tol(value):
    t = float(value)
    if not 0.0 < t <= 0.1:
        raise argparse.ArgumentTypeError(f"tol must lie in (0, 0.1], got {value}")
    return t


def _N(value):
    n = int(value)
    if not 1 <= n <= N_MAX:
        raise argparse.ArgumentTypeError(f"N must lie in [1, {N_MAX}], got {value}")
    return n


def _positive(value):
    x = float(value)
    if not (x > 0.0 and math.isfinite(x)):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {value}")
    return x


def _nonneg(value):
    x = float(value)
    if not (x >= 0.0 and math.isfinite(x)):
        raise argparse.ArgumentTypeError(f"expected a nonnegative number, got {value}")
    return x


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"input: {message}\n")
        raise SystemExit(EXIT_INPUT)


def build_parser():
    p = _Parser(prog="delay-hinf", description="H-infinity norm of retarded time-delay systems")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        g = sp.add_mutually_exclusive_group()
        g.add_argument("--N", type=_N, default=None, help="discretization degree (default 15)")
        g.add_argument("--omega-c", type=_nonneg, default=None,
                       help="cut-off frequency target; picks the smallest adequate N")
        sp.add_argument("--omega-t", type=_nonneg, default=None,
                        help="candidate critical frequency")
        sp.add_argument("--tol", type=_tol, default=1e-6)
        sp.add_argument("--out", default=None, help="output file (default stdout)")

    sp = sub.add_parser("norm", help="compute the H-infinity norm (JSON)")
    sp.add_argument("system")
    common(sp)

    sp = sub.add_parser("svplot", help="singular values on a frequency grid (CSV)")
    sp.add_argument("system")
    sp.add_argument("--omega-max", type=_positive, required=True)
    sp.add_argument("--points", type=int, required=True)
    sp.add_argument("--all", action="store_true", help="write every singular value")
    sp.add_argument("--out", default=None)

    sp = sub.add_parser("levelset-trace", help="per-level predictor diagnostics (JSON lines)")
    sp.add_argument("system")
    common(sp)

    sp = sub.add_parser("cutoff-table", help="cut-off frequency per N (CSV)")
    sp.add_argument("--delta", type=_positive, default=DEFAULT_DELTA)
    sp.add_argument("--nmax", type=_N, default=25)
    sp.add_argument("--out", default=None)

    sp = sub.add_parser("bench", help="run every system file in a directory")
    sp.add_argument("directory")
    common(sp)
    return p


# ---------------------------------------------------------------- commands


def cmd_norm(args):
    sysm = load_system(args.system)
    res = compute_hinf(sysm, N=args.N, omega_c=args.omega_c, omega_t=args.omega_t, tol=args.tol)
    _emit(dumps(res.to_dict()) + "\n", args.out)


def cmd_svplot(args):
    if args.points < 2:
        raise InputError("--points must be >= 2")
    sysm = load_system(args.system)
    est = check_stability(sysm)
    if not est.stable:
        raise InstabilityError(est.rightmost)
    res = sweep_oracle(sysm, args.omega_max, args.points)
    res.write_csv(sys.stdout if args.out is None else args.out, all_values=args.all)


def cmd_levelset_trace(args):
    sysm = load_system(args.system)
    est = check_stability(sysm)
    if not est.stable:
        raise InstabilityError(est.rightmost)
    ss = as_scaled(sysm)
    N = args.N if args.N is not None else choose_N(
        None if args.omega_c is None else args.omega_c * ss.scale)
    wt = None if args.omega_t is None else args.omega_t * ss.scale
    pred = predict_gmax(ss, N, omega_t=wt, tol=args.tol)
    lines = []
    for h in pred.state.history:
        # frequencies back in the units of the input file
        rec = {
            "xi": h["xi"],
            "crossings": [w / ss.scale for w in h["crossings"]],
            "midpoints": [w / ss.scale for w in h["midpoints"]],
            "lambda1_values": h["lambda1_values"],
        }
        lines.append(dumps(rec) + "\n")
    _emit("".join(lines), args.out)


def cmd_cutoff_table(args):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["N", "delta", "omega_c"])
    for N, wc in cutoff_table(args.delta, args.nmax):
        w.writerow([N, _fmt_float(args.delta), _fmt_float(wc)])
    _emit(buf.getvalue(), args.out)


def _bench_one(path, args):
    try:
        sysm = load_system(path)
        res = compute_hinf(sysm, N=args.N, omega_c=args.omega_c, omega_t=args.omega_t,
                           tol=args.tol)
        return path.stem, sysm, res, None
    except DelayHinfError as exc:
        return path.stem, None, None, exc


def cmd_bench(args):
    d = Path(args.directory)
    if not d.is_dir():
        raise InputError(f"{d}: not a directory")
    files = sorted(d.glob("*.json"))
    if not files:
        raise InputError(f"{d}: no *.json system files")
    with ThreadPoolExecutor(max_workers=max_workers()) as pool:
        rows = list(pool.map(lambda f: _bench_one(f, args), files))
    header = f"{'plant':<12} {'n':>4} {'m':>3} {'N':>4} {'xi_pred':>14} {'xi_corr':>14}"
    lines = [header]
    failed = []
    for name, sysm, res, exc in rows:
        if exc is not None:
            lines.append(f"{name:<12} error: {_category(exc)}: {exc}")
            failed.append(exc)
            continue
        lines.append(
            f"{name:<12} {sysm.n:>4} {sysm.m:>3} {res.N:>4} "
            f"{res.predicted_norm:>14.6f} {res.norm:>14.6f}"
        )
    _emit("\n".join(lines) + "\n", args.out)
    if failed:
        raise failed[0]


_COMMANDS = {
    "norm": cmd_norm,
    "svplot": cmd_svplot,
    "levelset-trace": cmd_levelset_trace,
    "cutoff-table": cmd_cutoff_table,
    "bench": cmd_bench,
}


def _category(exc):
    return getattr(exc, "category", type(exc).__name__)


def exit_code(exc):
    return getattr(exc, "exit_code", EXIT_INPUT)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        _COMMANDS[args.command](args)
    except DelayHinfError as exc:
        sys.stderr.write(f"{_category(exc)}: {exc}\n")
        return exit_code(exc)
    except (OSError, ValueError) as exc:
        sys.stderr.write(f"input: {exc}\n")
        return EXIT_INPUT
    return 0


if __name__ == "__main__":
    sys.exit(main())
