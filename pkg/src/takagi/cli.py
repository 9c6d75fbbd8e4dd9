"""Command line front end: ``takagi <command> [options]``.

Every command writes one artifact (CSV or JSON).  Without ``--out`` and
without the ``TAKAGI_OUTPUT_DIR`` environment variable the artifact goes to
standard output; otherwise it is written to ``<dir>/<command>.<ext>``.  The
first line of every artifact is a comment with the version and the full
configuration.  Exit codes: 0 success, 1 invalid input, 2 level-set
construction failure, 3 precision budget exceeded.
"""

from __future__ import annotations

import argparse
import ast
import json
import math
import operator
import os
import sys

import numpy as np

from . import cover, levelset, littlewood, signs
from .core import TakagiParams, evaluate
from .emit import header_line, table_csv, to_json
from .exceptions import TakagiError, ValidationError

OUTPUT_ENV = "TAKAGI_OUTPUT_DIR"
SUITES = ("signs", "constancy", "lipschitz", "ordering")

# --------------------------------------------------------------------------
# Numeric expressions
# --------------------------------------------------------------------------

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNARY = {ast.UAdd: operator.pos, ast.USub: operator.neg}
_FUNCS = {"sqrt": math.sqrt}
_NAMES = {"phi": (1 + math.sqrt(5)) / 2}


def parse_number(text):
    """Evaluate a small arithmetic expression such as ``(1+sqrt(5))/16``.

    Only numbers, ``+ - * / **``, parentheses, ``sqrt`` and the name ``phi``
    are accepted.
    """

    def walk(node):
        if isinstance(node, ast.Expression):
            return walk(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return float(node.value)
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](walk(node.left), walk(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
            return _UNARY[type(node.op)](walk(node.operand))
        if (
            isinstance(node, ast.Call)
            and isinstance(node.func, ast.Name)
            and node.func.id in _FUNCS
            and len(node.args) == 1
            and not node.keywords
        ):
            return _FUNCS[node.func.id](walk(node.args[0]))
        if isinstance(node, ast.Name) and node.id in _NAMES:
            return _NAMES[node.id]
        raise ValueError("unsupported expression")

    try:
        value = walk(ast.parse(str(text).strip(), mode="eval"))
    except (SyntaxError, ValueError, ZeroDivisionError, OverflowError, TypeError) as exc:
        raise argparse.ArgumentTypeError(f"not a number or allowed expression: {text!r}") from exc
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"expression is not finite: {text!r}")
    return value


def parse_range(text):
    """``"2-7"`` or ``"2,3,5"`` to a sorted list of distinct integers."""
    text = str(text).strip()
    try:
        if "-" in text and "," not in text:
            lo, hi = (int(t) for t in text.split("-", 1))
            values = list(range(lo, hi + 1))
        else:
            values = sorted({int(t) for t in text.split(",") if t.strip()})
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad integer range {text!r}") from exc
    if not values:
        raise argparse.ArgumentTypeError(f"empty range {text!r}")
    return values


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------


def _add_params(p, a_default=None, b_default=None):
    p.add_argument("--a", type=parse_number, default=a_default, help="scale factor a (expressions allowed)")
    p.add_argument("--b", type=int, default=b_default, help="integer base b >= 2")


def build_parser():
    parser = argparse.ArgumentParser(prog="takagi", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help=f"output directory (default: ${OUTPUT_ENV} or stdout)")
    common.add_argument("--format", choices=("csv", "json"), default=None)
    common.add_argument("--threads", type=int, default=1, help="worker cap for window sweeps")
    common.add_argument("--config", help="JSON file with the same keys as the flags")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", parents=[common], help="evaluate T_{a,b} with an error bound")
    _add_params(p)
    p.add_argument("--x", type=parse_number, action="append", help="abscissa (repeatable)")
    p.add_argument("--tol", type=float, default=1e-12)

    p = sub.add_parser("roots", parents=[common], help="Littlewood roots: certify, search, enumerate")
    p.add_argument("--target", type=parse_number, help="find a root within --eps of this value")
    p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("--kcap", type=int, default=littlewood.DEFAULT_CAP)
    p.add_argument("--beta", type=parse_number, help="certify this value as a root")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--k", type=int, help="list every root in [1/2, 2] of every length-k polynomial")

    p = sub.add_parser("signs", parents=[common], help="greedy bounded sign sequence")
    p.add_argument("--beta", type=parse_number)
    p.add_argument("--k", type=int)

    p = sub.add_parser("levelset", parents=[common], help="Cantor level-set construction")
    _add_params(p)
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--kmax", type=int, default=16, help="longest polynomial tried when certifying ab")

    p = sub.add_parser("boxdim", parents=[common], help="global box-counting fit")
    _add_params(p)
    p.add_argument("--depths", type=parse_range, help="grid exponents m, e.g. 2-7")
    p.add_argument("--tol", type=float, default=None)

    p = sub.add_parser("assouad", parents=[common], help="localised counting around the level set")
    _add_params(p)
    p.add_argument("--M", dest="M_range", type=parse_range, help="probe indices, e.g. 2-6")
    p.add_argument("--depth", type=int, default=None, help="level-set depth (default: deepest needed)")
    p.add_argument("--jitter", type=int, default=8)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--kmax", type=int, default=16)

    p = sub.add_parser("verify", parents=[common], help="run the invariant suites")
    _add_params(p, 0.5, 2)
    p.add_argument("--suites", default=",".join(SUITES), help="comma-separated subset of " + ",".join(SUITES))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--corrupt-level", type=float, default=0.0, help=argparse.SUPPRESS)
    return parser


def _apply_config(parser, args, argv):
    """Merge a JSON config file; a key also given on the command line is an error."""
    if not args.config:
        return args
    try:
        with open(args.config, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read config {args.config!r}: {exc}") from exc
    if not isinstance(data, dict):
        raise ValidationError("config file must hold a JSON object")
    given = {tok.split("=", 1)[0].lstrip("-").replace("-", "_") for tok in argv if tok.startswith("--")}
    for key, value in data.items():
        dest = key.replace("-", "_")
        if dest == "M":
            dest = "M_range"
        if not hasattr(args, dest) or dest in ("command", "config"):
            raise ValidationError(f"unknown config key {key!r}")
        if dest in given or (dest == "M_range" and "M" in given):
            raise ValidationError(f"{key!r} is set both on the command line and in the config file")
        if dest in ("a", "beta", "target", "x"):
            value = [parse_number(v) for v in value] if isinstance(value, list) else parse_number(value)
        if dest in ("depths", "M_range") and not isinstance(value, list):
            value = parse_range(value)
        setattr(args, dest, value)
    return args


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------


def _require(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise ValidationError("missing required option(s): " + ", ".join("--" + m for m in missing))


def _params(args):
    _require(args, "a", "b")
    return TakagiParams(args.a, args.b)


def _certify_ab(p, kmax):
    cert = littlewood.certify(p.ab, kmax, 1e-9)
    if cert is None:
        raise ValidationError(f"ab={p.ab!r} is not a root of any Littlewood polynomial of length <= {kmax}")
    return cert


def cmd_eval(args):
    _require(args, "x")
    p = _params(args)
    rows = []
    for x in args.x:
        res = evaluate(p, x, args.tol)
        rows.append({"x": x, "value": res.value, "error_bound": res.error_bound, "terms_used": res.terms_used})
    return rows, ["x", "value", "error_bound", "terms_used"], "csv"


def cmd_roots(args):
    modes = [args.target is not None, args.beta is not None, args.k is not None]
    if sum(modes) != 1:
        raise ValidationError("give exactly one of --target, --beta or --k")
    if args.target is not None:
        found = littlewood.find_near(args.target, args.eps, args.kcap)
        roots = [found] if found else []
    elif args.beta is not None:
        found = littlewood.certify(args.beta, args.kcap, args.tol)
        roots = [found] if found else []
    else:
        roots = []
        for vec in littlewood.enumerate_polynomials(args.k, args.kcap):
            for beta in littlewood.real_roots(vec):
                roots.append(littlewood.CertifiedRoot(vec, beta, abs(vec.exact_value(beta))))
    if not roots:
        print("no root found", file=sys.stderr)
    return [r.as_row() for r in roots], ["k", "coeffs", "beta", "residual"], "csv"


def cmd_signs(args):
    _require(args, "beta", "k")
    t = signs.generate(args.beta, args.k)
    rows = [
        {"i": i, "step": (t.steps[i - 1] if i else ""), "state": x, "bound": t.bound}
        for i, x in enumerate(t.states)
    ]
    if not signs.verify(t):
        raise ValidationError("generated trajectory failed verification")
    return rows, ["i", "step", "state", "bound"], "csv"


def cmd_levelset(args):
    p = _params(args)
    cert = _certify_ab(p, args.kmax)
    c = levelset.build(p, cert, args.depth, args.tol)
    if (args.format or "json") == "json":
        return c.as_dict(), None, "json"
    rows = []
    for iv in c.intervals:
        lo, hi = iv.float_bounds(p.b)
        rows.append({"numerator": iv.numerator, "level": iv.level, "lo": lo, "hi": hi})
    return rows, ["numerator", "level", "lo", "hi"], "csv"


def _fit_payload(report):
    return {
        "slope": report.slope,
        "intercept": report.intercept,
        "residual": report.residual,
        "n_points": report.n_points,
        "records": [dict(zip(("center_x", "center_y", "R", "r", "r_adjusted", "count", "theta"), r.as_row())) for r in report.records],
    }


def cmd_boxdim(args):
    _require(args, "depths")
    p = _params(args)
    report = cover.box_dim_fit(p, args.depths, args.tol)
    payload = _fit_payload(report)
    payload["theoretical"] = cover.box_dim_theoretical(p)
    return payload, None, "json"


def cmd_assouad(args):
    _require(args, "M_range")
    p = _params(args)
    cert = _certify_ab(p, args.kmax)
    depth = args.depth or math.ceil((max(args.M_range) + 1) / cert.k)
    c = levelset.build(p, cert, depth)
    report = cover.assouad_probe(p, c, args.M_range, args.jitter, args.theta, args.threads)
    return _fit_payload(report), None, "json"


# --------------------------------------------------------------------------
# Invariant suites
# --------------------------------------------------------------------------


def _suite_signs(p, args):
    rng = np.random.default_rng(args.seed)
    worst = -math.inf
    for beta in rng.uniform(1.01, 1.99, 1000):
        t = signs.generate(float(beta), 40)
        worst = max(worst, max(abs(x) for x in t.states) - t.bound)
    return worst <= 1e-9, f"max excess over bound {worst:.3g}"


def _suite_constancy(p, args):
    cert = _certify_ab(p, 16)
    depth = max(1, min(4, int(levelset.PRECISION_BITS // (cert.k * math.log2(p.b)))))
    c = levelset.build(p, cert, depth)
    c.level_value += args.corrupt_level
    dev = levelset.verify_constancy(c, 3, 1e-12)
    bound = levelset.tail_spread_bound(c) + 2e-12
    return dev <= bound, f"depth {depth}: deviation {dev:.3g} vs bound {bound:.3g}"


def _suite_lipschitz(p, args):
    rng = np.random.default_rng(args.seed)
    graph = cover.TakagiGraph(p)
    failures = 0
    for _ in range(100):
        M = float(rng.uniform(0, 4))
        i = int(rng.integers(1, 5))
        j = int(rng.integers(i + 1, i + 5))
        slope = M * float(rng.choice([-1.0, 1.0]))
        w = cover.Window((0.5, 0.5), 2.0**-i)
        ok = cover.lipschitz_sum_check(M, graph, w, 2.0**-j, slope=slope, intercept=float(rng.uniform(-1, 1)))
        failures += not ok
    return failures == 0, f"{failures} of 100 configurations violate the inequality"


def _ordering_setup(p):
    """Scales for the estimator-ordering check, sized to each parameter set."""
    cert = _certify_ab(p, 16)
    if p.ab == 1.0:
        return cert, 5, list(range(2, 10)), 0.5, list(range(4, 16))
    m_max = int(cover.PROBE_BITS / (p.B * math.log2(p.b))) - 1
    m_hi = max(3, min(m_max, 6))
    return cert, math.ceil((m_hi + 1) / cert.k), list(range(2, m_hi + 1)), None, list(range(2, m_hi + 2))


def _suite_ordering(p, args):
    cert, depth, M_range, theta, depths = _ordering_setup(p)
    c = levelset.build(p, cert, depth)
    probe = cover.assouad_probe(p, c, M_range, theta=theta, threads=args.threads)
    box = cover.box_dim_fit(p, depths)
    return probe.slope >= box.slope - 0.05, f"probe slope {probe.slope:.4f}, box slope {box.slope:.4f}"


_SUITE_FUNCS = {
    "signs": _suite_signs,
    "constancy": _suite_constancy,
    "lipschitz": _suite_lipschitz,
    "ordering": _suite_ordering,
}


def cmd_verify(args):
    chosen = [s.strip() for s in str(args.suites).split(",") if s.strip()]
    if not chosen:
        raise ValidationError("no suites selected; nothing to verify")
    unknown = [s for s in chosen if s not in _SUITE_FUNCS]
    if unknown:
        raise ValidationError(f"unknown suite(s): {', '.join(unknown)}")
    p = _params(args)
    rows = []
    for name in chosen:
        try:
            ok, detail = _SUITE_FUNCS[name](p, args)
        except TakagiError as exc:
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        rows.append({"suite": name, "passed": "pass" if ok else "FAIL", "detail": detail})
    return rows, ["suite", "passed", "detail"], "csv"


COMMANDS = {
    "eval": cmd_eval,
    "roots": cmd_roots,
    "signs": cmd_signs,
    "levelset": cmd_levelset,
    "boxdim": cmd_boxdim,
    "assouad": cmd_assouad,
    "verify": cmd_verify,
}


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------


def _config_record(args):
    skip = {"out", "config"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _render(args, result, columns, natural):
    fmt = args.format or natural
    header = header_line(_config_record(args))
    if fmt == "json":
        return header + to_json(result), "json"
    if columns is None:
        # Fit payloads flatten to their cover records.
        records = result.get("records", [])
        columns = ["center_x", "center_y", "R", "r", "r_adjusted", "count", "theta"]
        rows = [[rec[c] for c in columns] for rec in records]
        summary = ", ".join(f"{k}={result[k]!r}" for k in ("slope", "intercept", "residual", "n_points") if k in result)
        header += f"# fit {summary}\n"
        return header + table_csv(columns, rows), "csv"
    rows = [[row[c] for c in columns] for row in result]
    return header + table_csv(columns, rows), "csv"


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        args = _apply_config(parser, args, argv)
        if args.threads < 1:
            raise ValidationError("--threads must be >= 1")
        result, columns, natural = COMMANDS[args.command](args)
        text, ext = _render(args, result, columns, natural)
        out_dir = args.out or os.environ.get(OUTPUT_ENV)
        if out_dir:
            os.makedirs(out_dir, exist_ok=True)
            path = os.path.join(out_dir, f"{args.command}.{ext}")
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            print(path)
        else:
            sys.stdout.write(text)
    except TakagiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.command == "verify":
        failed = [row["suite"] for row in result if row["passed"] != "pass"]
        if failed:
            print("failed suites: " + ", ".join(failed), file=sys.stderr)
            return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
