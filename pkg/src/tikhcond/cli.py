"""Command-line interface ``tikhcond``.

Subcommands::

    tikhcond solve --problem toeplitz5 --lambda 5e-4
    tikhcond cond exact|power|sce [--problem ID|FILE] [--lambda X] [--structure S]
                                   [--M identity|row:<i>|FILE] [--k N] [--seed S]
    tikhcond reproduce --table toep|hankel|vand|cauchy|power|toep-rows|all
    tikhcond experiment --spec FILE

Exit status is 0 on success, 1 on invalid input and 2 when a reference
table is not reproduced.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from typing import Optional, Sequence

import numpy as np

from .bench import TABLE_IDS, ExperimentSpec, load_problem, perturb_and_measure, reproduce_table
from .errors import InputError, TikhcondError
from .exact import cond_exact
from .gsvd import solve_tikhonov
from .power import PowerOpts, cond_power
from .sce import SceOpts, cond_sce

EXIT_OK, EXIT_INPUT, EXIT_REPRO = 0, 1, 2
FORMATS = ("table", "json", "csv", "md")
STRUCTURES = ("auto", "symtoeplitz", "toeplitz", "hankel", "vandermonde", "cauchy", "none")


class _Parser(argparse.ArgumentParser):
    # usage errors are input errors; 2 is reserved for failed reproductions
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _fmt(v) -> str:
    if v is None:
        return "undefined"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def render(rows: list, fmt: str, meta: Optional[dict] = None) -> str:
    """Encode a list of flat dicts in one of :data:`FORMATS`."""
    if fmt == "json":
        payload = rows if meta is None else {**meta, "rows": rows}
        return json.dumps(payload, sort_keys=True, indent=2)
    cols = list(rows[0]) if rows else []
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        return buf.getvalue().rstrip("\n")
    cells = [[_fmt(r[c]) for c in cols] for r in rows]
    if fmt == "md":
        lines = ["| " + " | ".join(cols) + " |", "|" + "---|" * len(cols)]
        lines += ["| " + " | ".join(c) + " |" for c in cells]
        return "\n".join(lines)
    widths = [max([len(c)] + [len(row[i]) for row in cells]) for i, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(line.rstrip() for line in lines)


def _problem(args):
    L = getattr(args, "L", None)
    M = getattr(args, "M", None)
    return load_problem(args.problem, args.lam, L=L, M=M)


def cmd_solve(args) -> int:
    problem = _problem(args)
    sol = solve_tikhonov(problem)
    rows = [{"i": i, "x": float(v)} for i, v in enumerate(sol.x)]
    meta = {"lambda": problem.lam, "residual_norm": float(np.linalg.norm(sol.r)),
            "solution_norm": float(np.linalg.norm(sol.x))}
    if args.format == "json":
        meta["filters"] = [float(f) for f in sol.filters]
    print(render(rows, args.format, meta if args.format == "json" else None))
    if args.format == "table":
        print(f"\nlambda = {problem.lam:g}, ||r|| = {meta['residual_norm']:.6g}, "
              f"||x|| = {meta['solution_norm']:.6g}")
    return EXIT_OK


def cmd_cond(args) -> int:
    problem = _problem(args)
    structure = args.structure
    if args.method == "exact":
        triple = cond_exact(problem, structure)
    elif args.method == "power":
        triple = cond_power(problem, structure, PowerOpts(seed=args.seed))
    else:
        triple = cond_sce(problem, structure, SceOpts(k=args.k, seed=args.seed, workers=args.workers))
    if args.format == "json":
        out = triple.to_dict()
        out["lambda"] = problem.lam
        if args.method == "sce":
            out.update(k=args.k, seed=args.seed)
        print(json.dumps(out, sort_keys=True, indent=2))
        return EXIT_OK
    rows = [{"structure": triple.structure, "method": triple.method,
             "normwise": triple.normwise, "mixed": triple.mixed,
             "componentwise": triple.componentwise}]
    print(render(rows, args.format))
    if triple.undefined_components:
        print(f"componentwise value undefined at components {list(triple.undefined_components)}",
              file=sys.stderr)
    return EXIT_OK


def cmd_reproduce(args) -> int:
    tables = TABLE_IDS if args.table == "all" else (args.table,)
    reports = [reproduce_table(t) for t in tables]
    if args.format == "json":
        print(json.dumps([r.to_dict() for r in reports], sort_keys=True, indent=2))
    else:
        rows = []
        for r in reports:
            for c in r.cells:
                row = {"table": r.table, **c.to_dict()}
                row["selector"] = row["selector"] or "all"
                del row["kind"]
                rows.append(row)
        print(render(rows, args.format))
        if args.format == "table":
            for r in reports:
                print(f"{r.table}: {'reproduced' if r.passed else f'{r.n_failed} cell(s) differ'}")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_REPRO


def cmd_experiment(args) -> int:
    try:
        with open(args.spec) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read experiment spec {args.spec}: {exc}") from None
    spec = ExperimentSpec.from_dict(data)
    rep = perturb_and_measure(spec)
    fmt = data.get("format", args.format) if args.format is None else args.format
    fmt = fmt or "table"
    if fmt not in FORMATS:
        raise InputError(f"unknown output format {fmt!r}")
    if fmt == "json":
        print(json.dumps(rep.to_dict(), sort_keys=True, indent=2))
        return EXIT_OK
    names = ("normwise", "mixed", "componentwise")
    ests = (rep.estimates.normwise, rep.estimates.mixed, rep.estimates.componentwise)
    rows = [{"measure": n, "estimate": e, "true_error": t, "ratio": r}
            for n, e, t, r in zip(names, ests, rep.true_errors, (rep.r_kappa, rep.r_m, rep.r_c))]
    print(render(rows, fmt))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tikhcond",
                     description="Condition numbers of Tikhonov regularized least squares.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, fmt_default="table"):
        p.add_argument("--problem", default="toeplitz5",
                       help="example id or problem JSON file (default: toeplitz5)")
        p.add_argument("--lambda", dest="lam", type=float, default=None,
                       help="regularization parameter (defaults to the example's value)")
        p.add_argument("--L", default=None, help="identity, l1 or a JSON file")
        p.add_argument("--format", choices=FORMATS, default=fmt_default)

    p = sub.add_parser("solve", help="solve the regularized problem")
    common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("cond", help="condition numbers")
    p.add_argument("method", choices=("exact", "power", "sce"))
    common(p)
    p.add_argument("--structure", choices=STRUCTURES, default="auto")
    p.add_argument("--M", default=None, help="identity, row:<i> (zero-based) or a JSON file")
    p.add_argument("--k", type=int, default=3, help="SCE sample count")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1, help="threads for SCE samples")
    p.set_defaults(func=cmd_cond)

    p = sub.add_parser("reproduce", help="recompute a reference table")
    p.add_argument("--table", choices=TABLE_IDS + ("all",), required=True)
    p.add_argument("--format", choices=FORMATS, default="table")
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("experiment", help="run a perturbation experiment")
    p.add_argument("--spec", required=True, help="experiment JSON file")
    p.add_argument("--format", choices=FORMATS, default=None)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (TikhcondError, ValueError) as exc:
        print(f"tikhcond: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
