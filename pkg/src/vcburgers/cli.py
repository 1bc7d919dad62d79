"""Command line: ``vcburgers <subcommand> [options]``.

Exit codes: 0 no item failed, 1 some item failed, 2 usage error, 3 parse error.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import report as rp
from .expr import CHARTS, ExprError, normalize_chart
from .grammar import ParseError, parse

CHART_ENV = "VCBURGERS_CHART"
FAMILIES = ("Ghat", "L-equiv", "moebius", "effective-G0", "Gbar0")

GRAMMAR_HELP = """\
expression grammar:
  numbers and names; + - * / ^ and parentheses; unary minus
  variables t, x, u; jets u_x, u_tx, ...
  exp(.), ln(.), abs(.), sgn(.)
  unknown names become constants, or functions when applied: phi(x), g(t)
  derivatives of a declared function by suffix: phi_x(x)
examples:
  vcburgers classify --class L --A2 "1" --C "1"
  vcburgers classify --class Lhat --A2 "exp(x)" --A1 "3*exp(x)"
  vcburgers verify-tables --table 2 --format json --out table2.json
"""


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--chart", choices=CHARTS, default=None,
                   help=f"sign chart for x (default: ${CHART_ENV} or 'both')")
    p.add_argument("--format", choices=("json", "text"), default="text")
    p.add_argument("--out", help="also write the JSON report to this path")
    p.add_argument("--timing", action="store_true", help="include wall-clock time")
    return p


def build_parser():
    common = _common()
    ap = _Parser(prog="vcburgers", description="Symmetry and equivalence checks for "
                 "variable-coefficient Burgers equations u_t + C u u_x = A2 u_xx + A1 u_x.",
                 epilog=GRAMMAR_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    c = sub.add_parser("classify", parents=[common], help="split, reduce, map and match one equation")
    c.add_argument("--class", dest="cls", choices=("L", "Lhat"), default="L")
    c.add_argument("--A2", required=True)
    c.add_argument("--C")
    c.add_argument("--A1")
    c.add_argument("--X", help="x-hat with X_x = 1/C, when C is outside the pattern library")

    v = sub.add_parser("verify-tables", parents=[common], help="verify every case of a table")
    v.add_argument("--table", type=int, choices=(2, 3), required=True,
                   help="2: hat-regular cases, 3: regular-class cases")
    v.add_argument("--gauge", action="store_true", help="add the stabilizer checks per case")

    g = sub.add_parser("check-group", parents=[common], help="group axioms and chain identities")
    g.add_argument("--family", choices=FAMILIES, required=True)

    r = sub.add_parser("check-reduce", parents=[common], help="reducibility to u_t + u u_x = u_xx")
    r.add_argument("--A2", required=True)
    r.add_argument("--C", required=True)

    m = sub.add_parser("map", parents=[common], help="hat map x-hat = int dx / C")
    m.add_argument("--A2", required=True)
    m.add_argument("--C", required=True)
    m.add_argument("--X")

    sub.add_parser("proof-steps", parents=[common], help="reduced equations, first integrals, "
                   "nonplanar map")
    return ap


def _expr(args, name):
    text = getattr(args, name, None)
    if text is None:
        return None
    try:
        return parse(text, auto=True)
    except ParseError as exc:
        raise ParseError(f"--{name}: {exc.message}", exc.pos) from None


def _run(args):
    if args.command is None:
        raise UsageError("a subcommand is required")
    chart = args.chart or os.environ.get(CHART_ENV) or "both"
    try:
        chart = normalize_chart(chart)
    except ExprError as exc:
        raise UsageError(f"{CHART_ENV}: {exc}") from None
    cmd = args.command
    if cmd == "classify":
        if args.cls == "L":
            if args.A1 is not None:
                raise UsageError("class L has no --A1")
            els = {"A2": _expr(args, "A2"), "C": _expr(args, "C")}
            if els["C"] is None:
                raise UsageError("class L needs --C")
        else:
            if args.C is not None:
                raise UsageError("class Lhat has no --C")
            els = {"A2": _expr(args, "A2"), "A1": _expr(args, "A1")}
        return rp.classify_report(args.cls, els, _expr(args, "X"), chart)
    if cmd == "verify-tables":
        return rp.verify_tables(args.table, chart, gauge=args.gauge)
    if cmd == "check-group":
        return rp.check_group(args.family, chart)
    if cmd == "check-reduce":
        return rp.check_reduce({"A2": _expr(args, "A2"), "C": _expr(args, "C")}, chart)
    if cmd == "map":
        return rp.map_report({"A2": _expr(args, "A2"), "C": _expr(args, "C")},
                             _expr(args, "X"), chart)
    return rp.proof_steps_report(chart)


def main(argv=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
        rep = _run(args)
    except UsageError as exc:
        stderr.write(f"{exc}\n{ap.format_usage()}\n{GRAMMAR_HELP}")
        return 2
    except ParseError as exc:
        stderr.write(f"parse error: {exc}\n")
        return 3
    except ExprError as exc:
        # well-formed input the engine cannot act on (degenerate parameters, missing X)
        stderr.write(f"error: {exc}\n")
        return 2
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(rep.dumps(args.timing))
    if args.format == "json":
        stdout.write(rep.dumps(args.timing))
    else:
        stdout.write(rep.to_text(args.timing))
    return 1 if rep.failed else 0


if __name__ == "__main__":
    sys.exit(main())
