"""Command-line front end.

Usage:
  k2design verify-all [--format json|text] [--out PATH] [--catalog PATH ...]
                      [--qmax N] [--trace] [--jobs N] [--family NAME]
  k2design explain CASE_ID [--catalog PATH ...] [--format json|text]
  k2design catalog list|validate|dump [--catalog PATH ...] [--family NAME]

Exit codes: 0 when every case is excluded, 1 on survivors, missing data or
errors in a verdict, 2 on usage, parse or validation errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import formula as fm
from .catalog import (
    Catalog,
    ParseError,
    UnknownCase,
    ValidationError,
    dump,
    load_builtin_catalog,
    load_catalog_file,
    validate_catalog,
)
from .lemmas import Evidence
from .polyarith import IntPoly
from .verifier import CaseVerdict, TheoremReport, run_theorem, verify_case

SCHEMA_VERSION = "1"

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

# evidence fields holding polynomial coefficient lists
_POLY_KEYS = {"V", "D", "scale", "N", "A", "B", "P", "Q", "divisor", "factor", "poly", "residual"}


def _canonical_json(value) -> str:
    return json.dumps(value, sort_keys=True, indent=2, ensure_ascii=True) + "\n"


def _load(paths: list[str] | None) -> Catalog:
    cat = load_builtin_catalog()
    for p in paths or []:
        cat = load_catalog_file(p, base=cat)
    return cat


def report_document(report: TheoremReport, with_trace: bool = False) -> dict:
    t = report.totals
    return {
        "schema_version": SCHEMA_VERSION,
        "catalog_checksum": report.checksum,
        "cases": [v.to_json(with_trace) for v in report.verdicts],
        "summary": {
            "total": t["total"],
            "excluded": t["excluded"],
            "survivors": t["survivors"],
            "missing_data": t["missing_data"],
            "errors": t["errors"],
            "audit_mismatches": t["audit_failures"],
        },
        "ok": report.ok,
    }


def _report_text(report: TheoremReport) -> str:
    rows = [("case", "route", "verdict", "reason")]
    for v in report.verdicts:
        why = v.reason or (",".join(map(str, v.survivors)) if v.survivors else v.detail)
        if not v.audits_ok:
            why += " (audit mismatch)"
        rows.append((v.case_id, v.route, v.status, why))
    w = [max(len(r[i]) for r in rows) for i in range(3)]
    lines = [f"{a:<{w[0]}}  {b:<{w[1]}}  {c:<{w[2]}}  {d}".rstrip() for a, b, c, d in rows]
    t = report.totals
    lines.append("")
    lines.append(f"{t['excluded']}/{t['total']} excluded, {t['survivors']} with survivors, "
                 f"{t['missing_data']} missing data, {t['errors']} errors, "
                 f"{t['audit_failures']} audit mismatches")
    lines.append("theorem holds" if report.ok else "theorem NOT verified")
    return "\n".join(lines) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_verify_all(args) -> int:
    cat = _load(args.catalog)
    report = run_theorem(cat, jobs=args.jobs, family=args.family, qmax=args.qmax or None)
    if args.format == "json":
        text = _canonical_json(report_document(report, args.trace))
    else:
        text = _report_text(report)
    _emit(text, args.out)
    return EXIT_OK if report.ok else EXIT_FAIL


def _show(key: str, value) -> str:
    if key in _POLY_KEYS and isinstance(value, list) and all(isinstance(x, int) for x in value):
        return str(IntPoly(value))
    if key == "modulus" and isinstance(value, list):
        return str(IntPoly(value))
    return str(value)


def render_evidence(ev: Evidence) -> list[str]:
    d = ev.data
    if ev.kind in ("congruence", "remainder"):
        return [f"{ev.kind}: {_show('N', d['N'])} = {d['residue']}  (mod {_show('modulus', d['modulus'])})"]
    if ev.kind == "xgcd":
        lines = [f"xgcd: ({_show('P', d['P'])})*({_show('A', d['A'])})"
                 f" + ({_show('Q', d['Q'])})*({_show('B', d['B'])}) = {d['constant']}"]
        if "joint" in d:
            lines.append(f"  joint constant kept: {d['joint']}")
        return lines
    if ev.kind == "crossover":
        return [f"crossover: {d['what']}",
                f"  V = {_show('V', d['V'])}",
                f"  D = {_show('D', d['D'])}, scale = {_show('scale', d['scale'])}",
                f"  V(q) > scale(q)*D(q)^2 for all q >= {d['q_star']}; "
                f"W({d['q_star']}) = {d['W_at_q_star']}, W(q*-1) = {d['W_at_q_star_minus_1']}"]
    if ev.kind == "enumeration":
        lines = [f"enumeration: eps={d['eps']}, q = {d['residue']} mod {d['modulus']}, q < {d['limit']}, "
                 f"conditions [{d['conditions']}]: {len(d['qs'])} values"]
        for rec in d["points"]:
            parts = [f"q={rec['q']}"] + [f"{k}={rec[k]}" for k in ("f", "c", "v", "k", "bound", "Gx_pprime")
                                          if k in rec]
            lines.append("  " + ", ".join(parts) + f" -> {rec['reason'] or 'SURVIVES'}")
        return lines
    body = ", ".join(f"{k}={_show(k, v)}" for k, v in d.items())
    return [f"{ev.kind}: {body}"]


def explain_text(v: CaseVerdict) -> str:
    lines = [f"case {v.case_id}: {v.family} with stabilizer {v.stabilizer}",
             f"route {v.route}", ""]
    for ev in v.trace:
        lines += render_evidence(ev)
    lines.append("")
    tail = f"verdict: {v.status}"
    if v.reason:
        tail += f" ({v.reason})"
    if v.survivors:
        tail += f", survivors {list(v.survivors)}"
    if v.detail:
        tail += f": {v.detail}"
    lines.append(tail)
    if not v.audits_ok:
        lines.append("audit: a stated value of v disagrees with the computed one")
    return "\n".join(lines) + "\n"


def cmd_explain(args) -> int:
    cat = _load(args.catalog)
    try:
        verdict = verify_case(cat, args.case_id)
    except UnknownCase:
        print(f"error: unknown case {args.case_id!r}", file=sys.stderr)
        return EXIT_USAGE
    if args.format == "json":
        _emit(_canonical_json(verdict.to_json(with_trace=True)), None)
    else:
        _emit(explain_text(verdict), None)
    return EXIT_OK if verdict.excluded else EXIT_FAIL


def cmd_catalog(args) -> int:
    cat = _load(args.catalog)
    if args.action == "list":
        for c in cat.cases:
            if args.family is None or c.family == args.family:
                print(f"{c.id}\t{c.family}\t{c.stab}\t{c.route}")
        return EXIT_OK
    if args.action == "validate":
        problems = validate_catalog(cat)
        for p in problems:
            print(p)
        print(f"{len(problems)} violations")
        return EXIT_OK if not problems else EXIT_USAGE
    sys.stdout.write(dump(cat))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="k2design", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def with_catalog(p):
        p.add_argument("--catalog", action="append", metavar="PATH",
                       help="extra catalog file merged over the built-ins (repeatable, in order)")

    va = sub.add_parser("verify-all", help="verify every case and report")
    with_catalog(va)
    va.add_argument("--format", choices=("json", "text"), default="json")
    va.add_argument("--out", metavar="PATH")
    va.add_argument("--qmax", type=int, default=10 ** 4,
                    help="re-evaluate each certified inequality at prime powers below N (0 to skip)")
    va.add_argument("--trace", action="store_true", help="embed full traces in the report")
    va.add_argument("--jobs", type=int, default=1)
    va.add_argument("--family")
    va.set_defaults(func=cmd_verify_all)

    ex = sub.add_parser("explain", help="print the full trace of one case")
    ex.add_argument("case_id")
    with_catalog(ex)
    ex.add_argument("--format", choices=("json", "text"), default="text")
    ex.set_defaults(func=cmd_explain)

    ca = sub.add_parser("catalog", help="inspect the case catalog")
    ca.add_argument("action", choices=("list", "validate", "dump"))
    with_catalog(ca)
    ca.add_argument("--family")
    ca.set_defaults(func=cmd_catalog)
    return ap


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as ex:
        return EXIT_USAGE if ex.code else EXIT_OK
    try:
        return args.func(args)
    except (ParseError, ValidationError, fm.FormulaError, OSError) as ex:
        print(f"error: {ex}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
