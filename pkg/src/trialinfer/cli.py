"""Command-line interface: ``trialinfer <subcommand> [options]``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from typing import Optional

from .gsd import ensure_boundaries
from .trial_report import (
    FIXTURES,
    load_fixture,
    load_spec,
    render,
    run_graph_report,
    run_gsd_report,
    run_report,
    simulation_config,
    verify,
)
from .trial_report.render import format_number
from .trial_report.spec import SpecParseError, SpecValidationError

SEED_ENV = "TRIALINFER_SEED"


def _default_seed() -> Optional[int]:
    v = os.environ.get(SEED_ENV)
    return int(v) if v else None


def _load(args):
    if args.fixture:
        return load_fixture(args.fixture)
    if not args.spec:
        raise SystemExit("error: --spec or --fixture is required")
    return load_spec(args.spec)


def _mc(args, spec):
    seed = args.seed if args.seed is not None else _default_seed()
    return simulation_config(spec, seed, args.reps, args.workers)


def _emit(args, data: bytes):
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()


def design_rows(spec) -> list[dict]:
    rows = []
    for g in spec.gsd_endpoints:
        d = ensure_boundaries(g.design)
        cum = d.cumulative_spend()
        for k in range(d.looks):
            rows.append({
                "endpoint": g.endpoint, "look": k + 1, "info_fraction": d.info_fractions[k],
                "cumulative_alpha": cum[k], "upper": d.boundaries[k], "lower": d.lower_boundaries[k],
                "local_level_one_sided": d.local_levels[k], "nominal_two_sided": 2 * d.local_levels[k],
            })
    return rows


def render_design(rows: list[dict], fmt: str, digits: int) -> bytes:
    cols = ["endpoint", "look", "info_fraction", "cumulative_alpha", "upper", "lower",
            "local_level_one_sided", "nominal_two_sided"]
    if fmt == "json":
        return (json.dumps({"schema": "trialinfer.design", "schema_version": 1, "looks": rows}, indent=2) + "\n").encode()

    def cell(c, v, text):
        if isinstance(v, float):
            return format_number(v, digits if c in ("upper", "lower", "info_fraction") else digits + 4, text)
        return str(v)

    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([cell(c, r[c], False) for c in cols])
        return buf.getvalue().encode()
    table = [cols] + [[cell(c, r[c], True) for c in cols] for r in rows]
    widths = [max(len(line[i]) for line in table) for i in range(len(cols))]
    lines = ["  ".join(v.ljust(w) for v, w in zip(line, widths)).rstrip() for line in table]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return ("\n".join(lines) + "\n").encode("utf-8")


def _json_safe(rows):
    out = []
    for r in rows:
        out.append({k: ("-inf" if isinstance(v, float) and v == float("-inf") else
                        "+inf" if isinstance(v, float) and v == float("inf") else v) for k, v in r.items()})
    return out


def cmd_design(args) -> int:
    spec = _load(args)
    if not spec.gsd_endpoints:
        print("spec has no group-sequential endpoints", file=sys.stderr)
        return 2
    digits = args.digits if args.digits is not None else 4
    _emit(args, render_design(_json_safe(design_rows(spec)), args.format, digits))
    return 0


def cmd_adjust(args) -> int:
    spec = _load(args)
    _emit(args, render(run_graph_report(spec), args.format, args.digits))
    return 0


def cmd_gsd_infer(args) -> int:
    spec = _load(args)
    ids = [args.endpoint] if args.endpoint else None
    if args.endpoint and args.endpoint not in {g.endpoint for g in spec.gsd_endpoints}:
        print(f"no group-sequential endpoint {args.endpoint!r}", file=sys.stderr)
        return 2
    _emit(args, render(run_gsd_report(spec, _mc(args, spec), ids), args.format, args.digits))
    return 0


def cmd_report(args) -> int:
    spec = _load(args)
    _emit(args, render(run_report(spec, _mc(args, spec)), args.format, args.digits))
    return 0


def cmd_verify(args) -> int:
    names = [args.fixture] if args.fixture else None
    failed = 0
    for r in verify(names, workers=args.workers):
        print(f"{'PASS' if r.ok else 'FAIL'} {r.name}")
        if not r.ok:
            failed += 1
            print(r.diff)
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="trialinfer", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, formats=True):
        sp.add_argument("--spec", help="trial spec JSON file")
        sp.add_argument("--fixture", choices=FIXTURES, help="use a bundled fixture instead of --spec")
        if formats:
            sp.add_argument("--format", choices=["text", "csv", "json"], default="text")
            sp.add_argument("--digits", type=int, help="decimal places for estimates and CIs")
            sp.add_argument("--out", help="write to this file instead of stdout")
        sp.add_argument("--seed", type=int, help=f"simulation seed (default: ${SEED_ENV} or the trial spec's seed)")
        sp.add_argument("--reps", type=int, help="simulation replications")
        sp.add_argument("--workers", type=int, default=1, help="parallel random-number substreams")

    sp = sub.add_parser("design", help="print boundaries and local levels of the trial spec's designs")
    common(sp)
    sp.set_defaults(func=cmd_design)
    sp = sub.add_parser("adjust", help="graph-based multiplicity-adjusted inference")
    common(sp)
    sp.set_defaults(func=cmd_adjust)
    sp = sub.add_parser("gsd-infer", help="all estimators for group-sequential endpoints")
    common(sp)
    sp.add_argument("--endpoint", help="restrict to one endpoint id")
    sp.set_defaults(func=cmd_gsd_infer)
    sp = sub.add_parser("report", help="full report tables")
    common(sp)
    sp.set_defaults(func=cmd_report)
    sp = sub.add_parser("verify", help="compare bundled fixtures with their golden renders")
    common(sp, formats=False)
    sp.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SpecParseError, SpecValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
