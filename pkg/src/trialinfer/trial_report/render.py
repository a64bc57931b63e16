"""Text, CSV and JSON rendering of report tables.

Rendering is a pure function of the table and the rounding settings.
Numbers are rounded half-even on their shortest decimal representation
with :mod:`decimal`, so output never depends on the locale or platform.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import replace
from decimal import ROUND_HALF_EVEN, Decimal
from typing import Iterable, Optional, Union

import jsonschema

from .report import STATUSES, Interval, ReportRow, ReportTable

REPORT_SCHEMA_VERSION = 1
FORMATS = ("text", "csv", "json")
DASH = "—"
MINUS = "−"

_NUM = {"oneOf": [{"type": "number"}, {"enum": ["-inf", "+inf"]}]}
_IVAL = {
    "oneOf": [
        {"type": "null"},
        {
            "type": "object",
            "required": ["lower", "upper", "lower_open", "upper_open"],
            "properties": {"lower": _NUM, "upper": _NUM,
                           "lower_open": {"type": "boolean"}, "upper_open": {"type": "boolean"}},
            "additionalProperties": False,
        },
    ]
}
_P = {"type": ["number", "null"], "minimum": 0, "maximum": 1}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "trialinfer report",
    "type": "object",
    "required": ["schema", "schema_version", "tables"],
    "properties": {
        "schema": {"const": "trialinfer.report"},
        "schema_version": {"const": REPORT_SCHEMA_VERSION},
        "tables": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["title", "kind", "estimate_header", "level", "digits", "p_digits", "rows", "footnotes"],
                "properties": {
                    "title": {"type": "string"},
                    "kind": {"enum": ["graph", "gsd"]},
                    "estimate_header": {"type": "string"},
                    "level": {"type": "number"},
                    "digits": {"type": "integer", "minimum": 0},
                    "p_digits": {"type": "integer", "minimum": 1},
                    "rows": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["section", "endpoint", "label", "kind", "estimate", "ci", "p",
                                         "adjusted_ci", "adjusted_p", "status"],
                            "properties": {
                                "section": {"type": "string"},
                                "endpoint": {"type": "string"},
                                "label": {"type": "string"},
                                "kind": {"type": "string"},
                                "estimate": {"oneOf": [_NUM, {"type": "null"}]},
                                "ci": _IVAL,
                                "p": _P,
                                "adjusted_ci": _IVAL,
                                "adjusted_p": _P,
                                "status": {"enum": list(STATUSES)},
                            },
                            "additionalProperties": False,
                        },
                    },
                    "footnotes": {"type": "array", "items": {"type": "string"}},
                },
                "additionalProperties": False,
            },
        },
    },
    "additionalProperties": False,
}

Tables = Union[ReportTable, Iterable[ReportTable]]


# -- number formatting ----------------------------------------------------------------

def round_half_even(x: float, digits: int) -> Decimal:
    q = Decimal(repr(float(x))).quantize(Decimal(1).scaleb(-digits), rounding=ROUND_HALF_EVEN)
    return q + 0 if q else abs(q)      # drop the sign of negative zero


def format_number(x: Optional[float], digits: int, text: bool = True) -> str:
    if x is None:
        return DASH if text else ""
    if math.isinf(x):
        if text:
            return "+∞" if x > 0 else MINUS + "∞"
        return "+inf" if x > 0 else "-inf"
    s = f"{round_half_even(x, digits):f}"
    return s.replace("-", MINUS) if text else s


def format_interval(iv: Optional[Interval], digits: int) -> str:
    if iv is None:
        return DASH
    lb = "(" if iv.lower_open else "["
    rb = ")" if iv.upper_open else "]"
    return f"{lb}{format_number(iv.lower, digits)}, {format_number(iv.upper, digits)}{rb}"


def format_p(p: Optional[float], p_digits: int) -> str:
    if p is None:
        return DASH
    floor = Decimal(1).scaleb(-p_digits)
    q = round_half_even(p, p_digits)
    if Decimal(repr(float(p))) < floor / 2 or q == 0:
        return f"p < {floor:f}"
    return f"p = {q:f}"


def p_significant(p: Optional[float], figures: int = 4) -> Optional[float]:
    return None if p is None else float(f"{p:.{figures}g}")


# -- text ----------------------------------------------------------------------------

def _level_label(level: float) -> str:
    return f"{round_half_even(level * 100, 6).normalize():f}%"


def _text_columns(t: ReportTable):
    lv = _level_label(t.level)
    if t.kind == "graph":
        header = ["Endpoint", t.estimate_header, f"Per-comparison {lv} CI; p",
                  f"Multiplicity-adjusted {lv} CI; p", "Status"]
        cells = lambda r: [
            "  " + r.label,
            format_number(r.estimate, t.digits),
            DASH if r.ci is None else f"{format_interval(r.ci, t.digits)}; {format_p(r.p, t.p_digits)}",
            DASH if r.adjusted_ci is None else
            f"{format_interval(r.adjusted_ci, t.digits)}; {format_p(r.adjusted_p, t.p_digits)}",
            r.status,
        ]
    else:
        header = ["Outcome / Estimator", f"{t.estimate_header} ({lv} CI)", "p-value", "Status"]
        cells = lambda r: [
            "  " + r.label,
            (format_interval(r.ci, t.digits) if r.estimate is None
             else f"{format_number(r.estimate, t.digits)} {format_interval(r.ci, t.digits)}"),
            DASH if r.p is None else format_p(r.p, t.p_digits),
            r.status,
        ]
    return header, cells


def _render_text_table(t: ReportTable) -> str:
    header, cells = _text_columns(t)
    body = []
    section = None
    for r in t.rows:
        if r.section != section:
            section = r.section
            if section:
                body.append([section])
        body.append(cells(r))
    widths = [len(h) for h in header]
    for line in body:
        if len(line) > 1:
            widths = [max(w, len(c)) for w, c in zip(widths, line)]
    fmt = lambda cols: "  ".join(c.ljust(w) for c, w in zip(cols, widths)).rstrip()
    out = []
    if t.title:
        out.append(t.title)
    out.append(fmt(header))
    out.append("  ".join("-" * w for w in widths))
    for line in body:
        out.append(line[0] if len(line) == 1 else fmt(line))
    if t.footnotes:
        out.append("")
        out += [f"Note: {n}" for n in t.footnotes]
    return "\n".join(out) + "\n"


# -- csv -----------------------------------------------------------------------------

CSV_COLUMNS = ["table", "section", "endpoint", "row", "label", "estimate",
               "ci_lower", "ci_upper", "ci_lower_open", "ci_upper_open", "p",
               "adjusted_lower", "adjusted_upper", "adjusted_lower_open", "adjusted_upper_open",
               "adjusted_p", "status"]


def _csv_interval(iv: Optional[Interval], digits: int) -> list:
    if iv is None:
        return ["", "", "", ""]
    return [format_number(iv.lower, digits, False), format_number(iv.upper, digits, False),
            str(iv.lower_open).lower(), str(iv.upper_open).lower()]


def _csv_p(p):
    return "" if p is None else repr(p_significant(p))


def _render_csv(tables: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for i, t in enumerate(tables, 1):
        for r in t.rows:
            w.writerow([i, r.section, r.endpoint, r.kind, r.label, format_number(r.estimate, t.digits, False),
                        *_csv_interval(r.ci, t.digits), _csv_p(r.p),
                        *_csv_interval(r.adjusted_ci, t.digits), _csv_p(r.adjusted_p), r.status])
    return buf.getvalue()


# -- json ----------------------------------------------------------------------------

def _json_num(x: Optional[float], digits: int):
    if x is None:
        return None
    if math.isinf(x):
        return "+inf" if x > 0 else "-inf"
    return float(round_half_even(x, digits))


def _json_interval(iv: Optional[Interval], digits: int):
    if iv is None:
        return None
    return {"lower": _json_num(iv.lower, digits), "upper": _json_num(iv.upper, digits),
            "lower_open": iv.lower_open, "upper_open": iv.upper_open}


def table_to_dict(t: ReportTable) -> dict:
    return {
        "title": t.title, "kind": t.kind, "estimate_header": t.estimate_header, "level": t.level,
        "digits": t.digits, "p_digits": t.p_digits,
        "rows": [{
            "section": r.section, "endpoint": r.endpoint, "label": r.label, "kind": r.kind,
            "estimate": _json_num(r.estimate, t.digits),
            "ci": _json_interval(r.ci, t.digits), "p": p_significant(r.p),
            "adjusted_ci": _json_interval(r.adjusted_ci, t.digits), "adjusted_p": p_significant(r.adjusted_p),
            "status": r.status,
        } for r in t.rows],
        "footnotes": list(t.footnotes),
    }


def _from_num(v):
    if v is None:
        return None
    return {"-inf": -math.inf, "+inf": math.inf}.get(v, v) if isinstance(v, str) else float(v)


def _from_interval(d):
    if d is None:
        return None
    return Interval(_from_num(d["lower"]), _from_num(d["upper"]), d["lower_open"], d["upper_open"])


def tables_from_json(text: str) -> list:
    """Parse and validate a JSON report back into :class:`ReportTable` objects."""
    doc = json.loads(text)
    jsonschema.validate(doc, REPORT_SCHEMA)
    out = []
    for t in doc["tables"]:
        rows = tuple(ReportRow(r["section"], r["endpoint"], r["label"], r["kind"], _from_num(r["estimate"]),
                               _from_interval(r["ci"]), r["p"], _from_interval(r["adjusted_ci"]),
                               r["adjusted_p"], r["status"]) for r in t["rows"])
        out.append(ReportTable(t["title"], t["kind"], t["estimate_header"], rows, tuple(t["footnotes"]),
                               t["level"], t["digits"], t["p_digits"]))
    return out


def _render_json(tables: list) -> str:
    doc = {"schema": "trialinfer.report", "schema_version": REPORT_SCHEMA_VERSION,
           "tables": [table_to_dict(t) for t in tables]}
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


# -- entry point ---------------------------------------------------------------------

def render(report: Tables, fmt: str = "text", digits: Optional[int] = None,
           p_digits: Optional[int] = None) -> bytes:
    """Render one table or a sequence of tables as UTF-8 bytes.

    ``digits`` and ``p_digits`` override the rounding stored on each table.
    """
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}; expected one of {', '.join(FORMATS)}")
    tables = [report] if isinstance(report, ReportTable) else list(report)
    if digits is not None:
        tables = [replace(t, digits=digits) for t in tables]
    if p_digits is not None:
        tables = [replace(t, p_digits=p_digits) for t in tables]
    if fmt == "text":
        text = "\n".join(_render_text_table(t) for t in tables)
    elif fmt == "csv":
        text = _render_csv(tables)
    else:
        text = _render_json(tables)
    return text.encode("utf-8")
