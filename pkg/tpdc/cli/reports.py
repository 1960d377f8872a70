"""
Report rendering: aligned text tables, CSV and JSON.

Tables print 11 significant digits; CSV and JSON carry the full working
precision.  Numbers are always in scientific notation with an explicit
exponent, so identical runs give byte-identical output.
"""

import csv
import io
import json
from dataclasses import dataclass, field

import mpmath

from tpdc.core.specfun import to_decimal

TABLE_DIGITS = 11


@dataclass
class Report:
    title: str
    columns: list
    rows: list = field(default_factory=list)
    digits: int = 34
    notes: list = field(default_factory=list)

    def add(self, *values):
        if len(values) != len(self.columns):
            raise ValueError(f"row has {len(values)} values for {len(self.columns)} columns")
        self.rows.append(list(values))


def _cell(value, digits: int) -> str:
    if value is None:
        return "--"
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, mpmath.mpf):
        return to_decimal(value, digits)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_table(report: Report) -> str:
    cells = [[_cell(v, TABLE_DIGITS) for v in row] for row in report.rows]
    widths = [max([len(c)] + [len(r[i]) for r in cells]) for i, c in enumerate(report.columns)]
    out = [report.title, ""]
    out.append("  ".join(c.ljust(w) for c, w in zip(report.columns, widths)).rstrip())
    out.append("  ".join("-" * w for w in widths))
    for row in cells:
        out.append("  ".join(v.rjust(w) for v, w in zip(row, widths)).rstrip())
    for note in report.notes:
        out.append(note)
    return "\n".join(out) + "\n"


def render_csv(report: Report) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(report.columns)
    for row in report.rows:
        writer.writerow(["" if v is None else _cell(v, report.digits) for v in row])
    return buf.getvalue()


def render_json(report: Report) -> str:
    rows = [{c: (None if v is None else _cell(v, report.digits)) for c, v in zip(report.columns, row)}
            for row in report.rows]
    payload = {"title": report.title, "columns": report.columns, "rows": rows}
    if report.notes:
        payload["notes"] = report.notes
    return json.dumps(payload, indent=2) + "\n"


RENDERERS = {"table": render_table, "csv": render_csv, "json": render_json}


def render(report: Report, fmt: str) -> str:
    return RENDERERS[fmt](report)


def render_many(reports: list, fmt: str) -> str:
    """Several reports in one stream: tables blank-line separated, JSON as a list."""
    if fmt == "json":
        return json.dumps([json.loads(render_json(r)) for r in reports], indent=2) + "\n"
    return "\n".join(render(r, fmt) for r in reports)
