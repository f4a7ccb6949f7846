"""CSV / JSON / aligned-text emission of report rows."""

from __future__ import annotations

import csv
import io
import json
from typing import Optional, Sequence

FORMATS = ("csv", "json", "table")
# columns of the aligned text table for integration rows
TABLE_COLUMNS = ("method", "n", "rho", "rel_err", "time_s")


def render(rows: Sequence[dict], fmt: str = "csv", footer: Optional[dict] = None,
           columns: Optional[Sequence[str]] = None) -> str:
    if not rows:
        raise ValueError("nothing to emit: no rows")
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}; choose from {FORMATS}")
    fields = list(columns or rows[0].keys())
    if fmt == "json":
        payload = {"rows": [{k: r.get(k, "") for k in fields} for r in rows]}
        if footer:
            payload.update(footer)
        return json.dumps(payload, indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n", extrasaction="ignore")
        writer.writeheader()
        writer.writerows(rows)
        for key, value in (footer or {}).items():
            buf.write(f"{key},{value}\n")
        return buf.getvalue()
    shown = [c for c in TABLE_COLUMNS if c in fields] if "method" in fields else fields
    cells = [shown] + [[_short(r.get(c, "")) for c in shown] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(shown))]
    lines = ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    for key, value in (footer or {}).items():
        lines.append(f"{key}: {value}")
    return "\n".join(lines) + "\n"


def _short(value) -> str:
    text = str(value)
    try:
        number = float(text)
    except ValueError:
        return text
    if text.lstrip("-").isdigit():
        return text
    return f"{number:.4g}"


def emit_table(rows: Sequence[dict], fmt: str = "csv", path=None,
               footer: Optional[dict] = None, columns: Optional[Sequence[str]] = None) -> str:
    """Render ``rows`` and write them to ``path`` (if given); returns the text."""
    text = render(rows, fmt, footer, columns)
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text
