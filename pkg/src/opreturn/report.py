"""CSV exports and the per-protocol text table."""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Sequence

from .classify import ProtocolRegistry, format_identifier
from .records import Category
from .stats import (
    ProtocolStats,
    SizeHistogram,
    TimeSeries,
    format_decimal,
)

CATEGORIES_CSV = "Categories.csv"
PEAKS_CSV = "Peaks.csv"
LENGTH_CSV = "LengthByTime.csv"
SIZE_CSV = "SizeDistribution.csv"
TABLE_CSV = "ProtocolTable.csv"

_DISPLAY = {
    Category.ASSETS: "Assets",
    Category.DOCUMENT_NOTARY: "Document Notary",
    Category.DIGITAL_ARTS: "Digital Arts",
    Category.OTHER: "Other",
    Category.EMPTY: "Empty",
    Category.UNKNOWN: "Unknown",
}


def _write(path: Path, header: Sequence[str], rows) -> int:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    n = 0
    for row in rows:
        w.writerow(row)
        n += 1
    path.write_text(buf.getvalue(), encoding="utf-8")
    return n


def write_categories_csv(path, series: TimeSeries) -> int:
    cols = [c.value for c in (Category.ASSETS, Category.DOCUMENT_NOTARY,
                              Category.DIGITAL_ARTS, Category.OTHER)]
    return _write(Path(path), ["week", "assets", "notary", "arts", "other"],
                  ([d.isoformat(), *(v[c] for c in cols)] for d, v in series.points))


def write_peaks_csv(path, series: TimeSeries) -> int:
    return _write(Path(path), ["week", "empty", "unknown", "all"],
                  ([d.isoformat(), v["Empty"], v["Unknown"], v["All"]] for d, v in series.points))


def write_length_csv(path, series: TimeSeries) -> int:
    return _write(Path(path), ["week", "avg_bytes"],
                  ([d.isoformat(), format_decimal(v["avg"], 4)] for d, v in series.points))


def write_size_csv(path, hist: SizeHistogram) -> int:
    return _write(Path(path), ["length", "count"], sorted(hist.bins.items()))


def write_label_series_csv(path, series: TimeSeries) -> int:
    return _write(Path(path), ["week", *series.groups],
                  ([d.isoformat(), *(v[g] for g in series.groups)] for d, v in series.points))


def _row_cells(row: ProtocolStats, registry: ProtocolRegistry | None):
    category = _DISPLAY[row.category] if row.category else "TOTAL"
    if row.kind == "protocol":
        protocol = row.label
        idents = ""
        if registry is not None:
            entry = next((e for e in registry.entries if e.name == row.label), None)
            if entry is not None:
                idents = ", ".join(format_identifier(i) for i in entry.identifiers)
    else:
        protocol, idents = ("Total" if row.kind == "category" else "-"), "-"
    first = row.first_tx_date.strftime("%Y/%m/%d") if row.first_tx_date else "-"
    return [category, protocol, idents, first, row.tx_count,
            row.total_metadata_bytes, format_decimal(row.avg_metadata_bytes, 1)]


TABLE_HEADER = ["Category", "Protocol", "Identifiers", "First trans.",
                "Tot. trans.", "Tot. Size", "Avg. Size"]


def write_table_csv(path, rows: Sequence[ProtocolStats], registry=None) -> int:
    return _write(Path(path), TABLE_HEADER, (_row_cells(r, registry) for r in rows))


def render_table(rows: Sequence[ProtocolStats], registry=None) -> str:
    cells = [TABLE_HEADER] + [[str(c) for c in _row_cells(r, registry)] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(TABLE_HEADER))]
    numeric = {4, 5, 6}
    lines = []
    for n, row in enumerate(cells):
        lines.append("  ".join(c.rjust(w) if i in numeric else c.ljust(w)
                               for i, (c, w) in enumerate(zip(row, widths))).rstrip())
        if n == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"
