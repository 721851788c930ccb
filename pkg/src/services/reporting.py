"""
Reports and persisted sweep outputs.

Renders RunRecords or RankSummaries as a plain-text table, CSV or JSON. All
output is ordered by (J, B, M) and method precedence so identical inputs give
identical bytes.

CSV columns:
- records: J,B,M,method,tvd,rank,nversion_selected (one row per candidate per run)
- summary: method,rank,count,M (the "nversion" method holds the N-version pick's ranks)
"""
import csv
import io
import logging
from enum import Enum
from pathlib import Path

import fnc
from pydantic import TypeAdapter

from src.services.harness import NVERSION, RankSummary, RunRecord, method_order
from src.services.select import NVReport, PerBinSelection

logger = logging.getLogger(__name__)

RECORD_COLUMNS = ["J", "B", "M", "method", "tvd", "rank", "nversion_selected"]
SUMMARY_COLUMNS = ["method", "rank", "count", "M"]

_records_adapter = TypeAdapter(list[RunRecord])
_summaries_adapter = TypeAdapter(list[RankSummary])


class ReportFormat(str, Enum):
    TABLE = "table"
    CSV = "csv"
    JSON = "json"


def ordinal(n: int) -> str:
    if 10 <= n % 100 <= 20:
        return f"{n}th"
    suffix = {1: "st", 2: "nd", 3: "rd"}.get(n % 10, "th")
    return f"{n}{suffix}"


# =============================================================================
# Rows
# =============================================================================

def record_rows(records: list[RunRecord]) -> list[dict]:
    rows = []
    for record in fnc.sortby(lambda r: r.key, records):
        for candidate in sorted(record.candidates, key=lambda c: method_order(c.name)):
            rows.append({
                "J": record.J,
                "B": record.B,
                "M": record.M,
                "method": candidate.name,
                "tvd": f"{candidate.tvd:.17g}",
                "rank": candidate.rank,
                "nversion_selected": int(candidate.name == record.nversion.selected_name),
            })
    return rows


def summary_rows(summaries: list[RankSummary]) -> list[dict]:
    rows = []
    for summary in fnc.sortby(lambda s: s.M, summaries):
        places = dict(sorted(summary.places.items(), key=lambda kv: method_order(kv[0])))
        places[NVERSION] = summary.nversion_places
        for method, counts in places.items():
            for rank, count in enumerate(counts, start=1):
                rows.append({"method": method, "rank": rank, "count": count, "M": summary.M})
    return rows


def _csv(rows: list[dict], columns: list[str]) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buffer.getvalue()


# =============================================================================
# Tables
# =============================================================================

def format_table(header: list[str], body: list[list[str]]) -> str:
    widths = [max(len(row[i]) for row in [header, *body]) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(header, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in body]
    return "\n".join(lines)


def _summary_table(summaries: list[RankSummary]) -> str:
    blocks = []
    for summary in fnc.sortby(lambda s: s.M, summaries):
        n_places = len(summary.nversion_places)
        header = ["method"] + [f"No. of {ordinal(i)} places" for i in range(1, n_places + 1)]
        body = [
            [method] + [str(c) for c in counts]
            for method, counts in sorted(summary.places.items(), key=lambda kv: method_order(kv[0]))
        ]
        body.append([f"{NVERSION} pick"] + [str(c) for c in summary.nversion_places])
        blocks.append(f"M={summary.M} ({summary.runs} runs)\n" + format_table(header, body))
    return "\n\n".join(blocks) + "\n"


def _records_table(records: list[RunRecord]) -> str:
    body = [
        [f"{row['J']:g}", f"{row['B']:g}", str(row["M"]), row["method"],
         f"{float(row['tvd']):.6f}", str(row["rank"]), "*" if row["nversion_selected"] else ""]
        for row in record_rows(records)
    ]
    return format_table(["J", "B", "M", "method", "tvd", "rank", "nversion"], body) + "\n"


def nversion_table(nv: NVReport) -> str:
    """Pairwise TVD matrix with row sums; the pick and the outlier are marked."""
    names = [c.name for c in nv.candidates]
    body = []
    for i, name in enumerate(names):
        mark = "selected" if i == nv.selected_index else "outlier" if i == nv.outlier_index else ""
        body.append([name] + [f"{d:.6f}" for d in nv.tvd_matrix[i]] + [f"{nv.row_sums[i]:.6f}", mark])
    return format_table(["candidate", *names, "sum", ""], body) + "\n"


def consistency_table(selection: PerBinSelection) -> str:
    """Chosen strategy, subset variances and mitigated value per bitstring."""
    kinds = [s.kind for s in next(iter(selection.reports.values())).strategies] if selection.reports else []
    body = []
    for z in sorted(selection.chosen):
        row = [z, selection.chosen[z]]
        report_z = selection.reports.get(z)
        for kind in kinds:
            entry = report_z.for_kind(kind) if report_z else None
            row.append("-" if entry is None or not entry.applicable else f"{entry.variance:.3e}")
        row.append(f"{selection.distribution.get(z):.6f}")
        body.append(row)
    return format_table(["bitstring", "chosen", *[f"var[{k.value}]" for k in kinds], "value"], body) + "\n"


# =============================================================================
# Report
# =============================================================================

def report(data: list[RunRecord] | list[RankSummary], fmt: ReportFormat | str = ReportFormat.TABLE) -> str:
    """
    Render records or summaries.

    Raises:
        ValueError: On empty input or mixed record/summary lists
    """
    if not data:
        raise ValueError("Nothing to report: input is empty")
    fmt = ReportFormat(fmt)

    if all(isinstance(d, RunRecord) for d in data):
        records = fnc.sortby(lambda r: r.key, data)
        if fmt is ReportFormat.JSON:
            return _records_adapter.dump_json(records, indent=2).decode() + "\n"
        if fmt is ReportFormat.CSV:
            return _csv(record_rows(records), RECORD_COLUMNS)
        return _records_table(records)

    if all(isinstance(d, RankSummary) for d in data):
        summaries = fnc.sortby(lambda s: s.M, data)
        if fmt is ReportFormat.JSON:
            return _summaries_adapter.dump_json(summaries, indent=2).decode() + "\n"
        if fmt is ReportFormat.CSV:
            return _csv(summary_rows(summaries), SUMMARY_COLUMNS)
        return _summary_table(summaries)

    raise ValueError("Report input must be all RunRecords or all RankSummaries")


def load_records(text: str) -> list[RunRecord]:
    return _records_adapter.validate_json(text)


def load_summaries(text: str) -> list[RankSummary]:
    return _summaries_adapter.validate_json(text)


def write_results(records: list[RunRecord], summaries: list[RankSummary], out_dir: str | Path) -> dict[str, Path]:
    """
    Persist a sweep as records.json, records.csv, summary.json and summary.csv.

    Returns:
        Mapping of artifact name to written path
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    artifacts = {
        "records.json": report(records, ReportFormat.JSON),
        "records.csv": report(records, ReportFormat.CSV),
        "summary.json": report(summaries, ReportFormat.JSON),
        "summary.csv": report(summaries, ReportFormat.CSV),
    }
    paths = {}
    for name, text in artifacts.items():
        path = out / name
        path.write_text(text, encoding="utf-8")
        paths[name] = path
    logger.info("Wrote %d result files to %s", len(paths), out)
    return paths
