"""Run reports: canonical JSON, flat CSV and a markdown summary."""

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .checks import CheckResult
from .errors import ArgumentError
from .formats import _atomic_write

SCHEMA_VERSION = "1"

CSV_FIELDS = (
    "index",
    "measure_id",
    "property",
    "verdict",
    "lhs",
    "rhs",
    "residual",
    "tol",
    "seed",
    "instance_digest",
    "reason",
)


def cell_key(r: CheckResult) -> str:
    """`measure/property`, with `/d<d>` appended when the sweep recorded the local dimension."""
    key = f"{r.measure_id}/{r.property}"
    if "d" in r.details:
        key += f"/d{r.details['d']}"
    return key


def summarize(results: list[CheckResult]) -> dict[str, dict[str, int]]:
    """
    Verdict counts per cell, keyed by `cell_key`.

    Sweep results carry their local dimension, so each dimension gets its
    own cell; results built outside a sweep fall into `measure/property`.
    """
    cells: dict[str, dict[str, int]] = {}
    for r in results:
        counts = cells.setdefault(cell_key(r), {"holds": 0, "violated": 0, "inconclusive": 0})
        counts[r.verdict] += 1
    return dict(sorted(cells.items()))


@dataclass
class Report:
    """Everything one run produced, in the order it is serialized."""

    config_echo: dict
    results: list[CheckResult] = field(default_factory=list)
    wall_ms: int = 0
    search: dict | None = None
    regularization: list[dict] | None = None
    schema_version: str = SCHEMA_VERSION

    @property
    def summaries(self) -> dict[str, dict[str, int]]:
        return summarize(self.results)

    def to_dict(self) -> dict:
        data = {
            "schema_version": self.schema_version,
            "config_echo": self.config_echo,
            "results": [r.to_dict() for r in self.results],
            "summaries": self.summaries,
            "wall_ms": self.wall_ms,
        }
        if self.search is not None:
            data["search"] = self.search
        if self.regularization is not None:
            data["regularization"] = self.regularization
        return data


def _json_default(value):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.bool_,)):
        return bool(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def to_json(report: Report) -> str:
    """Canonical JSON: sorted keys, two-space indent, shortest round-trip floats."""
    return json.dumps(report.to_dict(), indent=2, sort_keys=True, default=_json_default) + "\n"


def to_csv(report: Report) -> str:
    """One row per CheckResult, instances left out."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for r in report.results:
        writer.writerow([
            r.index,
            r.measure_id,
            r.property,
            r.verdict,
            repr(r.lhs),
            repr(r.rhs),
            repr(r.residual),
            repr(r.tol),
            r.seed,
            r.instance_digest,
            r.details.get("reason", ""),
        ])
    return buf.getvalue()


def render(report: Report, fmt: str = "json") -> str:
    if fmt == "json":
        return to_json(report)
    if fmt == "csv":
        return to_csv(report)
    raise ArgumentError(f"Unknown format: {fmt}")


def write_report(report: Report, path: str, fmt: str = "json") -> None:
    """Write the rendered report atomically."""
    _atomic_write(path, render(report, fmt))


def render_markdown_summary(report: Report) -> str:
    """
    Markdown tables of verdict counts, search and regularization results.

    Args:
        report: Finished run report

    Returns:
        Markdown-formatted summary string
    """
    lines = ["# flagcheck report", ""]
    lines.append("## Summary")
    lines.append("")
    lines.append(f"- **Command**: `{report.config_echo.get('command', '')}`")
    lines.append(f"- **Seed**: {report.config_echo.get('master_seed', 0)}")
    lines.append(f"- **Results**: {len(report.results)}")
    if report.wall_ms:
        lines.append(f"- **Wall time**: {report.wall_ms}ms")
    lines.append("")

    if report.results:
        lines.append("## Verdicts")
        lines.append("")
        lines.append("| Measure | Property | Holds | Violated | Inconclusive | Max violation |")
        lines.append("|---------|----------|-------|----------|--------------|---------------|")
        worst: dict[str, float] = {}
        for r in report.results:
            key = cell_key(r)
            worst[key] = max(worst.get(key, -np.inf), r.violation)
        for key, counts in report.summaries.items():
            measure, prop, *dim = key.split("/")
            if dim:
                prop = f"{prop} {dim[0]}"
            lines.append(
                f"| `{measure}` | {prop} | {counts['holds']} | {counts['violated']} "
                f"| {counts['inconclusive']} | {worst[key]:.3e} |"
            )
        lines.append("")

    if report.search is not None:
        s = report.search
        lines.append("## Search")
        lines.append("")
        lines.append(f"- **Measure**: `{s['measure_id']}`, property {s['property']}")
        lines.append(f"- **Best violation**: {s['best_violation']:.6e} ({s.get('verdict')})")
        lines.append(f"- **Evaluations**: {s['evaluations']} over {s.get('restarts', 0)} restarts")
        lines.append("")

    if report.regularization:
        lines.append("## Regularization")
        lines.append("")
        lines.append("| # | Measure | N | M(ρ^⊗N) | Per copy | Trend |")
        lines.append("|---|---------|---|---------|----------|-------|")
        for table in report.regularization:
            for row in table["rows"]:
                lines.append(
                    f"| {table['index']} | `{table['measure_id']}` | {row['N']} "
                    f"| {row['value']:.9g} | {row['per_copy']:.9g} | {table['trend']} |"
                )
        lines.append("")

    return "\n".join(lines)
