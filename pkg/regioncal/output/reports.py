"""Rendering of evaluation reports, as JSON or as aligned plain-text tables."""
from __future__ import annotations

from typing import Iterable, Sequence

import orjson

__all__ = [
    "render_json",
    "render_table",
    "render_report_text",
    "render_comparison",
    "render_frequencies",
]


def render_json(data: dict) -> bytes:
    """Render a report as indented JSON. The key order is kept, so output is stable."""
    return orjson.dumps(data, option=orjson.OPT_INDENT_2 | orjson.OPT_SERIALIZE_NUMPY) + b"\n"


def _format_value(value) -> str:
    if value is None:
        return "-"
    elif isinstance(value, float):
        return f"{value:.4f}"
    else:
        return str(value)


def render_table(headers: Sequence[str], rows: Iterable[Sequence]) -> str:
    """Render rows as a table; the first column is left-aligned, the others right-aligned."""
    cells = [list(headers)] + [[_format_value(value) for value in row] for row in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(headers))]

    lines = []
    for index, row in enumerate(cells):
        line = "  ".join(
            value.ljust(width) if i == 0 else value.rjust(width)
            for i, (value, width) in enumerate(zip(row, widths))
        )
        lines.append(line.rstrip())
        if index == 0:
            lines.append("  ".join("-" * width for width in widths))
    return "\n".join(lines) + "\n"


def render_report_text(report: dict) -> str:
    """Render the ``as_dict()`` output of an evaluation report."""
    if report["kind"] == "full":
        table = render_table(
            ["class", "pixels", "accuracy"],
            [(c["class_id"], c["pixels"], c["accuracy"]) for c in report["classes"]],
        )
        summary = (
            f"class-average accuracy: {report['class_average_accuracy']:.4f}\n"
            f"global accuracy:        {report['global_accuracy']:.4f}\n"
        )
    else:
        table = render_table(
            ["class", "precision", "recall", "tp", "fp", "fn"],
            [
                (
                    c["class_id"],
                    c["precision"],
                    c["recall"],
                    c["true_positives"],
                    c["false_positives"],
                    c["false_negatives"],
                )
                for c in report["classes"]
            ],
        )
        summary = f"hamming loss: {report['hamming_loss']:.4f}\n"
    return table + "\n" + summary


COMPARISON_HEADERS = {
    "full": ["method", "class-average", "global"],
    "weak": ["method", "hamming loss", "mean precision", "mean recall"],
}


def render_comparison(rows: Sequence[Sequence], kind: str = "full") -> str:
    """Render the rows of a comparison, one row per calibration method."""
    return render_table(COMPARISON_HEADERS[kind], rows)


def render_frequencies(pixels: Sequence[int], expected: Sequence[float]) -> str:
    total = sum(pixels) or 1
    return render_table(
        ["class", "pixels", "share", "expected"],
        [
            (class_id, count, count / total, float(share))
            for class_id, (count, share) in enumerate(zip(pixels, expected))
        ],
    )
