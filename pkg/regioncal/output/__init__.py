"""Writing files and reports."""

from .jsonl import JsonLinesWriter, write_jsonl
from .reports import render_comparison, render_json, render_report_text, render_table

__all__ = [
    "JsonLinesWriter",
    "render_comparison",
    "render_json",
    "render_report_text",
    "render_table",
    "write_jsonl",
]
