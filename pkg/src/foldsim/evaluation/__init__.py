from ..manifest import DatasetManifest, load_manifest
from .metrics import Aggregate, MatchResult, aggregate, binary_iou, format_cell, match_instances, pairwise_iou
from .overlay import render_overlay
from .report import MetricReport, Table, improvement, load_reports, recorded_results, write_report

__all__ = [
    "DatasetManifest", "load_manifest", "Aggregate", "MatchResult", "aggregate", "binary_iou", "format_cell",
    "match_instances", "pairwise_iou", "render_overlay", "MetricReport", "Table", "improvement",
    "load_reports", "recorded_results", "write_report",
]
