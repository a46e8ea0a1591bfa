"""Metrics, significance tests and comparison reports."""
from .compare import COMBO_ORDER, METRICS, Comparison, combo_sort_key, compare_combos
from .metrics import ConfusionCounts, EvalRow, auc, confusion, metrics, midranks, scores
from .plots import box_chart, line_chart
from .report import (
    comparison_markdown,
    read_results_csv,
    write_comparison_md,
    write_plots,
    write_results_csv,
    write_significance_json,
)
from .stats import StatTestResult, correlation, wilcoxon_signed_rank

__all__ = [
    "COMBO_ORDER", "METRICS", "Comparison", "ConfusionCounts", "EvalRow", "StatTestResult",
    "auc", "box_chart", "combo_sort_key", "compare_combos", "comparison_markdown", "confusion",
    "correlation", "line_chart", "metrics", "midranks", "read_results_csv", "scores",
    "wilcoxon_signed_rank", "write_comparison_md", "write_plots", "write_results_csv",
    "write_significance_json",
]
