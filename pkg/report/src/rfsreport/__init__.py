"""Batch figure generation for tracking/fusion experiment CSVs."""

from .figures import (
    AGGREGATE_COLUMNS,
    FIGURES,
    PER_STEP_COLUMNS,
    ReportResult,
    ReportSpec,
    SchemaError,
    render_report,
    write_summary,
)

__version__ = "0.1.0"
