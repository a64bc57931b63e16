"""Trial specifications, report orchestration, rendering and fixtures."""

from .bundled import FIXTURES, load_fixture, render_fixture, verify
from .render import REPORT_SCHEMA, render, tables_from_json
from .report import (
    CONFIRMATORY,
    DESCRIPTIVE,
    NOT_YET_DECIDED,
    GateCycleError,
    GateStatus,
    Interval,
    ReportRow,
    ReportTable,
    apply_gating,
    run_graph_report,
    run_gsd_report,
    run_report,
    simulation_config,
)
from .spec import SPEC_SCHEMA, SpecParseError, SpecValidationError, TrialSpec, load_spec, loads_spec, parse_spec

__all__ = [
    "FIXTURES", "load_fixture", "render_fixture", "verify", "REPORT_SCHEMA", "render", "tables_from_json",
    "CONFIRMATORY", "DESCRIPTIVE", "NOT_YET_DECIDED", "GateCycleError", "GateStatus", "Interval",
    "ReportRow", "ReportTable", "apply_gating", "run_graph_report", "run_gsd_report", "run_report",
    "simulation_config", "SPEC_SCHEMA", "SpecParseError", "SpecValidationError", "TrialSpec",
    "load_spec", "loads_spec", "parse_spec",
]
