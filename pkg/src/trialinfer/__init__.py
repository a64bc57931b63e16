"""Multiplicity-adjusted and group-sequential inference for clinical trial reporting."""

from .graph_mcp import (
    MCPGraph,
    adjusted_p_values,
    sequentially_rejective_test,
    simultaneous_bounds,
    two_sided_inference,
)
from .gsd import GroupSequentialDesign, SpendingFunction, compute_boundaries, crossing_probabilities, make_design
from .gsd_inference import (
    conditional_adjusted_estimate,
    median_unbiased_estimate,
    observe,
    repeated_ci,
    repeated_p_value,
    stagewise_ci,
    stagewise_p_value,
    whitehead_adjusted_estimate,
)
from .mc_engine import RngConfig
from .normal_core import EndpointScale, SummaryStat, events_to_information

__version__ = "0.1.0"

__all__ = [
    "MCPGraph", "adjusted_p_values", "sequentially_rejective_test", "simultaneous_bounds", "two_sided_inference",
    "GroupSequentialDesign", "SpendingFunction", "compute_boundaries", "crossing_probabilities", "make_design",
    "conditional_adjusted_estimate", "median_unbiased_estimate", "observe", "repeated_ci", "repeated_p_value",
    "stagewise_ci", "stagewise_p_value", "whitehead_adjusted_estimate", "RngConfig", "EndpointScale",
    "SummaryStat", "events_to_information",
]
