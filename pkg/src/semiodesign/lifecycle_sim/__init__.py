"""Simulation of expectation agents monitoring products over their life cycle."""

from .agents import (
    ExpectationAgent,
    Violation,
    detect_distinction,
    detect_violations,
    is_environmental,
    preprocess_filter,
    violation_is_genuine,
)
from .clustering import Clustering, cluster_agents, group_families, purity
from .engine import ClusteredScenario, adjust_configuration, clustered_scenario, run
from .scenario import (
    AgentSpec,
    EnvironmentalExpectation,
    EnvironmentProfile,
    ExpectationUpdate,
    FunctionalExpectation,
    ProductSpec,
    Scenario,
    validate_scenario,
)
from .trace import (
    NOT_SUCCESSFUL,
    SUCCESSFUL,
    SimTrace,
    buffering_report,
    dumps_jsonl,
    interaction_trend,
    loads_jsonl,
    ols_slope,
    read_jsonl,
    series_trend,
    write_jsonl,
    write_summary,
)

__all__ = [
    "AgentSpec", "ClusteredScenario", "Clustering", "EnvironmentProfile", "EnvironmentalExpectation",
    "ExpectationAgent", "ExpectationUpdate", "FunctionalExpectation", "NOT_SUCCESSFUL",
    "ProductSpec", "SUCCESSFUL", "Scenario", "SimTrace", "Violation", "adjust_configuration",
    "buffering_report", "cluster_agents", "clustered_scenario", "detect_distinction",
    "detect_violations", "dumps_jsonl", "group_families", "interaction_trend", "is_environmental",
    "loads_jsonl", "ols_slope", "preprocess_filter", "purity", "read_jsonl", "run", "series_trend",
    "validate_scenario", "violation_is_genuine", "write_jsonl", "write_summary",
]
