"""Scenario files, the five experiment pipelines, run reports and the CLI."""
from .report import OUTPUT_ENV, RunReport, csv_table, output_root, parse_table
from .runs import (
    run,
    run_cross_hbt,
    run_efficiency_sweep,
    run_hbt,
    run_lifetime,
    run_michelson,
    source_stream,
)
from .scenario import KINDS, Scenario, ScenarioError, block_seed, load_scenario, scenario_from_dict

__all__ = [
    "KINDS",
    "OUTPUT_ENV",
    "RunReport",
    "Scenario",
    "ScenarioError",
    "block_seed",
    "csv_table",
    "load_scenario",
    "output_root",
    "parse_table",
    "run",
    "run_cross_hbt",
    "run_efficiency_sweep",
    "run_hbt",
    "run_lifetime",
    "run_michelson",
    "scenario_from_dict",
    "source_stream",
]
