"""Scenario files, closed-loop simulation, trade-off study and output."""

from .config import ScenarioConfig, from_dict, load_scenario, parse_scenario, save_scenario
from .output import emit_csv, emit_svg_plot, log_digest, log_to_csv
from .simulate import SimulationAborted, TrajectoryLog, run_scenario
from .tradeoff import TradeoffReport, TradeoffRow, resample_config, run_tradeoff
from .world import World, build_world

__all__ = [
    "ScenarioConfig",
    "SimulationAborted",
    "TradeoffReport",
    "TradeoffRow",
    "TrajectoryLog",
    "World",
    "build_world",
    "emit_csv",
    "emit_svg_plot",
    "from_dict",
    "load_scenario",
    "log_digest",
    "log_to_csv",
    "parse_scenario",
    "resample_config",
    "run_scenario",
    "run_tradeoff",
    "save_scenario",
]
