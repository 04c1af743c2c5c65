from .config import ExperimentConfig, parse_config
from .report import emit_report
from .runner import MetricsRecord, run_experiment

__all__ = ["ExperimentConfig", "parse_config", "emit_report", "MetricsRecord", "run_experiment"]
