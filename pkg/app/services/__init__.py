"""Services du laboratoire Toeplitz."""

from app.services.experiment_runner import ExperimentRunner, run_experiment
from app.services.report_writer import emit_report

__all__ = [
    "ExperimentRunner",
    "run_experiment",
    "emit_report",
]
