from .config import ExperimentConfig, learner_grid, load_config
from .experiment import CellResult, ExperimentReport, FoldResult, model_select, run_experiment
from .reports import emit_reports

__all__ = [
    "CellResult",
    "ExperimentConfig",
    "ExperimentReport",
    "FoldResult",
    "emit_reports",
    "learner_grid",
    "load_config",
    "model_select",
    "run_experiment",
]
