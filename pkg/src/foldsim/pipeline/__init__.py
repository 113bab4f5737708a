from .config import STAGES, ConfigError, ExperimentConfig, load_config, validate_inputs
from .figures import FigureError, emit_figures
from .ledger import RunLedger
from .run import ENV_OUTPUT_ROOT, ENV_THREADS, LEDGER_NAME, StageError, output_root, run_pipeline

__all__ = [
    "STAGES", "ConfigError", "ExperimentConfig", "load_config", "validate_inputs",
    "FigureError", "emit_figures", "RunLedger",
    "ENV_OUTPUT_ROOT", "ENV_THREADS", "LEDGER_NAME", "StageError", "output_root", "run_pipeline",
]
