from .config import ExperimentConfig, load_config, with_overrides
from .run import EvalReport, bench, evaluate, load_agent, report_emit, train

__all__ = ["EvalReport", "ExperimentConfig", "bench", "evaluate", "load_agent", "load_config", "report_emit",
           "train", "with_overrides"]
