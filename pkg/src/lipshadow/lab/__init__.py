from .config import ExperimentConfig, load_config, dump_config
from .runner import RunManifest, run, evaluate

__all__ = ["ExperimentConfig", "load_config", "dump_config", "RunManifest", "run", "evaluate"]
