"""Curriculum hardship: prerequisite graph inference and hardship indices from academic event logs."""

__version__ = "0.1.0"

from .config import PipelineConfig, load_config  # noqa: E402
from .pipeline import analyze  # noqa: E402

__all__ = ["PipelineConfig", "analyze", "load_config", "__version__"]
