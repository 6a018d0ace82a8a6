"""Pathway-level meta-analysis of gene expression studies."""
from .config import PipelineConfig, RunConfig
from .coordinator import AnalysisResult, GsemaCoordinator
from .errors import GsemaError

__version__ = "0.1.0"

__all__ = ["AnalysisResult", "GsemaCoordinator", "GsemaError", "PipelineConfig", "RunConfig", "__version__"]
