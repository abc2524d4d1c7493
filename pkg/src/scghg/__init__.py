"""U.S.-specific social cost of greenhouse gases under alternative
macroeconomic damage functions, nonmarket damages and climate feedbacks."""

__version__ = "0.1.0"

from .config import RunConfig, parse_config  # noqa: E402
from .engine import ScghgEstimate, prepare, run_trial, scghg  # noqa: E402

__all__ = ["RunConfig", "ScghgEstimate", "parse_config", "prepare", "run_trial", "scghg", "__version__"]
