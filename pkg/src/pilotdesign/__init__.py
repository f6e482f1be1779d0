"""Pilot-experiment designs: discrepancy, GLM information and L-efficiency."""

__version__ = "0.1.0"

from .core import Design, ModelSpec, TargetDistribution  # noqa: E402
from .errors import InfeasibleCandidates, InvalidInput, SingularInformation  # noqa: E402

__all__ = ["Design", "ModelSpec", "TargetDistribution", "InvalidInput", "SingularInformation",
           "InfeasibleCandidates", "__version__"]
