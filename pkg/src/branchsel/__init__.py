"""N-particle branching-selection chain on Z: simulation, exact small-N speeds,
scaling fits and executable checks of the speed bounds."""

from ._backend import BACKEND
from .population import ModelParams, Population

__version__ = "0.1.0"
__all__ = ["BACKEND", "ModelParams", "Population", "__version__"]
