"""Centre-enhanced discriminative learning for supervised anomaly detection."""

from .estimator import CEDLDetector
from .objective import ObjectiveConfig

__all__ = ["CEDLDetector", "ObjectiveConfig"]
__version__ = "0.1.0"
