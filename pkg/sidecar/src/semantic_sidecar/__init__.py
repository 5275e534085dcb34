"""HTTP sidecar serving real NLI and token-embedding sentence scorers."""

from .scoring import (
    WIRE_FIELDS,
    LabelMappingError,
    NliScorer,
    OversizeTextError,
    RecallScorer,
    resolve_label_order,
)
from .service import ServiceConfig, app_from_config, create_app

__version__ = "0.1.0"

__all__ = [
    "WIRE_FIELDS",
    "LabelMappingError",
    "NliScorer",
    "OversizeTextError",
    "RecallScorer",
    "ServiceConfig",
    "app_from_config",
    "create_app",
    "resolve_label_order",
]
