"""slimboard: cold-start rating questionnaires from greedily trained SLIM models.

The package trains sparse item-item recommenders row by row, turns the row
selection order into a questionnaire, benchmarks questionnaires offline
against latent-factor and popularity baselines, and serves an interactive
onboarding flow over HTTP.
"""

__version__ = "0.1.0"

from .errors import (
    CapacityError,
    ConflictError,
    DimensionError,
    NotFoundError,
    ParseError,
    SlimboardError,
    ValidationError,
)

__all__ = [
    "CapacityError",
    "ConflictError",
    "DimensionError",
    "NotFoundError",
    "ParseError",
    "SlimboardError",
    "ValidationError",
    "__version__",
]
