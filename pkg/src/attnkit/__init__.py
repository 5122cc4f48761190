"""Attention analytics toolkit.

Library and CLI for gaze event detection and features, gaze synchrony,
thought-sequence clustering, wristband physiology, an imbalanced-classification
harness, and skeleton-based hand-raise annotation.
"""

from . import features, gaze, handraise, ml, physio, sequences, synchrony, validation

__version__ = "0.1.0"

from . import io  # noqa: E402  (needs the submodules above)
from . import cli  # noqa: E402

__all__ = [
    "cli",
    "features",
    "gaze",
    "handraise",
    "io",
    "ml",
    "physio",
    "sequences",
    "synchrony",
    "validation",
    "__version__",
]
