"""Grid-aware tuning of ancillary-service response curves."""

from ._asopt import *  # noqa: F401,F403
from ._asopt import NumericalError, ValidationError  # noqa: F401

__version__ = "0.1.0"
