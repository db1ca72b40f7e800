"""Statistics of the post-detection SINR of widely linear MMSE MIMO receivers."""

__version__ = "0.1.0"

from .mimo_model import SystemConfig  # noqa: E402
from .special_fn import SeriesControl, SeriesTruncationError  # noqa: E402

__all__ = ["SystemConfig", "SeriesControl", "SeriesTruncationError", "__version__"]
