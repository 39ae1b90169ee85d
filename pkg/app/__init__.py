"""ShiftKraus: steering states and density operators with minimal generator families."""

__all__ = ["__version__"]

from .version import __version__  # noqa: E402
