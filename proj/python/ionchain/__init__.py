"""Number and homogeneity diagnostic for long 1D trapped-ion chains."""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
