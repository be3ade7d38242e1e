"""Retinex decomposition + conditional rectified flow low-light enhancement."""

from illumflow._core import *  # noqa: F401,F403
from illumflow._core import __all__  # noqa: F401
