"""Velocity turnpike analysis for translation-symmetric optimal control problems."""

from . import _core
from ._core import *  # noqa: F401,F403
from ._core import analytic

__all__ = [name for name in dir(_core) if not name.startswith("_")]
