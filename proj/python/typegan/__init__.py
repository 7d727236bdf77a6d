"""Unsupervised typography style transfer."""

from ._typegan import *  # noqa: F401,F403
from ._typegan import TypeganError, __version__  # noqa: F401
