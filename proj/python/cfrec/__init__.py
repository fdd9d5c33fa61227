"""Collaborative filtering with sparse denoising autoencoders."""

from cfrec._core import *  # noqa: F401,F403
from cfrec._core import __doc__  # noqa: F401
