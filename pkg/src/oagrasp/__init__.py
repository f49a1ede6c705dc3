"""Oriented anchor box grasp detection toolkit."""
from ._backend import BACKEND

__version__ = "0.1.0"
