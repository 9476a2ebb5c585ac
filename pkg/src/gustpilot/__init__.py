"""Waypoint rallying for a wind-disturbed multirotor: SAC, pole-placed PID, and a fixed baseline."""

from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
