"""Adaptive PID gain scheduling trained with PPO, on a point-mass drone
simulator, plus a 3D A* planner."""
from ._jit import backend

__version__ = "0.1.0"
__all__ = ["backend", "__version__"]
