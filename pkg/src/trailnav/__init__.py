"""Terrain-aware planning: implicit terrain fields, A* on cost grids, spline
trajectory optimisation over bumpiness, time-scaling, MPC tracking and MPPI
baselines."""

from .errors import TrailError

__version__ = "0.1.0"
__all__ = ["TrailError", "__version__"]
