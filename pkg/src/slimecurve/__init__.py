"""Particle-material approximation of data smoothing and spline curves.

A multi-agent chemotactic particle model whose collective relaxes like a
shrinking elastic material, plus exact reference computations (moving
average, low-pass filter, B-splines, convex hull) to measure it against.
"""

from slimecurve.lattice import DiffusionParams, Field, OccupancyGrid, diffuse, project, sample
from slimecurve.agents import AdaptationParams, SensoryParams, World
from slimecurve.scenario import Polyline2D, Scenario, Series1D, Stimulus

__all__ = [
    "AdaptationParams",
    "DiffusionParams",
    "Field",
    "OccupancyGrid",
    "Polyline2D",
    "Scenario",
    "SensoryParams",
    "Series1D",
    "Stimulus",
    "World",
    "diffuse",
    "project",
    "sample",
]

__version__ = "0.1.0"
