"""Odd-symmetric 2D Euler vortex particles in a disc touching the origin.

Modules: geometry, kernel, initial_data, solver, diagnostics, cli.
"""
from .initial_data import ScenarioParams, build_omega0, delta_of, discretize
from .kernel import BlobKernelConfig, green, velocity
from .solver import ContourCurve, Timeline, omega_at, simulate, step, track_contour
from .state import VortexState

__all__ = [
    "BlobKernelConfig",
    "ContourCurve",
    "ScenarioParams",
    "Timeline",
    "VortexState",
    "build_omega0",
    "delta_of",
    "discretize",
    "green",
    "omega_at",
    "simulate",
    "step",
    "track_contour",
    "velocity",
]
