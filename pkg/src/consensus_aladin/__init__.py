"""Distributed consensus optimization: consensus ALADIN variants, consensus
ADMM baselines, a simulated multi-agent coordinator with communication
accounting, and convergence diagnostics."""

__version__ = "0.1.0"

from . import admm, aladin, diagnostics, linalg, local_solver, problems, rng, runner  # noqa: F401
