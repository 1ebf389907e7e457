"""Consensus problem instances: each of ``N`` agents owns a smooth objective
on a shared n-dimensional variable, and all agents must agree on one point.

Three families ship with the package:

* ``quadratic`` -- strongly convex quadratics with a closed-form solution,
  used to validate the convergence theory.
* ``pseudo-huber`` -- strictly convex but non-quadratic, exercises descent
  behaviour without quadratic shortcuts.
* ``sensor-allocation`` -- the non-convex benchmark: each agent reconciles
  two 5-vector position estimates with noisy squared-gap measurements.

All randomness flows through :mod:`consensus_aladin.rng`, so instances are
bit-reproducible from their seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .rng import GaussianStream

__all__ = [
    "ObjectiveOracle",
    "QuadraticObjective",
    "PseudoHuberObjective",
    "SensorAllocationObjective",
    "ConsensusProblem",
    "quadratic_problem",
    "pseudo_huber_problem",
    "sensor_allocation_problem",
    "fd_gradient",
    "fd_hessian",
    "check_oracle",
]


class ObjectiveOracle:
    """A smooth per-agent objective exposing value, gradient and Hessian."""

    n: int

    def value(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def gradient(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hessian(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class QuadraticObjective(ObjectiveOracle):
    """f(x) = 0.5 (x - a)' Q (x - a) with Q symmetric positive definite."""

    def __init__(self, Q: np.ndarray, a: np.ndarray):
        self.Q = linalg.as_symmetric(Q)
        self.a = np.asarray(a, dtype=float)
        self.n = self.a.shape[0]
        if self.Q.shape != (self.n, self.n):
            raise ValueError("Q and a dimensions disagree")
        if not (np.all(np.isfinite(self.Q)) and np.all(np.isfinite(self.a))):
            raise ValueError("non-finite problem data")

    def value(self, x: np.ndarray) -> float:
        d = x - self.a
        return 0.5 * float(d @ (self.Q @ d))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.Q @ (x - self.a)

    def hessian(self, x: np.ndarray) -> np.ndarray:
        return self.Q


class PseudoHuberObjective(ObjectiveOracle):
    """f(x) = sum_j sqrt(1 + (x_j - a_j)^2): strictly convex, curvature < 1."""

    def __init__(self, a: np.ndarray):
        self.a = np.asarray(a, dtype=float)
        self.n = self.a.shape[0]
        if not np.all(np.isfinite(self.a)):
            raise ValueError("non-finite problem data")

    def value(self, x: np.ndarray) -> float:
        return float(np.sum(np.sqrt(1.0 + (x - self.a) ** 2)))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        d = x - self.a
        return d / np.sqrt(1.0 + d**2)

    def hessian(self, x: np.ndarray) -> np.ndarray:
        d = x - self.a
        return np.diag((1.0 + d**2) ** -1.5)


class SensorAllocationObjective(ObjectiveOracle):
    """Non-convex sensor reconciliation objective on x = [x_a; x_b], x_a, x_b in R^5.

    f(x) = 0.5 (||x_a - za||^2 + ||x_b - zb||^2)
         + 0.5 sum_j ((x_a[j] - x_b[j])^2 - zs[j])^2

    The Hessian splits into 2x2 blocks [[1 + c_j, -c_j], [-c_j, 1 + c_j]]
    with c_j = 6 (x_a[j] - x_b[j])^2 - 2 zs[j]; the quartic coupling makes it
    indefinite wherever c_j < -1/2.
    """

    half = 5

    def __init__(self, za: np.ndarray, zb: np.ndarray, zs: np.ndarray):
        self.za = np.asarray(za, dtype=float)
        self.zb = np.asarray(zb, dtype=float)
        self.zs = np.asarray(zs, dtype=float)
        if not (self.za.shape == self.zb.shape == self.zs.shape == (self.half,)):
            raise ValueError("measurement vectors must all have length 5")
        if not all(np.all(np.isfinite(v)) for v in (self.za, self.zb, self.zs)):
            raise ValueError("non-finite problem data")
        self.n = 2 * self.half

    def _split(self, x: np.ndarray):
        return x[: self.half], x[self.half :]

    def value(self, x: np.ndarray) -> float:
        xa, xb = self._split(x)
        gap = xa - xb
        fit = 0.5 * (np.sum((xa - self.za) ** 2) + np.sum((xb - self.zb) ** 2))
        return float(fit + 0.5 * np.sum((gap**2 - self.zs) ** 2))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        xa, xb = self._split(x)
        gap = xa - xb
        t = 2.0 * (gap**2 - self.zs) * gap
        return np.concatenate([xa - self.za + t, xb - self.zb - t])

    def hessian(self, x: np.ndarray) -> np.ndarray:
        xa, xb = self._split(x)
        gap = xa - xb
        c = 6.0 * gap**2 - 2.0 * self.zs
        H = np.zeros((self.n, self.n))
        idx = np.arange(self.half)
        H[idx, idx] = 1.0 + c
        H[idx + self.half, idx + self.half] = 1.0 + c
        H[idx, idx + self.half] = -c
        H[idx + self.half, idx] = -c
        return H


@dataclass
class ConsensusProblem:
    """N agents sharing one n-dimensional consensus variable."""

    agents: list
    n: int
    name: str = ""
    known_solution: object = None  # diagnostics.ReferenceSolution when available
    seed: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def num_agents(self) -> int:
        return len(self.agents)

    def total_value(self, z: np.ndarray) -> float:
        return float(sum(f.value(z) for f in self.agents))

    def total_gradient(self, z: np.ndarray) -> np.ndarray:
        g = np.zeros(self.n)
        for f in self.agents:
            g = g + f.gradient(z)
        return g

    def total_hessian(self, z: np.ndarray) -> np.ndarray:
        H = np.zeros((self.n, self.n))
        for f in self.agents:
            H = H + f.hessian(z)
        return H


def quadratic_problem(N: int, n: int, seed: int) -> ConsensusProblem:
    """Strongly convex quadratic instance with its exact solution attached.

    Each agent draws Q_i = A' A + I (A a standard normal n x n matrix) and an
    anchor a_i; the consensus optimum is z* = (sum Q_i)^{-1} sum Q_i a_i with
    duals lam*_i = -Q_i (z* - a_i), which sum to zero by construction.
    """
    if N < 1 or n < 1:
        raise ValueError("N and n must be at least 1")
    stream = GaussianStream(seed)
    agents = []
    for _ in range(N):
        A = stream.draw(n * n).reshape(n, n)
        a = stream.draw(n)
        agents.append(QuadraticObjective(A.T @ A + np.eye(n), a))

    Qsum = np.zeros((n, n))
    rhs = np.zeros(n)
    for f in agents:
        Qsum = Qsum + f.Q
        rhs = rhs + f.Q @ f.a
    z_star = linalg.spd_solve(linalg.cholesky(Qsum), rhs)
    lam_star = [-f.Q @ (z_star - f.a) for f in agents]

    from .diagnostics import ReferenceSolution

    ref = ReferenceSolution(
        z_star=z_star,
        lam_star=lam_star,
        grad_norm=float(np.linalg.norm(sum(f.gradient(z_star) for f in agents))),
        local=False,
    )
    return ConsensusProblem(agents=agents, n=n, name="quadratic", known_solution=ref, seed=seed)


def pseudo_huber_problem(N: int, n: int, seed: int) -> ConsensusProblem:
    """Strictly convex non-quadratic instance; reference solved at construction."""
    if N < 1 or n < 1:
        raise ValueError("N and n must be at least 1")
    stream = GaussianStream(seed)
    agents = [PseudoHuberObjective(stream.draw(n)) for _ in range(N)]
    problem = ConsensusProblem(agents=agents, n=n, name="pseudo-huber", seed=seed)

    from .diagnostics import centralized_solve

    problem.known_solution = centralized_solve(problem, tol=1e-10)
    return problem


def sensor_allocation_problem(N: int, seed: int, std: float = 5.0) -> ConsensusProblem:
    """Non-convex sensor reconciliation instance (n = 10, data N(0, std^2)).

    With ``N`` agents the consensus formulation carries ``10 N + 10`` primal
    scalars (local copies plus the shared variable) and ``10 N`` duals.  No
    reference solution is attached: the instance is non-convex and only local
    references make sense (see ``diagnostics.centralized_solve``).
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    stream = GaussianStream(seed, std=std)
    agents = []
    for _ in range(N):
        za = stream.draw(5)
        zb = stream.draw(5)
        zs = stream.draw(5)
        agents.append(SensorAllocationObjective(za, zb, zs))
    return ConsensusProblem(agents=agents, n=10, name="sensor-allocation", seed=seed)


# ---------------------------------------------------------------------------
# Finite-difference oracles (used by the test-suite to validate gradients).


def fd_gradient(value, x: np.ndarray, h: float | None = None) -> np.ndarray:
    """Central finite-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    if h is None:
        h = 1e-6 * (1.0 + float(np.linalg.norm(x)))
    g = np.zeros_like(x)
    for j in range(x.shape[0]):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (value(x + e) - value(x - e)) / (2.0 * h)
    return g


def fd_hessian(gradient, x: np.ndarray, h: float | None = None) -> np.ndarray:
    """Central finite-difference Jacobian of a gradient function (symmetrized)."""
    x = np.asarray(x, dtype=float)
    if h is None:
        h = 1e-6 * (1.0 + float(np.linalg.norm(x)))
    cols = []
    for j in range(x.shape[0]):
        e = np.zeros_like(x)
        e[j] = h
        cols.append((gradient(x + e) - gradient(x - e)) / (2.0 * h))
    H = np.stack(cols, axis=1)
    return 0.5 * (H + H.T)


def check_oracle(oracle: ObjectiveOracle, points, grad_rtol: float = 1e-5, hess_rtol: float = 1e-4) -> None:
    """Assert that an oracle's derivatives match finite differences at the given points."""
    for x in points:
        x = np.asarray(x, dtype=float)
        g = oracle.gradient(x)
        g_fd = fd_gradient(oracle.value, x)
        scale = 1.0 + float(np.linalg.norm(g_fd))
        if np.linalg.norm(g - g_fd) > grad_rtol * scale:
            raise AssertionError(
                f"gradient mismatch at {x!r}: |g - fd| = {np.linalg.norm(g - g_fd):.3e}"
            )
        H = oracle.hessian(x)
        H_fd = fd_hessian(oracle.gradient, x)
        hscale = 1.0 + float(np.linalg.norm(H_fd))
        if np.linalg.norm(H - H_fd) > hess_rtol * hscale:
            raise AssertionError(
                f"hessian mismatch at {x!r}: |H - fd| = {np.linalg.norm(H - H_fd):.3e}"
            )
