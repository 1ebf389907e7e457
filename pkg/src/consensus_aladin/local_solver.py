"""Regularized Newton solver for the agents' augmented subproblems.

Each round, agent i minimizes

    phi_i(x) = f_i(x) + lam_i' x + 0.5 * ||x - z||_P^2

where the prox metric ``P`` is either a scalar ``rho`` (penalty rho*I) or an
SPD matrix.  The solver is a damped Newton iteration: the Hessian
``H = hess f_i(x) + P`` is shifted by ``tau * I`` (tau starting at 1e-8,
growing tenfold) until it factorizes, and steps are accepted by an Armijo
backtracking test (c = 1e-4, halving).

Near the minimizer the true decrease of phi falls below the rounding noise of
its evaluation; at that point the Armijo comparison carries no information,
so the full Newton step is taken unconditionally and iteration stops once the
gradient norm stalls.  The noise threshold is scaled by the magnitudes of the
terms entering phi (the objective value, |lam_j x_j| and the penalty), not by
phi itself, because the three terms routinely cancel to near zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg

__all__ = ["SubproblemSpec", "NewtonReport", "NonFiniteError", "solve_subproblem", "newton_minimize"]

ARMIJO_C = 1e-4
MAX_BACKTRACKS = 60
TAU_INITIAL = 1e-8
NOISE_EPS = 64.0 * np.finfo(float).eps


class NonFiniteError(RuntimeError):
    """A NaN or infinity appeared during the Newton iteration."""


@dataclass
class NewtonReport:
    """Outcome of a Newton solve."""

    x: np.ndarray
    grad_norm: float
    iterations: int
    shifts: int
    converged: bool


@dataclass
class SubproblemSpec:
    """One agent's augmented subproblem: oracle, dual estimate, anchor, prox metric."""

    oracle: object
    dual: np.ndarray
    anchor: np.ndarray
    prox: float | np.ndarray

    def __post_init__(self):
        self.dual = np.asarray(self.dual, dtype=float)
        self.anchor = np.asarray(self.anchor, dtype=float)
        if np.isscalar(self.prox) or np.ndim(self.prox) == 0:
            self.prox = float(self.prox)
            if self.prox <= 0:
                raise ValueError("scalar prox weight must be positive")
        else:
            self.prox = linalg.as_symmetric(np.asarray(self.prox, dtype=float))
            if linalg.min_eig_lower_bound(self.prox) <= 0:
                raise ValueError("matrix prox metric must be positive definite")

    # -- augmented objective pieces -------------------------------------

    def penalty_vector(self, v: np.ndarray) -> np.ndarray:
        """P v for the prox metric P."""
        if isinstance(self.prox, float):
            return self.prox * v
        return self.prox @ v

    def phi(self, x: np.ndarray) -> float:
        v = x - self.anchor
        return self.oracle.value(x) + float(self.dual @ x) + 0.5 * float(v @ self.penalty_vector(v))

    def phi_gradient(self, x: np.ndarray) -> np.ndarray:
        return self.oracle.gradient(x) + self.dual + self.penalty_vector(x - self.anchor)

    def phi_hessian(self, x: np.ndarray) -> np.ndarray:
        H = self.oracle.hessian(x)
        if isinstance(self.prox, float):
            return H + self.prox * np.eye(H.shape[0])
        return H + self.prox

    def noise_scale(self, x: np.ndarray) -> float:
        """Upper bound on the magnitudes whose cancellation forms phi(x)."""
        v = x - self.anchor
        pen = 0.5 * abs(float(v @ self.penalty_vector(v)))
        return abs(self.oracle.value(x)) + float(np.abs(self.dual * x).sum()) + pen


def _shifted_newton_direction(H: np.ndarray, g: np.ndarray) -> tuple[np.ndarray, int]:
    """Solve (H + tau I) d = -g with the smallest shift that makes H SPD."""
    n = g.shape[0]
    tau = 0.0
    shifts = 0
    while True:
        try:
            F = linalg.cholesky(H if tau == 0.0 else H + tau * np.eye(n))
            return linalg.spd_solve(F, -g), shifts
        except linalg.NotSpdError:
            tau = TAU_INITIAL if tau == 0.0 else 10.0 * tau
            shifts += 1
            if tau > 1e40:
                raise NonFiniteError("could not regularize the Newton system")


def newton_minimize(phi, grad, hess, x0, tol, max_iter, noise_scale=None) -> NewtonReport:
    """Minimize a smooth function by shifted Newton with Armijo backtracking.

    Returns the best iterate found; ``converged`` records whether the
    gradient-norm tolerance was met within the iteration budget.
    """
    x = np.asarray(x0, dtype=float).copy()
    if not np.all(np.isfinite(x)):
        raise NonFiniteError("warm start is not finite")
    if noise_scale is None:
        noise_scale = lambda p: abs(phi(p))  # noqa: E731

    shifts_total = 0
    best_x, best_gn = x, np.inf
    terminal_stall = 0
    performed = 0
    for it in range(max_iter):
        g = grad(x)
        if not np.all(np.isfinite(g)):
            raise NonFiniteError("gradient is not finite")
        gn = float(np.linalg.norm(g))
        if gn < best_gn:
            best_x, best_gn = x, gn
            terminal_stall = 0
        if gn <= tol:
            return NewtonReport(x=x, grad_norm=gn, iterations=it, shifts=shifts_total, converged=True)
        performed = it + 1

        d, shifts = _shifted_newton_direction(hess(x), g)
        shifts_total += shifts
        slope = float(g @ d)
        noise = NOISE_EPS * (1.0 + noise_scale(x))

        if ARMIJO_C * abs(slope) <= noise:
            # The Armijo comparison cannot resolve a decrease this small;
            # take the full Newton step and stop once the gradient norm
            # stalls at its rounding floor.
            terminal_stall += 1
            if terminal_stall > 3:
                break
            x = x + d
            continue

        p0 = phi(x)
        t = 1.0
        accepted = False
        for _ in range(MAX_BACKTRACKS):
            pt = phi(x + t * d)
            if not np.isfinite(pt):
                t *= 0.5
                continue
            if pt <= p0 + ARMIJO_C * t * slope + noise:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        x = x + t * d

    g = grad(best_x)
    gn = float(np.linalg.norm(g))
    return NewtonReport(x=best_x, grad_norm=gn, iterations=performed, shifts=shifts_total, converged=gn <= tol)


def solve_subproblem(spec: SubproblemSpec, warm_start: np.ndarray, tol: float = 1e-10, max_iter: int = 100) -> NewtonReport:
    """Solve one agent's augmented subproblem to the given gradient-norm tolerance."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    return newton_minimize(
        spec.phi,
        spec.phi_gradient,
        spec.phi_hessian,
        warm_start,
        tol=tol,
        max_iter=max_iter,
        noise_scale=spec.noise_scale,
    )
