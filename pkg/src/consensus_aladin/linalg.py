"""Small dense linear algebra kernels shared by the solvers.

Everything here operates on plain ``float64`` numpy arrays.  The problems this
package targets are desk-scale (dimensions around 10, tens of agents), so the
factorizations are dense and there is no attempt at sparse or blocked storage.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve

__all__ = [
    "NotSpdError",
    "SpdFactor",
    "as_symmetric",
    "cholesky",
    "spd_solve",
    "min_eig_lower_bound",
]

#: Relative asymmetry tolerated before a matrix is rejected as non-symmetric.
SYMMETRY_RTOL = 1e-12


class NotSpdError(Exception):
    """Raised when a matrix handed to :func:`cholesky` is not positive definite.

    Callers decide how to react (e.g. add a diagonal shift and retry).
    """


@dataclass(frozen=True)
class SpdFactor:
    """Lower-triangular Cholesky factor ``L`` with ``L @ L.T`` equal to the source."""

    lower: np.ndarray

    @property
    def n(self) -> int:
        return self.lower.shape[0]

    def solve(self, b: np.ndarray) -> np.ndarray:
        return spd_solve(self, b)


def as_symmetric(M: np.ndarray) -> np.ndarray:
    """Return the symmetrized matrix ``(M + M.T) / 2``.

    Accumulated rounding (quasi-Newton updates, sums of outer products) is
    tolerated up to :data:`SYMMETRY_RTOL` relative asymmetry; anything larger
    indicates a logic error upstream and raises ``ValueError``.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    scale = max(1.0, float(np.abs(M).max()) if M.size else 1.0)
    asym = float(np.abs(M - M.T).max()) if M.size else 0.0
    if asym > SYMMETRY_RTOL * scale:
        raise ValueError(f"matrix is not symmetric (asymmetry {asym:.3e}, scale {scale:.3e})")
    return 0.5 * (M + M.T)


def cholesky(M: np.ndarray) -> SpdFactor:
    """Factor a symmetric positive definite matrix.

    Parameters
    ----------
    M : ndarray
        Square matrix, symmetric up to :data:`SYMMETRY_RTOL`.

    Returns
    -------
    SpdFactor
        Lower-triangular factor.

    Raises
    ------
    NotSpdError
        If a pivot is not strictly positive, i.e. the matrix is not SPD.
    """
    S = as_symmetric(M)
    if not np.all(np.isfinite(S)):
        raise ValueError("matrix has non-finite entries")
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise NotSpdError(str(exc)) from exc
    return SpdFactor(lower=L)


def spd_solve(factor: SpdFactor, b: np.ndarray) -> np.ndarray:
    """Solve ``M x = b`` given the Cholesky factor of ``M``."""
    b = np.asarray(b, dtype=float)
    if b.shape[0] != factor.n:
        raise ValueError(f"dimension mismatch: factor is {factor.n}, b has {b.shape[0]}")
    return cho_solve((factor.lower, True), b)


def min_eig_lower_bound(M: np.ndarray, tol: float = 1e-8) -> float:
    """Certified lower bound on the smallest eigenvalue of a symmetric matrix.

    The bound ``t`` is certified by a successful Cholesky factorization of
    ``M - t I`` (hence ``lambda_min(M) > t`` numerically) and is tight to
    ``tol`` absolute for well-scaled matrices.  A symmetric eigenvalue
    estimate seeds the probe; bisection is the fallback when rounding makes
    the seeded probes fail.
    """
    S = as_symmetric(M)
    n = S.shape[0]
    if n == 0:
        return 0.0
    eye = np.eye(n)

    def spd_at(t: float) -> bool:
        try:
            np.linalg.cholesky(S - t * eye)
            return True
        except np.linalg.LinAlgError:
            return False

    scale = max(1.0, float(np.abs(S).max()))
    est = float(np.linalg.eigvalsh(S)[0])
    gap = 1e-12 * scale
    for _ in range(20):
        if gap > tol:
            break
        t = est - gap
        if spd_at(t):
            return t
        gap *= 8.0

    # Fallback: plain bisection on the Cholesky predicate from a Gershgorin
    # bracket.  Only reached when the eigenvalue estimate is unusable.
    radii = np.sum(np.abs(S), axis=1) - np.abs(np.diag(S))
    lo = float(np.min(np.diag(S) - radii)) - 1.0
    hi = float(np.max(np.diag(S) + radii)) + 1.0
    while not spd_at(lo):
        lo -= max(1.0, abs(lo))
    while hi - lo > 0.25 * tol:
        mid = 0.5 * (lo + hi)
        if spd_at(mid):
            lo = mid
        else:
            hi = mid
    return lo
