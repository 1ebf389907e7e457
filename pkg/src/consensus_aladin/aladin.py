"""Consensus ALADIN round state machine.

One coordination round:

1. every agent minimizes its augmented subproblem around the shared point z
   and uploads the minimizer x_i+;
2. the coordinator recovers each agent's gradient from first-order
   stationarity, g_i = P (z - x_i+) - lam_i (P is the agent's prox metric),
   together with the differences s_i = x_i+ - x_i- and y_i = g_i - g_i-;
3. (BFGS variant) the damped BFGS update refreshes the curvature model B_i;
4. the coordinator computes the new shared point -- either the closed-form
   weighted average z+ = (sum B_i)^{-1} sum (B_i x_i+ - g_i) or, when every
   metric is the scalar rho, the plain average z+ = mean(x_i+ - g_i / rho);
5. duals are refreshed as lam_i+ = P (x_i+ - z+) - g_i and downloaded with z+.

The dual refresh makes sum_i lam_i+ = 0 after every round by construction.

Variants: ``bfgs-aladin`` (scalar-prox subproblems, curvature models updated
by damped BFGS), ``reduced-aladin`` (scalar prox everywhere, plain-average
coordination), and ``matrix-prox-aladin`` (constant SPD matrix prox metrics;
the setting of the global convergence theory).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from . import linalg
from .diagnostics import IterationRecord, ReferenceSolution, energy
from .local_solver import SubproblemSpec, solve_subproblem

__all__ = [
    "Variant",
    "AgentState",
    "CoordinatorState",
    "BfgsUpdate",
    "SubproblemFailure",
    "recover_gradient",
    "damped_bfgs_update",
    "update_global_bfgs",
    "update_global_reduced",
    "recover_dual",
    "kkt_oracle",
    "init_states",
    "hessian_update_due",
    "run_round",
]

DAMPING_FRACTION = 0.2
SKIP_DENOMINATOR_TOL = 1e-14


class Variant(str, Enum):
    BFGS = "bfgs-aladin"
    REDUCED = "reduced-aladin"
    MATRIX_PROX = "matrix-prox-aladin"


class SubproblemFailure(RuntimeError):
    """An agent's subproblem solve did not reach its tolerance."""

    def __init__(self, agent: int, round_index: int, grad_norm: float):
        self.agent = agent
        self.round_index = round_index
        self.grad_norm = grad_norm
        super().__init__(
            f"agent {agent} failed to solve its subproblem at round {round_index} "
            f"(gradient norm {grad_norm:.3e})"
        )


@dataclass
class AgentState:
    """One agent's primal/dual iterates, recovered gradients and curvature model."""

    x: np.ndarray
    lam: np.ndarray
    B: np.ndarray
    x_prev: np.ndarray
    g: np.ndarray | None = None
    g_prev: np.ndarray | None = None


@dataclass
class CoordinatorState:
    """The shared consensus point and the round counter."""

    z: np.ndarray
    round: int = 0


@dataclass
class BfgsUpdate:
    """Result of one damped BFGS update."""

    B: np.ndarray
    skipped: bool = False
    damped: bool = False
    theta: float = 0.0
    reason: str = ""


def recover_gradient(prox, z: np.ndarray, x_plus: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Gradient of the local objective at x+, recovered from stationarity.

    An exact subproblem solve satisfies grad f(x+) + lam + P (x+ - z) = 0, so
    g = P (z - x+) - lam equals grad f(x+) without any extra oracle call.
    """
    if np.isscalar(prox) or np.ndim(prox) == 0:
        return float(prox) * (z - x_plus) - lam
    return np.asarray(prox) @ (z - x_plus) - lam


def damped_bfgs_update(B: np.ndarray, s: np.ndarray, y: np.ndarray, skip_threshold: float = 1e-12) -> BfgsUpdate:
    """Powell-damped BFGS update of an SPD curvature model.

    If the curvature condition y's >= 0.2 s'Bs fails, y is pulled toward Bs:
    y := y + theta (Bs - y) with theta chosen so the damped y meets the bound
    with equality.  The update is skipped (model returned unchanged) when the
    step is negligible or the damping denominator vanishes.
    """
    s = np.asarray(s, dtype=float)
    y = np.asarray(y, dtype=float)
    if float(np.linalg.norm(s)) <= skip_threshold:
        return BfgsUpdate(B=B, skipped=True, reason="negligible step")

    Bs = B @ s
    sBs = float(s @ Bs)
    sy = float(s @ y)
    damped = False
    theta = 0.0
    if sy <= DAMPING_FRACTION * sBs:
        den = sBs - sy
        if abs(den) <= SKIP_DENOMINATOR_TOL:
            return BfgsUpdate(B=B, skipped=True, reason="vanishing damping denominator")
        theta = (DAMPING_FRACTION * sBs - sy) / den
        y = y + theta * (Bs - y)
        sy = float(s @ y)
        damped = True
    if sBs <= 0 or sy <= 0:
        return BfgsUpdate(B=B, skipped=True, reason="non-positive curvature after damping")

    B_new = B - np.outer(Bs, Bs) / sBs + np.outer(y, y) / sy
    return BfgsUpdate(B=linalg.as_symmetric(B_new), damped=damped, theta=theta)


def _weighted_global_update(Bs: Sequence[np.ndarray], xs: Sequence[np.ndarray], gs: Sequence[np.ndarray]) -> np.ndarray:
    """General path of the coordination step: solve (sum B_i) z = sum (B_i x_i - g_i)."""
    n = xs[0].shape[0]
    total = np.zeros((n, n))
    rhs = np.zeros(n)
    for B, x, g in zip(Bs, xs, gs):
        total = total + B
        rhs = rhs + (B @ x - g)
    return linalg.spd_solve(linalg.cholesky(total), rhs)


def update_global_bfgs(Bs: Sequence[np.ndarray], xs: Sequence[np.ndarray], gs: Sequence[np.ndarray]) -> np.ndarray:
    """Closed-form coordination step z+ = (sum B_i)^{-1} sum (B_i x_i+ - g_i).

    When every metric is exactly the same scalar multiple of the identity the
    algebra reduces to the plain average of :func:`update_global_reduced`; in
    that case the reduction is used directly so that the two code paths are
    bitwise identical (and the n x n factorization is skipped).
    """
    B0 = Bs[0]
    rho = float(B0[0, 0])
    if all(B is B0 or np.array_equal(B, B0) for B in Bs) and np.array_equal(B0, rho * np.eye(B0.shape[0])):
        return update_global_reduced(rho, xs, gs)
    return _weighted_global_update(Bs, xs, gs)


def update_global_reduced(rho: float, xs: Sequence[np.ndarray], gs: Sequence[np.ndarray]) -> np.ndarray:
    """Plain-average coordination step z+ = mean_i (x_i+ - g_i / rho)."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    acc = np.zeros_like(xs[0])
    for x, g in zip(xs, gs):
        acc = acc + (x - g / rho)
    return acc / len(xs)


def recover_dual(prox, x_plus: np.ndarray, z_plus: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Refreshed dual lam+ = P (x+ - z+) - g."""
    if np.isscalar(prox) or np.ndim(prox) == 0:
        return float(prox) * (x_plus - z_plus) - g
    return np.asarray(prox) @ (x_plus - z_plus) - g


def kkt_oracle(Bs: Sequence[np.ndarray], xs: Sequence[np.ndarray], gs: Sequence[np.ndarray]):
    """Dense solve of the full coordination KKT system (testing oracle).

    Assembles the (2N+1)n-dimensional first-order system of the coordination
    problem

        min  sum_i 0.5 dx_i' B_i dx_i + g_i' dx_i
        s.t. x_i+ + dx_i = z          (multiplier lam_i)

    and solves it by dense LU.  Returns (z, lams, dxs).  Quadratic cost in
    N*n; intended for small test instances only.
    """
    N = len(xs)
    n = xs[0].shape[0]
    if N * n > 100:
        raise ValueError("kkt_oracle is for small instances (N*n <= 100)")
    dim = (2 * N + 1) * n
    K = np.zeros((dim, dim))
    rhs = np.zeros(dim)

    def dx_slice(i):
        return slice(i * n, (i + 1) * n)

    z_sl = slice(N * n, (N + 1) * n)

    def lam_slice(i):
        return slice((N + 1 + i) * n, (N + 2 + i) * n)

    eye = np.eye(n)
    for i in range(N):
        # stationarity in dx_i: B_i dx_i + lam_i = -g_i
        K[dx_slice(i), dx_slice(i)] = Bs[i]
        K[dx_slice(i), lam_slice(i)] = eye
        rhs[dx_slice(i)] = -gs[i]
        # primal feasibility: dx_i - z = -x_i+
        K[lam_slice(i), dx_slice(i)] = eye
        K[lam_slice(i), z_sl] = -eye
        rhs[lam_slice(i)] = -xs[i]
        # stationarity in z: -sum_i lam_i = 0
        K[z_sl, lam_slice(i)] = -eye

    sol = np.linalg.solve(K, rhs)
    z = sol[z_sl]
    dxs = [sol[dx_slice(i)] for i in range(N)]
    lams = [sol[lam_slice(i)] for i in range(N)]
    return z, lams, dxs


def init_states(problem, rho: float, prox_matrices: Sequence[np.ndarray] | None = None):
    """Zero-initialized agent and coordinator states with B_i = rho I.

    ``prox_matrices`` overrides the initial curvature models (matrix-prox
    runs with custom constant metrics).
    """
    n = problem.n
    agents = []
    for i in range(problem.num_agents):
        B = rho * np.eye(n) if prox_matrices is None else np.array(prox_matrices[i], dtype=float)
        agents.append(
            AgentState(
                x=np.zeros(n),
                lam=np.zeros(n),
                B=B,
                x_prev=np.zeros(n),
            )
        )
    return agents, CoordinatorState(z=np.zeros(n), round=0)


def hessian_update_due(round_index: int, schedule_base: int | None) -> bool:
    """Whether the curvature models are refreshed at this round.

    Without a schedule the update runs every round (the first update still
    waits for round 2, when a previous gradient exists).  With base K, the
    update runs only at rounds K, K^2, K^3, ...
    """
    if round_index < 2 and schedule_base is None:
        return False
    if schedule_base is None:
        return True
    p = schedule_base
    while p < round_index:
        p *= schedule_base
    return p == round_index


@dataclass
class RoundOptions:
    """Knobs for one coordination round (shared across rounds of a run)."""

    subproblem_tol: float = 1e-10
    subproblem_max_iter: int = 100
    hessian_schedule: int | None = None
    bfgs_updates_enabled: bool = True
    executor: object = None  # concurrent.futures-style executor or None
    reference: ReferenceSolution | None = None


def run_round(
    variant: Variant,
    problem,
    agents: Sequence[AgentState],
    coord: CoordinatorState,
    rho: float,
    options: RoundOptions | None = None,
) -> IterationRecord:
    """Execute one coordination round in place and return its diagnostics row.

    Raises :class:`SubproblemFailure` if any agent's solve misses its
    tolerance; skipped curvature updates are tolerated and recorded by the
    update result only.
    """
    opts = options or RoundOptions()
    t0 = time.perf_counter()
    coord.round += 1
    k = coord.round
    N = len(agents)
    floats_up = 0
    floats_down = 0

    matrix_prox = variant is Variant.MATRIX_PROX

    def solve_one(i: int):
        agent = agents[i]
        prox = agent.B if matrix_prox else rho
        spec = SubproblemSpec(oracle=problem.agents[i], dual=agent.lam, anchor=coord.z, prox=prox)
        return solve_subproblem(spec, agent.x, tol=opts.subproblem_tol, max_iter=opts.subproblem_max_iter)

    if opts.executor is not None:
        reports = list(opts.executor.map(solve_one, range(N)))
    else:
        reports = [solve_one(i) for i in range(N)]

    xs = []
    for i, report in enumerate(reports):
        if not report.converged:
            raise SubproblemFailure(agent=i, round_index=k, grad_norm=report.grad_norm)
        xs.append(report.x)
        floats_up += report.x.size  # agent uploads x_i+ only

    # gradient recovery and curvature bookkeeping (coordinator side)
    gs = []
    for i, agent in enumerate(agents):
        prox = agent.B if matrix_prox else rho
        gs.append(recover_gradient(prox, coord.z, xs[i], agent.lam))

    if variant is Variant.BFGS and opts.bfgs_updates_enabled and hessian_update_due(k, opts.hessian_schedule):
        for i, agent in enumerate(agents):
            if agent.g is None:
                continue  # no previous gradient yet: first update happens at round 2
            s = xs[i] - agent.x
            y = gs[i] - agent.g
            threshold = 1e-12 * (1.0 + float(np.linalg.norm(xs[i])))
            agent.B = damped_bfgs_update(agent.B, s, y, skip_threshold=threshold).B

    if variant is Variant.REDUCED:
        z_new = update_global_reduced(rho, xs, gs)
    else:
        z_new = update_global_bfgs([a.B for a in agents], xs, gs)

    lam_new = []
    for i, agent in enumerate(agents):
        prox = agent.B if variant is not Variant.REDUCED else rho
        lam_new.append(recover_dual(prox, xs[i], z_new, gs[i]))
        floats_down += lam_new[i].size + z_new.size  # coordinator sends (lam_i+, z+)

    for i, agent in enumerate(agents):
        agent.x_prev = agent.x
        agent.g_prev = agent.g
        agent.x = xs[i]
        agent.g = gs[i]
        agent.lam = lam_new[i]
    coord.z = z_new

    residual = float(sum(np.linalg.norm(a.x - coord.z) for a in agents))
    dual_sum = np.zeros(problem.n)
    for a in agents:
        dual_sum = dual_sum + a.lam
    e = None
    if opts.reference is not None:
        e = energy(coord.z, [a.lam for a in agents], opts.reference, [a.B for a in agents])

    wall_ms = (time.perf_counter() - t0) * 1e3
    return IterationRecord(
        round=k,
        consensus_residual=residual,
        objective_at_z=problem.total_value(coord.z),
        energy=e,
        dual_sum_norm=float(np.linalg.norm(dual_sum)),
        floats_up=floats_up,
        floats_down=floats_down,
        wall_ms=wall_ms,
    )
