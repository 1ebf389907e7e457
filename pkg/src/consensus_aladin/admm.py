"""Consensus ADMM baselines in both update orderings.

Both variants share the agents' subproblem

    x_i+ = argmin f_i(x) + lam_i' x + (rho / 2) ||x - z||^2

(the same solve consensus ALADIN uses, so comparisons isolate the
coordination rule) and differ only in the order of the dual update and the
aggregation:

* dual-first:      lam_i+ = lam_i + rho (x_i+ - z);  z+ = mean(x_i+ + lam_i+ / rho)
* aggregate-first: z+ = mean(x_i+ + lam_i / rho);    lam_i+ = lam_i + rho (x_i+ - z+)

The aggregate-first ordering keeps sum_i lam_i = 0 after every round; the
dual-first ordering only achieves that in the limit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .aladin import SubproblemFailure
from .local_solver import SubproblemSpec, solve_subproblem

__all__ = ["AdmmAgentState", "admm_init_states", "admm_round_dual_first", "admm_round_aggregate_first"]


@dataclass
class AdmmAgentState:
    x: np.ndarray
    lam: np.ndarray


def admm_init_states(problem) -> tuple[list[AdmmAgentState], np.ndarray]:
    """Zero-initialized agent states and shared point."""
    n = problem.n
    states = [AdmmAgentState(x=np.zeros(n), lam=np.zeros(n)) for _ in range(problem.num_agents)]
    return states, np.zeros(n)


def _solve_all(problem, states, z, rho, tol, max_iter, executor, round_index):
    def solve_one(i):
        spec = SubproblemSpec(oracle=problem.agents[i], dual=states[i].lam, anchor=z, prox=rho)
        return solve_subproblem(spec, states[i].x, tol=tol, max_iter=max_iter)

    if executor is not None:
        reports = list(executor.map(solve_one, range(len(states))))
    else:
        reports = [solve_one(i) for i in range(len(states))]
    xs = []
    for i, rep in enumerate(reports):
        if not rep.converged:
            raise SubproblemFailure(agent=i, round_index=round_index, grad_norm=rep.grad_norm)
        xs.append(rep.x)
    return xs


def admm_round_dual_first(
    problem,
    states: Sequence[AdmmAgentState],
    z: np.ndarray,
    rho: float,
    tol: float = 1e-10,
    max_iter: int = 100,
    executor=None,
    round_index: int = 0,
) -> tuple[np.ndarray, int, int]:
    """One dual-first round, in place; returns (z+, floats_up, floats_down)."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    N = len(states)
    xs = _solve_all(problem, states, z, rho, tol, max_iter, executor, round_index)
    floats_up = sum(x.size for x in xs)

    acc = np.zeros_like(z)
    for i, st in enumerate(states):
        st.lam = st.lam + rho * (xs[i] - z)
        st.x = xs[i]
        acc = acc + (xs[i] + st.lam / rho)
    z_new = acc / N
    floats_down = N * z_new.size  # coordinator broadcasts z+ only
    return z_new, floats_up, floats_down


def admm_round_aggregate_first(
    problem,
    states: Sequence[AdmmAgentState],
    z: np.ndarray,
    rho: float,
    tol: float = 1e-10,
    max_iter: int = 100,
    executor=None,
    round_index: int = 0,
) -> tuple[np.ndarray, int, int]:
    """One aggregate-first round, in place; returns (z+, floats_up, floats_down)."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    N = len(states)
    xs = _solve_all(problem, states, z, rho, tol, max_iter, executor, round_index)
    floats_up = sum(x.size for x in xs)

    acc = np.zeros_like(z)
    for i in range(N):
        acc = acc + (xs[i] + states[i].lam / rho)
    z_new = acc / N
    for i, st in enumerate(states):
        st.lam = st.lam + rho * (xs[i] - z_new)
        st.x = xs[i]
    floats_down = N * z_new.size
    return z_new, floats_up, floats_down
