import numpy as np

from consensus_aladin.admm import (
    AdmmAgentState,
    admm_init_states,
    admm_round_aggregate_first,
    admm_round_dual_first,
)
from consensus_aladin.problems import ConsensusProblem, QuadraticObjective, quadratic_problem


def identity_quadratic_problem(anchors):
    n = anchors[0].shape[0]
    agents = [QuadraticObjective(np.eye(n), a) for a in anchors]
    return ConsensusProblem(agents=agents, n=n)


def run_admm(problem, round_fn, rho, rounds):
    states, z = admm_init_states(problem)
    history = []
    for k in range(1, rounds + 1):
        z, _, _ = round_fn(problem, states, z, rho, round_index=k)
        history.append((z.copy(), [st.lam.copy() for st in states]))
    return states, z, history


def test_fixed_point_is_stationary_both_orderings():
    anchors = [np.array([1.0, -1.0]), np.array([3.0, 5.0])]
    problem = identity_quadratic_problem(anchors)
    z_star = 0.5 * (anchors[0] + anchors[1])
    lam_star = [-(z_star - a) for a in anchors]  # -grad f_i(z*)
    for round_fn in (admm_round_dual_first, admm_round_aggregate_first):
        states = [AdmmAgentState(x=z_star.copy(), lam=l.copy()) for l in lam_star]
        z = z_star.copy()
        for k in range(3):
            z, _, _ = round_fn(problem, states, z, 4.0, round_index=k + 1)
        assert np.linalg.norm(z - z_star) <= 1e-10
        for st, l in zip(states, lam_star):
            assert np.linalg.norm(st.x - z_star) <= 1e-10
            assert np.linalg.norm(st.lam - l) <= 1e-10


def test_dual_first_dual_sum_nonzero_mid_run():
    problem = quadratic_problem(3, 2, seed=2)
    states, z = admm_init_states(problem)
    mid_run_violation = 0.0
    for k in range(1, 31):
        z, _, _ = admm_round_dual_first(problem, states, z, 100.0, round_index=k)
        dual_sum = np.linalg.norm(np.sum([st.lam for st in states], axis=0))
        mid_run_violation = max(mid_run_violation, dual_sum)
    assert mid_run_violation >= 1e-3  # zero dual sum holds only in the limit


def test_dual_first_dual_sum_vanishes_at_convergence():
    problem = quadratic_problem(2, 2, seed=3)
    states, z = admm_init_states(problem)
    for k in range(1, 2001):
        z, _, _ = admm_round_dual_first(problem, states, z, 1.0, round_index=k)
    dual_sum = np.linalg.norm(np.sum([st.lam for st in states], axis=0))
    assert dual_sum <= 1e-8
    assert np.linalg.norm(z - problem.known_solution.z_star) <= 1e-8


def test_aggregate_first_dual_sum_zero_from_round_one():
    problem = quadratic_problem(4, 3, seed=5)
    states, z = admm_init_states(problem)
    for k in range(1, 41):
        z, _, _ = admm_round_aggregate_first(problem, states, z, 100.0, round_index=k)
        lams = [st.lam for st in states]
        dual_sum = np.linalg.norm(np.sum(lams, axis=0))
        max_lam = max(np.linalg.norm(l) for l in lams)
        assert dual_sum <= 1e-9 * (1.0 + max_lam)


def test_dual_first_converges_to_centralized_solution():
    problem = quadratic_problem(2, 1, seed=11)
    _, z, _ = run_admm(problem, admm_round_dual_first, rho=1.0, rounds=100)
    assert np.linalg.norm(z - problem.known_solution.z_star) <= 1e-8


def test_aggregate_first_converges_to_centralized_solution():
    problem = quadratic_problem(3, 2, seed=13)
    _, z, _ = run_admm(problem, admm_round_aggregate_first, rho=1.0, rounds=500)
    assert np.linalg.norm(z - problem.known_solution.z_star) <= 1e-8


def test_both_orderings_share_the_fixed_point():
    problem = quadratic_problem(3, 2, seed=17)
    _, z1, _ = run_admm(problem, admm_round_dual_first, rho=1.0, rounds=800)
    _, z2, _ = run_admm(problem, admm_round_aggregate_first, rho=1.0, rounds=800)
    assert np.linalg.norm(z1 - z2) <= 1e-6


def test_communication_counts():
    problem = quadratic_problem(2, 3, seed=19)
    states, z = admm_init_states(problem)
    z, up, down = admm_round_aggregate_first(problem, states, z, 2.0, round_index=1)
    assert (up, down) == (6, 6)  # x_i+ up, z+ down
