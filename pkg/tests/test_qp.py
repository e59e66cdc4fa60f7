import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clutter_mpc.qp import QpProblem, kkt_residual, objective, solve


def enumerate_qp(problem):
    """Best feasible stationary point over every subset of constraints held with equality."""
    H, f, G, h = problem.H, problem.f, problem.G, problem.h
    n, p = problem.n, problem.p
    best, best_x = np.inf, None
    for k in range(min(n, p) + 1):
        for subset in itertools.combinations(range(p), k):
            S = list(subset)
            kkt = np.block([[H, G[S].T], [G[S], np.zeros((k, k))]])
            rhs = np.concatenate([-f, h[S]])
            z = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
            x = z[:n]
            if np.all(G @ x <= h + 1e-9):
                val = objective(problem, x)
                if val < best:
                    best, best_x = val, x
    return best, best_x


def random_problem(rng, n=None, p=None, psd=False):
    n = n or int(rng.integers(1, 5))
    p = int(rng.integers(0, 9)) if p is None else p
    A = rng.normal(size=(n, n))
    if psd and n > 1:
        A[:, 0] = 0.0  # rank deficient
        H = A @ A.T
        # bound the problem with a box so the semidefinite direction is capped
        G = np.vstack([rng.normal(size=(p, n)), np.eye(n), -np.eye(n)])
        h = np.concatenate([np.abs(rng.normal(size=p)), 2 * np.ones(2 * n)])
    else:
        H = A @ A.T + 0.1 * np.eye(n)
        G = rng.normal(size=(p, n))
        x_feas = rng.normal(size=n)
        h = G @ x_feas + np.abs(rng.normal(size=p))
    return QpProblem(H, rng.normal(size=n) * 3, G, h)


def test_unconstrained_minimum():
    sol = solve(QpProblem(np.eye(2), [-2.0, -2.0]))
    assert sol.status == "optimal"
    np.testing.assert_allclose(sol.x, [2.0, 2.0], atol=1e-12)


def test_single_active_constraint():
    # (x - 2)^2 = x^2 - 4x + 4  ->  H = 2, f = -4
    problem = QpProblem([[2.0]], [-4.0], [[1.0]], [1.0])
    sol = solve(problem)
    assert sol.x[0] == pytest.approx(1.0, abs=1e-12)
    assert sol.multipliers[0] == pytest.approx(2.0)
    assert sol.active == (0,)
    assert kkt_residual(problem, sol.x, sol.multipliers) < 1e-10


def test_residual_detects_perturbation():
    problem = QpProblem(np.eye(2), [-2.0, -2.0])
    assert kkt_residual(problem, np.array([2.001, 2.0]), np.zeros(0)) >= 1e-3 * 0.99


def test_matches_enumeration_oracle():
    rng = np.random.default_rng(0)
    for i in range(200):
        problem = random_problem(rng, psd=(i % 5 == 0))
        sol = solve(problem)
        best, _ = enumerate_qp(problem)
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(best, abs=1e-6)
        assert sol.kkt_residual <= 1e-6
        assert np.all(problem.G @ sol.x <= problem.h + 1e-8)


def test_oracle_solutions_satisfy_kkt():
    rng = np.random.default_rng(1)
    for _ in range(50):
        problem = random_problem(rng)
        _, x = enumerate_qp(problem)
        # recover multipliers on the active rows by least squares
        act = np.flatnonzero(np.abs(problem.G @ x - problem.h) < 1e-9)
        grad = problem.H @ x + problem.f
        lam = np.zeros(problem.p)
        if act.size:
            lam[act] = np.linalg.lstsq(problem.G[act].T, -grad, rcond=None)[0]
        assert kkt_residual(problem, x, lam) < 1e-6


def test_infeasible_detected():
    problem = QpProblem(np.eye(1), [0.0], [[1.0], [-1.0]], [0.0, -1.0])  # x <= 0 and x >= 1
    sol = solve(problem)
    assert sol.status == "infeasible"
    assert sol.info["violation"] == pytest.approx(0.5, abs=1e-6)


def test_infeasible_start_is_repaired():
    # x = 0 violates x >= 1, the optimum sits on that bound
    problem = QpProblem(np.eye(2), [1.0, 1.0], [[-1.0, 0.0]], [-1.0])
    sol = solve(problem)
    assert sol.status == "optimal"
    np.testing.assert_allclose(sol.x, [1.0, -1.0], atol=1e-9)


def test_duplicate_rows_do_not_break_solver():
    problem = QpProblem(np.eye(2), [-4.0, 0.0], [[1.0, 0.0], [1.0, 0.0]], [1.0, 1.0])
    sol = solve(problem)
    assert sol.status == "optimal"
    np.testing.assert_allclose(sol.x, [1.0, 0.0], atol=1e-9)


def test_semidefinite_unbounded_direction_capped():
    # zero curvature along x1; the bound fixes it
    problem = QpProblem(np.diag([1.0, 0.0]), [0.0, -1.0], [[0.0, 1.0]], [3.0])
    sol = solve(problem)
    np.testing.assert_allclose(sol.x, [0.0, 3.0], atol=1e-6)


def test_iteration_cap_reported():
    # the optimum needs two constraints added, which one iteration cannot do
    problem = QpProblem(np.eye(2), [-4.0, -4.0], np.eye(2), [1.0, 1.0])
    sol = solve(problem, max_iter=1)
    assert sol.status == "max_iter"
    assert np.all(problem.G @ sol.x <= problem.h + 1e-12)
    assert solve(problem).status == "optimal"


def test_rejects_indefinite_and_bad_shapes():
    with pytest.raises(ValueError):
        solve(QpProblem(np.diag([1.0, -1.0]), [0.0, 0.0]))
    with pytest.raises(ValueError):
        QpProblem(np.eye(2), [0.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        QpProblem([[1.0, 2.0], [0.0, 1.0]], [0.0, 0.0])
    with pytest.raises(ValueError):
        QpProblem(np.eye(2), [0.0, 0.0], np.ones((2, 2)), [1.0])


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), scale=st.floats(1e-3, 1e3))
def test_scale_invariance(seed, scale):
    problem = random_problem(np.random.default_rng(seed))
    scaled = QpProblem(problem.H * scale, problem.f * scale, problem.G, problem.h)
    np.testing.assert_allclose(solve(scaled).x, solve(problem).x, atol=1e-6)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_adding_constraint_never_lowers_objective(seed):
    rng = np.random.default_rng(seed)
    problem = random_problem(rng, p=int(rng.integers(0, 6)))
    x_feas = np.linalg.lstsq(problem.G, problem.h - 0.5, rcond=None)[0] if problem.p else np.zeros(problem.n)
    row = rng.normal(size=problem.n)
    more = QpProblem(problem.H, problem.f, np.vstack([problem.G, row]),
                     np.append(problem.h, row @ x_feas + abs(rng.normal())))
    base = solve(problem)
    tighter = solve(more)
    if tighter.status == "optimal":
        assert tighter.objective >= base.objective - 1e-9
        assert tighter.objective == pytest.approx(enumerate_qp(more)[0], abs=1e-6)


def test_deterministic():
    problem = random_problem(np.random.default_rng(9), n=4, p=8)
    a, b = solve(problem), solve(problem)
    assert a.x.tobytes() == b.x.tobytes()
    assert a.active == b.active
