"""Dense primal active-set solver for small inequality-constrained QPs.

Problems have the form::

    minimize    0.5 x'Hx + f'x
    subject to  G x <= h
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["QpProblem", "QpSolution", "solve", "kkt_residual", "objective"]

_PSD_TOL = 1e-9
_REG = 1e-9


@dataclass(frozen=True, eq=False)
class QpProblem:
    H: np.ndarray
    f: np.ndarray
    G: np.ndarray = None
    h: np.ndarray = None

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.H, dtype=float))
        f = np.asarray(self.f, dtype=float).reshape(-1)
        n = f.shape[0]
        G = np.zeros((0, n)) if self.G is None else np.asarray(self.G, dtype=float).reshape(-1, n)
        h = np.zeros(0) if self.h is None else np.asarray(self.h, dtype=float).reshape(-1)
        if H.shape != (n, n):
            raise ValueError(f"H has shape {H.shape}, expected {(n, n)}")
        if G.shape[0] != h.shape[0]:
            raise ValueError("G and h have inconsistent row counts")
        if not np.allclose(H, H.T, rtol=1e-10, atol=1e-12 * max(1.0, np.abs(H).max(initial=0.0))):
            raise ValueError("H must be symmetric")
        object.__setattr__(self, "H", 0.5 * (H + H.T))
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "h", h)

    @property
    def n(self) -> int:
        return self.f.shape[0]

    @property
    def p(self) -> int:
        return self.h.shape[0]


@dataclass
class QpSolution:
    x: np.ndarray
    status: str  # "optimal" | "infeasible" | "max_iter"
    objective: float
    kkt_residual: float
    multipliers: np.ndarray
    active: tuple[int, ...] = ()
    iterations: int = 0
    info: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def objective(problem: QpProblem, x) -> float:
    x = np.asarray(x, dtype=float)
    return float(0.5 * x @ problem.H @ x + problem.f @ x)


def kkt_residual(problem: QpProblem, x, lam) -> float:
    """Largest violation among stationarity, primal/dual feasibility and complementarity."""
    x = np.asarray(x, dtype=float)
    lam = np.asarray(lam, dtype=float).reshape(-1)
    grad = problem.H @ x + problem.f + problem.G.T @ lam
    slack = problem.G @ x - problem.h
    terms = [np.max(np.abs(grad), initial=0.0),
             np.max(slack, initial=0.0),
             np.max(-lam, initial=0.0),
             np.max(np.abs(lam * slack), initial=0.0)]
    return float(max(terms))


def _kkt_solve(H, g, Gw):
    # [H  Gw'] [p  ]   [-g]
    # [Gw 0  ] [lam] = [ 0]
    n = H.shape[0]
    k = Gw.shape[0]
    if k == 0:
        return np.linalg.solve(H, -g), np.zeros(0)
    kkt = np.zeros((n + k, n + k))
    kkt[:n, :n] = H
    kkt[:n, n:] = Gw.T
    kkt[n:, :n] = Gw
    rhs = np.concatenate([-g, np.zeros(k)])
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        # dependent working rows (e.g. duplicated bounds)
        sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    return sol[:n], sol[n:]


def _active_set(H, f, G, h, x, tol, max_iter, working=()):
    """Primal active-set iterations from a feasible ``x``.

    Returns ``(x, working, lam_working, converged, iterations)``.
    """
    working = list(working)
    lam_w = np.zeros(len(working))
    full_step = False
    for it in range(1, max_iter + 1):
        g = H @ x + f
        p, lam_w = _kkt_solve(H, g, G[working])
        xscale = max(1.0, np.abs(x).max(initial=0.0))
        # after an unblocked full step x is the subspace minimiser; on an
        # ill-conditioned H the recomputed p is only roundoff
        if full_step or np.abs(p).max(initial=0.0) <= 1e-13 * xscale:
            full_step = False
            if len(working) == 0 or lam_w.min() >= -tol:
                return x, working, lam_w, True, it
            # drop the most negative multiplier (lowest index on ties)
            working.pop(int(np.argmin(lam_w)))
            continue
        gp = G @ p
        alpha = 1.0
        blocking = -1
        in_w = np.zeros(G.shape[0], dtype=bool)
        in_w[working] = True
        for i in np.flatnonzero((gp > 1e-14 * max(1.0, np.abs(p).max())) & ~in_w):
            step = max(0.0, (h[i] - G[i] @ x) / gp[i])
            if step < alpha:
                alpha = step
                blocking = i
        x = x + alpha * p
        if blocking >= 0:
            working.append(int(blocking))
        else:
            full_step = True
    # multipliers of the last solve belong to an older working set
    return x, working, np.zeros(len(working)), False, max_iter


def _phase_one(G, h, tol, max_iter):
    """Find a point with G x <= h, or report the smallest uniform violation.

    Solves min t + eps/2 (|x|^2 + t^2) s.t. Gx - t <= h, t >= 0 from the
    trivially feasible start x = 0.
    """
    p, n = G.shape
    eps = 1e-8
    Hp = eps * np.eye(n + 1)
    fp = np.zeros(n + 1)
    fp[-1] = 1.0
    Gp = np.zeros((p + 1, n + 1))
    Gp[:p, :n] = G
    Gp[:p, n] = -1.0
    Gp[p, n] = -1.0
    hp = np.concatenate([h, [0.0]])
    z0 = np.zeros(n + 1)
    z0[-1] = max(0.0, -h.min(initial=0.0)) + 1.0
    z, *_ = _active_set(Hp, fp, Gp, hp, z0, tol, max_iter)
    return z[:n], z[-1]


def solve(problem: QpProblem, tol: float = 1e-8, max_iter: int = 200) -> QpSolution:
    """Solve a convex QP; H is lifted by a tiny multiple of I when only semidefinite."""
    H, f, G, h = problem.H, problem.f, problem.G, problem.h
    n, p = problem.n, problem.p
    eig_min = float(np.linalg.eigvalsh(H)[0]) if n else 0.0
    if eig_min < -_PSD_TOL * max(1.0, np.abs(H).max(initial=0.0)):
        raise ValueError(f"H is not positive semidefinite (min eigenvalue {eig_min:.3g})")
    Hs = H + (_REG - min(eig_min, 0.0)) * np.eye(n) if eig_min < _PSD_TOL else H

    x0 = np.zeros(n)
    if p and np.max(G @ x0 - h) > tol:
        x0, violation = _phase_one(G, h, tol, max_iter)
        if violation > max(tol, 1e-7):
            lam = np.zeros(p)
            return QpSolution(x0, "infeasible", objective(problem, x0), kkt_residual(problem, x0, lam),
                              lam, info={"violation": float(violation)})
        h = h + max(violation, 0.0)

    # constraints satisfied with equality at the start are fine to leave out of the
    # initial working set; blocking logic picks them up when needed
    x, working, lam_w, converged, iters = _active_set(Hs, f, G, h, x0, tol, max_iter)
    lam = np.zeros(p)
    if working:
        lam[working] = lam_w
    res = kkt_residual(problem, x, lam)
    status = "optimal" if converged else "max_iter"
    return QpSolution(x, status, objective(problem, x), res, lam, tuple(sorted(working)), iters)
