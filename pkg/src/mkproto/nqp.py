"""Non-negative Quadratic Pursuit.

Greedy solver for::

    min_x  0.5 * x^T Q x + c^T x    s.t.  x >= 0,  ||x||_0 <= T

with ``Q`` symmetric PSD.  Each iteration adds the coordinate with the most
negative gradient entry, solves the unconstrained problem on the active set
through an incrementally grown Cholesky factor and, if that leaves the
non-negative orthant, steps back to the nearest zero crossing.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

PIVOT_FLOOR = 1e-12
DEFAULT_EPS = 1e-10


class NotPSDError(ValueError):
    """Raised when the pivots show that ``Q`` is not positive semidefinite."""


@dataclass
class NqpSolution:
    x: np.ndarray
    support: np.ndarray
    objective: float
    iterations: int
    history: list = field(default_factory=list)
    supports: list = field(default_factory=list)


def quad_objective(Q, c, x):
    x = np.asarray(x, dtype=float)
    nz = np.flatnonzero(x)
    xs = x[nz]
    return float(0.5 * xs @ Q[np.ix_(nz, nz)] @ xs + np.asarray(c)[nz] @ xs)


def select_dimension(Q, c, x, candidates, scaled=False):
    """Candidate index with the most negative gradient entry, or ``None``.

    ``candidates`` is an iterable of indices (or a boolean mask).  Ties go to
    the lowest index.  With ``scaled=True`` the score is ``g_j / sqrt(q_jj)``,
    which ranks coordinates by the decrease ``g_j^2 / (2 q_jj)`` a single step
    along them would give; for a constant diagonal both rules agree.
    """
    c = np.asarray(c, dtype=float)
    x = np.asarray(x, dtype=float)
    cand = np.asarray(candidates)
    if cand.dtype == bool:
        cand = np.flatnonzero(cand)
    cand = np.sort(cand.astype(int))
    if cand.size == 0:
        return None
    nz = np.flatnonzero(x)
    grad = c[cand] + (Q[np.ix_(nz, cand)].T @ x[nz] if nz.size else 0.0)
    score = grad
    if scaled:
        score = grad / np.sqrt(np.maximum(np.diag(Q)[cand], PIVOT_FLOOR))
    best = int(np.argmin(score))
    if grad[best] >= 0:
        return None
    return int(cand[best])


def cholesky_extend(L, Q, active, j, floor=PIVOT_FLOOR):
    """Grow the Cholesky factor of ``Q[active][:, active]`` by index ``j``.

    Returns ``(L_new, pivot)``; ``L_new`` is ``None`` when the squared pivot
    ``q_jj - v^T v`` is at or below ``floor`` (numerically singular).
    """
    qjj = float(Q[j, j])
    if len(active) == 0:
        if qjj <= floor:
            return None, qjj
        return np.array([[np.sqrt(qjj)]]), qjj
    q = Q[np.asarray(active), j]
    v = solve_triangular(L, q, lower=True, check_finite=False)
    pivot = qjj - v @ v
    if pivot <= floor:
        return None, pivot
    k = L.shape[0]
    out = np.zeros((k + 1, k + 1))
    out[:k, :k] = L
    out[k, :k] = v
    out[k, k] = np.sqrt(pivot)
    return out, pivot


def cholesky_rebuild(Q, active, floor=PIVOT_FLOOR):
    L = None
    built = []
    for j in active:
        L, _ = cholesky_extend(L, Q, built, j, floor)
        if L is None:
            raise NotPSDError(f"active set became singular at index {j}")
        built.append(j)
    return L


def solve_active(L, c_active):
    """Minimizer ``-Q_II^{-1} c_I`` from the factor ``Q_II = L L^T``."""
    y = solve_triangular(L, -np.asarray(c_active, dtype=float), lower=True, check_finite=False)
    return solve_triangular(L.T, y, lower=False, check_finite=False)


def line_search_clamp(x_prev, x_new):
    """Step from ``x_prev`` toward ``x_new`` up to the first zero crossing.

    Returns the clamped point and the indices driven to zero.  If ``x_new`` is
    already non-negative it is returned unchanged with an empty index set.
    """
    x_prev = np.asarray(x_prev, dtype=float)
    x_new = np.asarray(x_new, dtype=float)
    neg = x_new < 0
    if not neg.any():
        return x_new.copy(), np.array([], dtype=int)
    ratios = x_prev[neg] / (x_prev[neg] - x_new[neg])
    theta = float(ratios.min())
    x = x_prev + theta * (x_new - x_prev)
    # coordinates at (or numerically at) the crossing
    hit = np.flatnonzero(neg)[ratios <= theta * (1 + 1e-12) + 1e-300]
    x[hit] = 0.0
    x[x < 0] = 0.0
    return x, hit


def nqp_solve(Q, c, T, eps=DEFAULT_EPS, reentry=True, floor=PIVOT_FLOOR, scaled=True):
    """Greedy sparse non-negative minimizer of ``0.5 x^T Q x + c^T x``.

    Parameters
    ----------
    Q : (n, n) symmetric PSD array
    c : (n,) array
    T : int
        Maximum number of non-zero entries.
    eps : float
        Stop once an iteration decreases the objective by less than ``eps``.
    reentry : bool
        Whether coordinates zeroed by the line search may be selected again
        later.  Disabling it follows the pursuit literally but can stop short
        of a local minimum.
    scaled : bool
        Rank candidates by gradient over ``sqrt(q_jj)`` instead of the raw
        gradient.  Makes the result invariant to rescaling coordinates.

    Returns
    -------
    NqpSolution
        ``history`` holds the objective after each completed iteration
        (starting with 0 at ``x = 0``); ``supports`` the active sets.
    """
    Q = np.asarray(Q, dtype=float)
    c = np.asarray(c, dtype=float)
    n = c.size
    if Q.shape != (n, n):
        raise ValueError(f"Q has shape {Q.shape}, expected {(n, n)}")
    if T < 0:
        raise ValueError("T must be non-negative")
    T = min(int(T), n)

    x = np.zeros(n)
    active = []
    L = None
    candidates = np.ones(n, dtype=bool)
    f = 0.0
    history = [0.0]
    supports = []
    iterations = 0
    negative_pivot = False

    while len(active) < T:
        # pick a descent coordinate, skipping numerically dependent ones
        blocked = np.zeros(n, dtype=bool)
        while True:
            j = select_dimension(Q, c, x, candidates & ~blocked, scaled)
            if j is None:
                break
            L_new, pivot = cholesky_extend(L, Q, active, j, floor)
            if L_new is not None:
                break
            if pivot < -1e-8 * max(1.0, abs(Q[j, j])):
                negative_pivot = True
            blocked[j] = True
        if j is None:
            if negative_pivot and not active:
                raise NotPSDError("Q is not positive semidefinite")
            break

        x_prev = x.copy()
        trial = active + [j]
        L = L_new
        x_new = np.zeros(n)
        x_new[trial] = solve_active(L, c[trial])
        candidates[j] = False
        x, zeroed = line_search_clamp(x_prev, x_new)
        active = trial
        while zeroed.size:
            # shrink the support and re-optimize on what is left
            drop = set(int(z) for z in zeroed)
            active = [a for a in active if a not in drop]
            if not reentry:
                candidates[list(drop)] = False
            else:
                candidates[list(drop)] = True
            if not active:
                L = None
                x[:] = 0.0
                break
            L = cholesky_rebuild(Q, active, floor)
            x_new = np.zeros(n)
            x_new[active] = solve_active(L, c[active])
            x, zeroed = line_search_clamp(x, x_new)

        f_new = quad_objective(Q, c, x)
        decrease = f - f_new
        if decrease <= 0:
            # no progress (e.g. a clamp at the starting point): keep the last iterate
            x = x_prev
            break
        iterations += 1
        f = f_new
        history.append(f)
        supports.append(tuple(sorted(active)))
        if decrease < eps:
            break

    support = np.flatnonzero(x)
    return NqpSolution(x, support, f, iterations, history, supports)
