"""Block-coordinate training of the prototype model.

One sweep recombines the base kernels, re-encodes every sample with NQP,
updates the prototype columns one at a time and finally moves the kernel
weights toward the best vertex of the weight LP.  Every step only accepts
changes that do not increase the total loss, so the recorded trace is
monotone.
"""

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .kernel import (combine, discrimination_kernel, labels_from_onehot,
                     neighbor_sets)
from .nqp import nqp_solve
from .objective import (HyperParams, LossBreakdown, dis_cost_vector, j_dis, j_ip, j_rec,
                        ls_cost_vector, rec_cost_vector)

log = logging.getLogger(__name__)

REJECT = -1
DESCENT_SLACK = 1e-6
NORM_TOL = 1e-8
SIMPLEX_TOL = 1e-10


class DescentError(RuntimeError):
    """The total loss went up during a sweep."""


class ConstraintError(RuntimeError):
    """A variable left its feasible set."""


@dataclass
class TrainedModel:
    prototypes: np.ndarray
    weights: np.ndarray
    hyper: HyperParams
    label_assignment: np.ndarray
    loss_trace: list
    codes: np.ndarray = None
    proto_gram: np.ndarray = None
    class_mass: np.ndarray = None
    n_classes: int = None
    final_loss: LossBreakdown = None
    converged: bool = False
    sweep_times: list = field(default_factory=list)
    source: dict = field(default_factory=dict)

    @property
    def n_sweeps(self):
        return len(self.loss_trace) - 1


# ---------------------------------------------------------------- helpers

def rkhs_norms(K, A):
    return np.sqrt(np.maximum(np.einsum("ij,ij->j", A, K @ A), 0.0))


def normalize_columns(K, A, X=None):
    """Scale prototypes to unit RKHS norm; rescale code rows so ``AX`` is kept."""
    s = rkhs_norms(K, A)
    live = s > 0
    A = A.copy()
    A[:, live] /= s[live]
    if X is None:
        return A
    X = X.copy()
    X[live] *= s[live, None]
    return A, X


def prototype_labels(A, H):
    """Class of each prototype: the class holding most of its mass."""
    return np.argmax(H @ A, axis=0)


def check_constraints(K, A, X, alpha, T, code_budget):
    if np.any(A < 0) or np.any(X < 0):
        raise ConstraintError("negative entries in A or X")
    if np.count_nonzero(A, axis=0).max(initial=0) > T:
        raise ConstraintError("a prototype exceeds the sparsity limit")
    if np.count_nonzero(X, axis=0).max(initial=0) > code_budget:
        raise ConstraintError("a code exceeds the sparsity limit")
    norms = np.einsum("ij,ij->j", A, K @ A)
    if np.any(np.abs(norms - 1.0) > NORM_TOL):
        raise ConstraintError(f"prototype norm off by {np.abs(norms - 1).max():.3g}")
    if np.any(alpha < 0) or abs(alpha.sum() - 1.0) > SIMPLEX_TOL:
        raise ConstraintError("kernel weights left the simplex")


def code_budget(T):
    """Codes are strictly sparser than ``T``."""
    return T - 1


# ---------------------------------------------------------------- init

def init(ks, H, hyper, seed=0):
    """Initial ``(A, X, alpha)`` with uniform kernel weights and zero codes.

    Prototype columns are split evenly across classes (``T`` each with the
    default ``m = c T``).  A column puts equal weight on ``min(T, n_q)``
    distinct samples of its class, then is scaled to unit RKHS norm.
    """
    H = np.asarray(H, dtype=float)
    c, N = H.shape
    hyper = hyper.resolved(c)
    counts = H.sum(axis=1)
    if np.any(counts == 0):
        raise ValueError(f"class {int(np.flatnonzero(counts == 0)[0])} has no samples")
    rng = np.random.default_rng(seed)
    alpha = np.full(ks.n_kernels, 1.0 / ks.n_kernels)
    K = combine(ks, alpha)
    labels = labels_from_onehot(H)
    owners = np.repeat(np.arange(c), [len(b) for b in np.array_split(np.arange(hyper.m), c)])
    A = np.zeros((N, hyper.m))
    for j, q in enumerate(owners):
        members = np.flatnonzero(labels == q)
        pick = rng.choice(members, size=min(hyper.T, members.size), replace=False)
        A[pick, j] = 1.0
    A = normalize_columns(K, A)
    X = np.zeros((hyper.m, N))
    return A, X, alpha


# ---------------------------------------------------------------- codes

def _encode(Q, C, budget, X_prev=None):
    X = np.zeros_like(C)
    for i in range(C.shape[1]):
        sol = nqp_solve(Q, C[:, i], budget)
        x = sol.x
        if X_prev is not None:
            old = X_prev[:, i]
            if 0.5 * old @ Q @ old + C[:, i] @ old < sol.objective:
                x = old
        X[:, i] = x
    return X


def update_codes(K, Kt, A, hyper, lambda_override=None, X_prev=None):
    """Re-encode every training sample against the current prototypes.

    Column ``i`` minimizes ``x^T A^T K A x + [lam Kt(i,:) - 2 K(i,:)] A x``
    over non-negative ``x`` with fewer than ``T`` non-zeros.  When
    ``X_prev`` is given a column keeps its previous code unless the new one
    is at least as good.
    """
    lam = hyper.lam if lambda_override is None else lambda_override
    Q = 2.0 * A.T @ K @ A
    Q = (Q + Q.T) / 2
    C = A.T @ (lam * Kt - 2.0 * K)
    return _encode(Q, C, code_budget(hyper.T), X_prev)


# ---------------------------------------------------------------- prototypes

def reconstruction_residuals(K, AX):
    KAX = K @ AX
    return np.diag(K) - 2.0 * np.diag(KAX) + np.einsum("ij,ij->j", AX, KAX)


def prototype_linear_term(K, Kt, AX_rest, x_row, lam, tau):
    """Linear coefficient of the single-prototype subproblem."""
    e = x_row - AX_rest @ x_row
    return -2.0 * (K @ e) + lam * (Kt @ x_row) + tau


def update_prototypes(K, Kt, H, A, X, hyper):
    """Sequentially refit each prototype column with NQP.

    For column ``i`` the loss reduces to ``||x^i||^2 a^T K a + c^T a``.  The
    NQP solution is rescaled to unit RKHS norm and kept only if it does not
    raise that objective.  Unused prototypes (all-zero code row) are moved
    onto the worst reconstructed samples.
    """
    A = A.copy()
    AX = A @ X
    residual = reconstruction_residuals(K, AX)
    spare = list(np.argsort(-residual, kind="stable"))
    Q = 2.0 * K
    for i in range(A.shape[1]):
        x_row = X[i]
        a_old = A[:, i]
        s2 = float(x_row @ x_row)
        AX_rest = AX - np.outer(a_old, x_row)
        if s2 == 0.0:
            c = np.full(K.shape[0], hyper.tau)
            cand = _one_hot_candidate(K, spare)
        else:
            c = prototype_linear_term(K, Kt, AX_rest, x_row, hyper.lam, hyper.tau)
            sol = nqp_solve(Q, c / s2, hyper.T)
            cand = sol.x if sol.support.size else _one_hot_candidate(K, spare)
        if cand is None:
            continue
        norm = np.sqrt(cand @ K @ cand)
        if not norm > 0:
            continue
        cand = cand / norm

        def g(a):
            return s2 * (a @ K @ a) + c @ a

        if g(cand) <= g(a_old):
            A[:, i] = cand
            AX = AX_rest + np.outer(cand, x_row)
    return A


def _one_hot_candidate(K, spare):
    while spare:
        j = spare.pop(0)
        if K[j, j] > 0:
            a = np.zeros(K.shape[0])
            a[j] = 1.0
            return a
    return None


# ---------------------------------------------------------------- weights

def update_weights(e_rec, e_dis, e_ls, hyper, alpha_prev, eta=None):
    """Damped step toward the minimizing vertex of the weight LP.

    The LP over the simplex is solved by the one-hot vector at the cheapest
    kernel (lowest index on ties); the returned weights blend it into
    ``alpha_prev`` with factor ``eta``.
    """
    eta = hyper.eta if eta is None else eta
    cost = np.asarray(e_rec) + hyper.lam * np.asarray(e_dis) + hyper.mu * np.asarray(e_ls)
    vertex = np.zeros_like(cost)
    vertex[int(np.argmin(cost))] = 1.0
    alpha = (1.0 - eta) * np.asarray(alpha_prev, dtype=float) + eta * vertex
    alpha = np.maximum(alpha, 0.0)
    return alpha / alpha.sum()


def weight_costs(ks, H, A, X, hyper, e_ls):
    return (rec_cost_vector(ks.kernels, A, X), dis_cost_vector(ks.kernels, H, A, X), e_ls)


# ---------------------------------------------------------------- fit

class _Problem:
    """Fixed quantities of one training run."""

    def __init__(self, ks, H, hyper, nbrs):
        self.ks = ks
        self.H = H
        self.hyper = hyper
        self.nbrs = nbrs
        self.e_ls = ls_cost_vector(ks.kernels, nbrs)
        self.stack = ks.stack()

    def kernel(self, alpha):
        return np.tensordot(alpha, self.stack, axes=1)

    def loss(self, alpha, A, X, K=None):
        K = self.kernel(alpha) if K is None else K
        return LossBreakdown.build(
            j_rec(K, A, X), j_dis(K, A, X, self.H), float(alpha @ self.e_ls),
            j_ip(self.H, A), self.hyper)


def _weight_step(prob, alpha, A, X, current, max_halvings=30):
    hyper = prob.hyper
    e_rec, e_dis, e_ls = weight_costs(prob.ks, prob.H, A, X, hyper, prob.e_ls)
    eta = hyper.eta
    for _ in range(max_halvings + 1):
        trial = update_weights(e_rec, e_dis, e_ls, hyper, alpha, eta)
        K = prob.kernel(trial)
        A_t, X_t = normalize_columns(K, A, X)
        loss = prob.loss(trial, A_t, X_t, K)
        if loss.total <= current.total:
            return trial, A_t, X_t, loss
        eta *= 0.5
    return alpha, A, X, current


def fit(ks, H, hyper=None, seed=0, callback=None, check=True):
    """Learn the prototype model from base kernels and labels.

    Parameters
    ----------
    ks : KernelSet
        Base kernels (unit diagonal); their stored weights are ignored.
    H : (c, N) one-hot label matrix
    hyper : HyperParams
    seed : int
        Seed of the prototype initialization.
    callback : callable, optional
        Called as ``callback(sweep, K, A, X, alpha, loss)`` after every sweep.
    check : bool
        Verify the feasibility constraints after every sweep.

    Raises
    ------
    DescentError
        If a sweep increases the total loss by more than the slack.
    """
    hyper = (hyper or HyperParams()).resolved(H.shape[0])
    if hyper.T < 2:
        raise ValueError("T must be at least 2 so that codes may be non-zero")
    H = np.asarray(H, dtype=float)
    if ks.n_samples != H.shape[1]:
        raise ValueError("label matrix and kernels disagree on the number of samples")
    A, X, alpha = init(ks, H, hyper, seed)
    nbrs = neighbor_sets(combine(ks, alpha), H, hyper.k)
    prob = _Problem(ks, H, hyper, nbrs)

    current = prob.loss(alpha, A, X)
    trace = [current]
    times = []
    converged = False
    for sweep in range(1, hyper.max_iters + 1):
        t0 = time.perf_counter()
        K = prob.kernel(alpha)
        Kt = discrimination_kernel(K, H)
        X = update_codes(K, Kt, A, hyper, X_prev=X)
        A = update_prototypes(K, Kt, H, A, X, hyper)
        after_ax = prob.loss(alpha, A, X, K)
        alpha, A, X, loss = _weight_step(prob, alpha, A, X, after_ax)
        times.append(time.perf_counter() - t0)

        prev = trace[-1].total
        if loss.total > prev + DESCENT_SLACK * max(1.0, abs(prev)):
            raise DescentError(f"sweep {sweep}: total loss rose from {prev:.10g} to {loss.total:.10g}")
        trace.append(loss)
        if check:
            check_constraints(prob.kernel(alpha), A, X, alpha, hyper.T, code_budget(hyper.T))
        if callback is not None:
            callback(sweep, prob.kernel(alpha), A, X, alpha, loss)
        log.debug("sweep %d: total %.8g", sweep, loss.total)
        if abs(prev - loss.total) < hyper.tol * max(1.0, prev):
            converged = True
            break

    alpha, A, X = _truncate_weights(alpha, A, X, prob, hyper.alpha_floor)
    K = prob.kernel(alpha)
    return TrainedModel(
        prototypes=A,
        weights=alpha,
        hyper=hyper,
        label_assignment=prototype_labels(A, H),
        loss_trace=trace,
        codes=X,
        proto_gram=A.T @ K @ A,
        class_mass=H @ A,
        n_classes=H.shape[0],
        final_loss=prob.loss(alpha, A, X, K),
        converged=converged,
        sweep_times=times,
    )


def _truncate_weights(alpha, A, X, prob, floor):
    if floor <= 0:
        return alpha, A, X
    alpha = np.where(alpha < floor, 0.0, alpha)
    alpha = alpha / alpha.sum()
    A, X = normalize_columns(prob.kernel(alpha), A, X)
    return alpha, A, X


# ---------------------------------------------------------------- test data

def encode(model, test_kernel_rows):
    """Sparse codes for test samples (discriminative term switched off).

    ``test_kernel_rows`` has shape ``(nu, M, N)`` (or ``(nu, N)`` for a
    single sample) holding ``K_l(y_test, Y)`` for every base kernel.
    Returns an ``(m, M)`` code matrix (``(m,)`` for a single sample).
    """
    rows = np.asarray(test_kernel_rows, dtype=float)
    single = rows.ndim == 2
    if single:
        rows = rows[:, None, :]
    nu, _, N = rows.shape
    if nu != model.weights.size:
        raise ValueError(f"expected rows for {model.weights.size} kernels, got {nu}")
    if N != model.prototypes.shape[0]:
        raise ValueError(f"kernel rows have length {N}, model was trained on {model.prototypes.shape[0]} samples")
    k_rows = np.tensordot(model.weights, rows, axes=1)  # (M, N)
    Q = 2.0 * model.proto_gram
    Q = (Q + Q.T) / 2
    C = -2.0 * (k_rows @ model.prototypes).T
    X = _encode(Q, C, code_budget(model.hyper.T))
    return X[:, 0] if single else X


def classify(model, x_test):
    """Class receiving the largest reconstruction mass, or ``REJECT``.

    Accepts a single code ``(m,)`` or a code matrix ``(m, M)``.
    """
    x_test = np.asarray(x_test, dtype=float)
    scores = model.class_mass @ x_test
    if x_test.ndim == 1:
        return REJECT if not np.any(x_test > 0) else int(np.argmax(scores))
    out = np.argmax(scores, axis=0)
    out[~np.any(x_test > 0, axis=0)] = REJECT
    return out
