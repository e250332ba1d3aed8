"""Loss terms of the prototype-learning objective and their per-kernel costs.

Shapes: kernels ``(N, N)``, prototypes ``A`` ``(N, m)``, codes ``X``
``(m, N)``, labels ``H`` ``(c, N)``.  Kernels are assumed unit-diagonal
wherever the compact trace forms are used.
"""

from dataclasses import dataclass, asdict

import numpy as np

from .kernel import discrimination_kernel, same_class_mask


@dataclass
class HyperParams:
    lam: float = 0.3
    mu: float = 0.3
    tau: float = 0.3
    T: int = 5
    k: int = None
    m: int = None
    eta: float = 1.0
    max_iters: int = 100
    tol: float = 1e-5
    alpha_floor: float = 1e-4

    def __post_init__(self):
        for name in ("lam", "mu", "tau"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.T < 1:
            raise ValueError("T must be at least 1")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError("eta must lie in (0, 1]")

    def resolved(self, n_classes):
        """Copy with ``k = T`` and ``m = c * T`` filled in when unset."""
        k = self.T if self.k is None else self.k
        m = n_classes * self.T if self.m is None else self.m
        return HyperParams(**{**asdict(self), "k": k, "m": m})

    def to_dict(self):
        return asdict(self)


@dataclass
class LossBreakdown:
    rec: float
    dis: float
    ls: float
    ip: float
    total: float

    @classmethod
    def build(cls, rec, dis, ls, ip, hyper):
        total = rec + hyper.lam * dis + hyper.mu * ls + hyper.tau * ip
        return cls(float(rec), float(dis), float(ls), float(ip), float(total))

    def to_dict(self):
        return asdict(self)


def j_rec(K, A, X):
    """``||phi(Y) - phi(Y) A X||_F^2`` through the kernel trick."""
    KA = K @ A
    return float(np.trace(K) - 2.0 * np.sum(KA * X.T) + np.sum((A.T @ KA) * (X @ X.T)))


def j_dis(K, A, X, H, Kt=None):
    """Discriminative loss, equal to ``Tr(Kt A X)`` for unit-diagonal ``K``."""
    if np.any(A < 0) or np.any(X < 0):
        raise ValueError("A and X must be non-negative")
    if Kt is None:
        Kt = discrimination_kernel(K, H)
    return float(np.sum((Kt @ A) * X.T))


def j_dis_pairwise(K, A, X, H):
    """Half the double sum over samples of ``(a^s x_i) * Omega_si``.

    ``Omega`` uses the RKHS distance for same-class pairs and the label
    distance ``||h_i - h_s||^2`` otherwise; no unit-diagonal assumption.
    """
    if np.any(A < 0) or np.any(X < 0):
        raise ValueError("A and X must be non-negative")
    d = np.diag(K)
    same = same_class_mask(H)
    dist = d[:, None] + d[None, :] - 2.0 * K
    label_dist = 2.0 * (1.0 - same)
    omega = same * dist + label_dist
    # (A X)[s, i] = a^s x_i
    return float(0.5 * np.sum((A @ X) * omega))


def ls_cost_vector(kernels, nbrs):
    """Per-kernel local-separation costs (linear coefficients of ``alpha``)."""
    N = len(nbrs.same_label)
    rows_s = np.repeat(np.arange(N), [len(s) for s in nbrs.same_label])
    cols_s = np.fromiter((s for ss in nbrs.same_label for s in ss), dtype=int, count=rows_s.size)
    rows_d = np.repeat(np.arange(N), [len(s) for s in nbrs.diff_label])
    cols_d = np.fromiter((s for ss in nbrs.diff_label for s in ss), dtype=int, count=rows_d.size)
    out = np.empty(len(kernels))
    for l, K in enumerate(kernels):
        d = np.diag(K)
        same_term = np.sum(d[rows_s] + d[cols_s] - 2.0 * K[rows_s, cols_s])
        out[l] = same_term + np.sum(K[rows_d, cols_d])
    return out


def j_ls(ks, nbrs, weights=None):
    """Local-separation loss for the weighted kernel of ``ks``."""
    alpha = ks.weights if weights is None else np.asarray(weights)
    return float(alpha @ ls_cost_vector(ks.kernels, nbrs))


def j_ip(H, A):
    """Entrywise l1 norm of ``H A``."""
    if np.any(A < 0):
        raise ValueError("A must be non-negative")
    return float(np.abs(H @ A).sum())


def rec_cost_vector(kernels, A, X):
    AX = A @ X
    XX = X @ X.T
    out = np.empty(len(kernels))
    for l, K in enumerate(kernels):
        KA = K @ A
        out[l] = np.trace(K) - 2.0 * np.sum(K * AX.T) + np.sum((A.T @ KA) * XX)
    return out


def dis_cost_vector(kernels, H, A, X):
    AXt = (A @ X).T
    out = np.empty(len(kernels))
    for l, K in enumerate(kernels):
        out[l] = np.sum(discrimination_kernel(K, H) * AXt)
    return out


def loss_breakdown(ks, H, A, X, nbrs, hyper, ls_costs=None):
    """All four loss terms under the combined kernel of ``ks``."""
    K = np.tensordot(ks.weights, ks.stack(), axes=1)
    if ls_costs is None:
        ls_costs = ls_cost_vector(ks.kernels, nbrs)
    return LossBreakdown.build(
        j_rec(K, A, X),
        j_dis(K, A, X, H),
        float(ks.weights @ ls_costs),
        j_ip(H, A),
        hyper,
    )
