"""Base Gram matrices and the label-aware quantities derived from them.

All kernels are dense ``(N, N)`` float arrays.  Labels are handled as a
one-hot ``(c, N)`` matrix ``H``.
"""

from dataclasses import dataclass, field

import numpy as np

SYM_RTOL = 1e-10
PSD_RTOL = 1e-8


def one_hot(labels, n_classes=None):
    """Return the ``(c, N)`` one-hot label matrix for 0-based ``labels``."""
    labels = np.asarray(labels, dtype=int)
    if labels.ndim != 1:
        raise ValueError("labels must be one-dimensional")
    if labels.size and labels.min() < 0:
        raise ValueError("labels must be non-negative class indices")
    if n_classes is None:
        n_classes = int(labels.max()) + 1 if labels.size else 0
    H = np.zeros((n_classes, labels.size))
    H[labels, np.arange(labels.size)] = 1.0
    return H


def labels_from_onehot(H):
    H = np.asarray(H)
    if not np.all(H.sum(axis=0) == 1) or not np.all((H == 0) | (H == 1)):
        raise ValueError("H must have exactly one 1 per column")
    return np.argmax(H, axis=0)


def check_gram(K, name="kernel", psd=True):
    """Validate symmetry (and optionally PSD-ness) of a Gram matrix.

    Raises ``ValueError`` naming ``name`` on failure; returns ``K`` as float.
    """
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError(f"{name}: expected a square matrix, got shape {K.shape}")
    scale = max(np.abs(K).max(), 1.0) if K.size else 1.0
    if not np.allclose(K, K.T, rtol=0.0, atol=SYM_RTOL * scale):
        raise ValueError(f"{name}: matrix is not symmetric")
    if psd and K.size:
        eig = np.linalg.eigvalsh((K + K.T) / 2)
        norm2 = max(np.abs(eig).max(), 1e-300)
        if eig[0] < -PSD_RTOL * norm2:
            raise ValueError(
                f"{name}: matrix is not positive semidefinite "
                f"(smallest eigenvalue {eig[0]:.3g})")
    return K


def _pairwise_sq_dists(block, other=None):
    # block: (N, L) rows are samples
    other = block if other is None else other
    sq = (np.sum(block ** 2, axis=1)[:, None] + np.sum(other ** 2, axis=1)[None, :]
          - 2.0 * block @ other.T)
    return np.maximum(sq, 0.0)


def _feature_blocks(data):
    """Yield an ``(N, L)`` sample-by-coordinate block per feature.

    ``data`` is ``(d, N)`` for scalar features or ``(d, N, L)`` when each
    feature is a series of length ``L``.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim == 2:
        return [row[:, None] for row in data]
    if data.ndim == 3:
        return list(data)
    raise ValueError(f"data must be 2-D (d, N) or 3-D (d, N, L), got {data.ndim}-D")


@dataclass
class GaussianKernelResult:
    kernels: list
    deltas: np.ndarray
    warnings: list = field(default_factory=list)


def gaussian_base_kernels(data, return_info=False):
    """One Gaussian kernel per feature, bandwidth = mean squared distance.

    Entry ``(s, t)`` of kernel ``i`` is ``exp(-||y_s^i - y_t^i||^2 / delta_i)``
    where ``delta_i`` averages the squared distances over all ``N**2``
    ordered pairs.  A constant feature (``delta_i == 0``) yields the all-ones
    matrix and is reported in ``warnings``.

    Returns a list of kernels, or a :class:`GaussianKernelResult` when
    ``return_info`` is true (the bandwidths are needed to build test rows).
    """
    blocks = _feature_blocks(data)
    if not blocks or blocks[0].shape[0] < 2:
        raise ValueError("need at least two samples")
    kernels, deltas, warnings = [], [], []
    for i, block in enumerate(blocks):
        sq = _pairwise_sq_dists(block)
        np.fill_diagonal(sq, 0.0)
        delta = sq.mean()
        if delta <= 0.0:
            warnings.append(f"feature {i} is constant; using the all-ones kernel")
            K = np.ones_like(sq)
        else:
            K = np.exp(-sq / delta)
            K = (K + K.T) / 2
            np.fill_diagonal(K, 1.0)
        kernels.append(K)
        deltas.append(delta)
    if return_info:
        return GaussianKernelResult(kernels, np.asarray(deltas), warnings)
    return kernels


def gaussian_kernel_rows(test_data, train_data, deltas):
    """Rows ``K_l(y_test, Y)`` of each Gaussian base kernel, shape ``(nu, M, N)``."""
    test_blocks = _feature_blocks(test_data)
    train_blocks = _feature_blocks(train_data)
    if len(test_blocks) != len(train_blocks) or len(deltas) != len(train_blocks):
        raise ValueError("test data, training data and bandwidths disagree on the feature count")
    rows = []
    for tb, yb, delta in zip(test_blocks, train_blocks, deltas):
        if tb.shape[1] != yb.shape[1]:
            raise ValueError("series length mismatch between test and training data")
        if delta <= 0.0:
            rows.append(np.ones((tb.shape[0], yb.shape[0])))
        else:
            rows.append(np.exp(-_pairwise_sq_dists(tb, yb) / delta))
    return np.stack(rows)


def normalize_kernel(K):
    """Cosine-normalize ``K`` so that its diagonal is exactly one."""
    K = np.asarray(K, dtype=float)
    d = np.diag(K).copy()
    bad = np.flatnonzero(d <= 0.0)
    if bad.size:
        raise ValueError(f"non-positive diagonal entry at index {bad[0]}")
    s = np.sqrt(d)
    out = K / s[:, None] / s[None, :]
    out = (out + out.T) / 2
    np.fill_diagonal(out, 1.0)
    return out


@dataclass
class KernelSet:
    """Base kernels ``K_1..K_nu`` plus simplex weights ``alpha``."""

    kernels: list
    weights: np.ndarray = None

    def __post_init__(self):
        self.kernels = [np.asarray(K, dtype=float) for K in self.kernels]
        if not self.kernels:
            raise ValueError("KernelSet needs at least one kernel")
        shape = self.kernels[0].shape
        for i, K in enumerate(self.kernels):
            if K.ndim != 2 or K.shape != shape or shape[0] != shape[1]:
                raise ValueError(f"kernel {i} has shape {K.shape}, expected {shape}")
        if self.weights is None:
            self.weights = np.full(len(self.kernels), 1.0 / len(self.kernels))
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.shape != (len(self.kernels),):
            raise ValueError("one weight per kernel required")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-10:
            raise ValueError("weights must lie on the probability simplex")

    @property
    def n_kernels(self):
        return len(self.kernels)

    @property
    def n_samples(self):
        return self.kernels[0].shape[0]

    def stack(self):
        return np.stack(self.kernels)

    def with_weights(self, weights):
        return KernelSet(self.kernels, weights)


def combine(ks, weights=None):
    """Weighted kernel ``sum_l alpha_l K_l``."""
    alpha = ks.weights if weights is None else np.asarray(weights, dtype=float)
    if alpha.shape != (ks.n_kernels,):
        raise ValueError("weight vector length does not match the number of kernels")
    return np.tensordot(alpha, ks.stack(), axes=1)


def same_class_mask(H):
    """``H^T H``: 1 where two samples share a label."""
    H = np.asarray(H, dtype=float)
    return H.T @ H


def discrimination_kernel(K, H):
    """``1 - (H^T H) * K`` (elementwise)."""
    K = np.asarray(K, dtype=float)
    M = same_class_mask(H)
    if M.shape != K.shape:
        raise ValueError(f"label matrix covers {M.shape[0]} samples, kernel has {K.shape[0]}")
    return 1.0 - M * K


@dataclass
class NeighborSets:
    same_label: list
    diff_label: list
    k_requested: int
    clipped: bool = False


def _top_k(values, idx, k):
    # largest kernel value first; stable sort keeps lower index on ties
    order = np.argsort(-values[idx], kind="stable")
    return [int(i) for i in idx[order[:k]]]


def neighbor_sets(K, H, k):
    """Same-label and different-label k-nearest neighbours in the RKHS.

    Nearness is measured by the kernel value (largest first), which for
    unit-diagonal kernels orders samples by feature-space distance.  Sets are
    clipped when a class is too small; ``clipped`` records that this happened.
    """
    K = np.asarray(K, dtype=float)
    labels = labels_from_onehot(H)
    N = K.shape[0]
    if labels.size != N:
        raise ValueError("label matrix and kernel disagree on the number of samples")
    same, diff = [], []
    clipped = False
    all_idx = np.arange(N)
    for i in range(N):
        same_idx = all_idx[(labels == labels[i]) & (all_idx != i)]
        diff_idx = all_idx[labels != labels[i]]
        if same_idx.size < k or diff_idx.size < k:
            clipped = True
        same.append(_top_k(K[i], same_idx, k))
        diff.append(_top_k(K[i], diff_idx, k))
    return NeighborSets(same, diff, k, clipped)
