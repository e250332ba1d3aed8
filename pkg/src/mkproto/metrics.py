"""Evaluation scores of a trained prototype model (IP, DR, Acc)."""

import json
from dataclasses import dataclass, field, asdict

import numpy as np


@dataclass
class PrototypeStats:
    assigned_class: int
    purity: float
    concentration: float
    dr_share: float = None


@dataclass
class EvalReport:
    ip: float
    dr: float
    acc: float
    per_prototype: list = field(default_factory=list)
    per_class_prototype_counts: list = field(default_factory=list)
    unused_prototypes: int = 0
    empty_prototypes: int = 0

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["per_prototype"] = [PrototypeStats(**p) for p in d.get("per_prototype", [])]
        return cls(**d)

    def to_text(self):
        """Flat ``key = value`` lines."""
        lines = [f"ip = {self.ip!r}", f"dr = {self.dr!r}", f"acc = {self.acc!r}",
                 f"unused_prototypes = {self.unused_prototypes}",
                 f"empty_prototypes = {self.empty_prototypes}"]
        for q, n in enumerate(self.per_class_prototype_counts):
            lines.append(f"prototypes_class_{q} = {n}")
        return "\n".join(lines) + "\n"


def assigned_classes(A, H):
    return np.argmax(H @ A, axis=0)


def prototype_purity(A, H):
    """``h^q a_i / ||H a_i||_1`` with ``q`` the assigned class; 0 for empty columns."""
    HA = H @ A
    total = np.abs(HA).sum(axis=0)
    top = HA.max(axis=0)
    return np.divide(top, total, out=np.zeros_like(top), where=total > 0)


def prototype_spread(A, K):
    """``sum_{s,t} a_s a_t ||phi(y_s) - phi(y_t)||^2`` per prototype."""
    d = np.diag(K)
    mass = A.sum(axis=0)
    return 2.0 * mass * (d @ A) - 2.0 * np.einsum("ij,ij->j", A, K @ A)


def metric_ip(A, H, K, return_details=False):
    """Interpretability score in percent.

    Each prototype contributes its class purity times ``exp(-spread)``;
    prototypes with no mass contribute 0.
    """
    A = np.asarray(A, dtype=float)
    purity = prototype_purity(A, H)
    conc = np.exp(-np.maximum(prototype_spread(A, K), 0.0))
    empty = A.sum(axis=0) == 0
    conc[empty] = 0.0
    ip = 100.0 * float(np.mean(purity * conc)) if A.shape[1] else 0.0
    if return_details:
        return ip, purity, conc, int(empty.sum())
    return ip


def metric_dr(A, H_train, X_test, H_test, return_details=False):
    """Discriminative representation in percent.

    For prototype ``i`` assigned to class ``q``: the share of its test-code
    mass that falls on class-``q`` samples.  Prototypes unused on the test
    set are left out of the mean.
    """
    X_test = np.asarray(X_test, dtype=float)
    q = assigned_classes(A, H_train)
    row_mass = np.abs(X_test).sum(axis=1)
    own = np.einsum("is,is->i", X_test, H_test[q])
    used = row_mass > 0
    if not used.any():
        raise ValueError("no prototype is used by the test codes")
    share = np.full(A.shape[1], np.nan)
    share[used] = own[used] / row_mass[used]
    dr = 100.0 * float(np.mean(share[used]))
    if return_details:
        return dr, share, int((~used).sum())
    return dr


def metric_acc(predictions, H_test):
    """Percentage of correct predictions; rejects count as wrong."""
    predictions = np.asarray(predictions)
    truth = np.argmax(H_test, axis=0)
    if predictions.shape != truth.shape:
        raise ValueError(f"{predictions.size} predictions for {truth.size} test samples")
    if truth.size == 0:
        raise ValueError("empty test set")
    return 100.0 * float(np.mean(predictions == truth))


def evaluate(A, K, H_train, X_test, H_test, predictions):
    ip, purity, conc, empty = metric_ip(A, H_train, K, return_details=True)
    dr, share, unused = metric_dr(A, H_train, X_test, H_test, return_details=True)
    acc = metric_acc(predictions, H_test)
    q = assigned_classes(A, H_train)
    per = [PrototypeStats(int(q[i]), float(purity[i]), float(conc[i]),
                          None if np.isnan(share[i]) else float(share[i]))
           for i in range(A.shape[1])]
    counts = np.bincount(q, minlength=H_train.shape[0]).tolist()
    return EvalReport(ip, dr, acc, per, counts, unused, empty)
