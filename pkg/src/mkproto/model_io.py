"""Saving and loading trained models as versioned JSON.

The file holds the prototype matrix as sparse ``(row, col, value)``
triplets, the kernel weights, hyperparameters, per-prototype classes, the
loss trace and a ``source`` block describing how to rebuild kernel rows for
new samples:

* ``{"kind": "gaussian", "deltas": [...], "features": [...], "shape": [...]}``
  for per-feature Gaussian kernels (training features stored inline);
* ``{"kind": "files", "paths": [...]}`` for precomputed kernel files.

Floats are written with full precision, so save/load round trips exactly.
"""

import json
from pathlib import Path

import numpy as np

from .objective import HyperParams, LossBreakdown
from .optimizer import TrainedModel

FORMAT = "mkproto-model"
VERSION = 1


def model_to_dict(model, classes=None, train_labels=None):
    A = model.prototypes
    r, c = np.nonzero(A)
    source = {k: v for k, v in model.source.items()}
    for key, val in list(source.items()):
        if isinstance(val, np.ndarray):
            source[key] = val.tolist()
    return {
        "format": FORMAT,
        "version": VERSION,
        "n_samples": int(A.shape[0]),
        "n_prototypes": int(A.shape[1]),
        "n_classes": int(model.n_classes),
        "prototypes": {"rows": r.tolist(), "cols": c.tolist(), "values": A[r, c].tolist()},
        "weights": model.weights.tolist(),
        "hyper": model.hyper.to_dict(),
        "label_assignment": np.asarray(model.label_assignment).tolist(),
        "class_mass": np.asarray(model.class_mass).tolist(),
        "proto_gram": np.asarray(model.proto_gram).tolist(),
        "loss_trace": [l.to_dict() for l in model.loss_trace],
        "final_loss": model.final_loss.to_dict() if model.final_loss else None,
        "converged": bool(model.converged),
        "classes": list(classes) if classes is not None else list(range(model.n_classes)),
        "train_labels": np.asarray(train_labels).tolist() if train_labels is not None else None,
        "source": source,
    }


def model_from_dict(d):
    if d.get("format") != FORMAT:
        raise ValueError("not a model file")
    if d.get("version") != VERSION:
        raise ValueError(f"unsupported model version {d.get('version')}")
    A = np.zeros((d["n_samples"], d["n_prototypes"]))
    p = d["prototypes"]
    A[np.asarray(p["rows"], dtype=int), np.asarray(p["cols"], dtype=int)] = p["values"]
    model = TrainedModel(
        prototypes=A,
        weights=np.asarray(d["weights"], dtype=float),
        hyper=HyperParams(**d["hyper"]),
        label_assignment=np.asarray(d["label_assignment"], dtype=int),
        loss_trace=[LossBreakdown(**l) for l in d["loss_trace"]],
        proto_gram=np.asarray(d["proto_gram"], dtype=float),
        class_mass=np.asarray(d["class_mass"], dtype=float),
        n_classes=d["n_classes"],
        final_loss=LossBreakdown(**d["final_loss"]) if d.get("final_loss") else None,
        converged=d.get("converged", False),
        source=dict(d.get("source") or {}),
    )
    return model, d.get("classes"), d.get("train_labels")


def save_model(model, path, classes=None, train_labels=None):
    data = model_to_dict(model, classes, train_labels)
    Path(path).write_text(json.dumps(data, sort_keys=True))


def load_model(path):
    """Return ``(model, classes, train_labels)``."""
    return model_from_dict(json.loads(Path(path).read_text()))
