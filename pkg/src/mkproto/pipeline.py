"""Train/evaluate glue used by the command line and the demo scripts."""

import time
from dataclasses import dataclass

import numpy as np

from . import data as _data
from .kernel import KernelSet, combine, gaussian_base_kernels, gaussian_kernel_rows, one_hot
from .metrics import evaluate
from .objective import HyperParams
from .optimizer import classify, encode, fit


def gaussian_kernels(ds):
    """Per-feature Gaussian kernels of ``ds`` plus the source block to rebuild rows."""
    info = gaussian_base_kernels(ds.features, return_info=True)
    source = {"kind": "gaussian", "deltas": info.deltas.tolist(),
              "features": ds.features.tolist(), "warnings": info.warnings}
    return KernelSet(info.kernels), source


def kernel_rows(source, test_features):
    """Base-kernel rows ``(nu, M, N)`` between new samples and the training set."""
    if source.get("kind") != "gaussian":
        raise ValueError("kernel rows from raw features need a Gaussian-kernel model")
    return gaussian_kernel_rows(test_features, np.asarray(source["features"]), source["deltas"])


def training_kernels(source):
    if source.get("kind") == "gaussian":
        return KernelSet(gaussian_base_kernels(np.asarray(source["features"])))
    if source.get("kind") == "files":
        return _data.load_kernels(source["paths"])
    raise ValueError(f"unknown kernel source {source.get('kind')!r}")


def train(ds, hyper=None, seed=0):
    ks, source = gaussian_kernels(ds)
    model = fit(ks, one_hot(ds.labels, ds.n_classes), hyper, seed=seed)
    model.source = source
    return model, ks


def evaluate_model(model, ks, H_train, test_rows, test_labels):
    X_test = encode(model, test_rows)
    pred = classify(model, X_test)
    K = combine(ks, model.weights)
    H_test = one_hot(test_labels, H_train.shape[0])
    return evaluate(model.prototypes, K, H_train, X_test, H_test, pred), pred, X_test


@dataclass
class RunResult:
    seed: int
    model: object
    report: object
    seconds: float


def run_split(ds, hyper=None, seed=0, test_fraction=0.5):
    """Split ``ds`` with ``seed``, train on one part and evaluate on the other."""
    t0 = time.perf_counter()
    tr, te = _data.split(ds, test_fraction, seed)
    model, ks = train(tr, hyper, seed)
    rows = kernel_rows(model.source, te.features)
    report, _, _ = evaluate_model(model, ks, one_hot(tr.labels, ds.n_classes), rows, te.labels)
    return RunResult(seed, model, report, time.perf_counter() - t0)


def run_synthetic(seeds=range(5), spec=None, hyper=None, test_fraction=0.5):
    """Run the synthetic experiment once per seed on freshly generated data."""
    spec = spec or _data.SyntheticSpec()
    results = []
    for seed in seeds:
        ds = _data.synthesize(_data.SyntheticSpec(spec.samples_per_class, spec.series_length,
                                                  spec.noise_std, seed))
        results.append(run_split(ds, hyper or HyperParams(), seed, test_fraction))
    return results
