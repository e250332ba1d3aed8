"""
Training from kernel files
==========================

When the Gram matrices come from elsewhere (a string kernel, an alignment
kernel, ...) they can be written to the binary kernel format and fed in
directly.  Here we fake that with two Gaussian kernels on toy blobs plus one
kernel of pure noise, and check the noise kernel gets no weight.
"""

import tempfile
from pathlib import Path

import numpy as np

from mkproto.data import load_kernels, write_matrix
from mkproto.kernel import gaussian_base_kernels, one_hot
from mkproto.objective import HyperParams
from mkproto.optimizer import classify, encode, fit

rng = np.random.default_rng(1)
labels = np.repeat([0, 1, 2], 10)
centres = np.array([[0, 0], [3, 0], [0, 3]], dtype=float)
informative = centres[labels] + 0.5 * rng.standard_normal((30, 2))

K1, K2 = gaussian_base_kernels(np.stack([informative, informative[:, ::-1]]))
noise = rng.standard_normal((30, 5))
K3 = noise @ noise.T  # PSD but unrelated to the labels

tmp = Path(tempfile.mkdtemp())
paths = []
for name, K in [("k1", K1), ("k2", K2), ("k3", K3)]:
    write_matrix(K, tmp / f"{name}.bin")
    paths.append(tmp / f"{name}.bin")

# loading checks symmetry and PSD, then scales each kernel to unit diagonal
ks = load_kernels(paths)
print("diagonal of the noise kernel after loading:", np.diag(ks.kernels[2])[:3])

model = fit(ks, one_hot(labels), HyperParams(T=3), seed=0)
print("kernel weights:", np.round(model.weights, 4))

pred = classify(model, encode(model, ks.stack()))
print(f"training accuracy {100 * np.mean(pred == labels):.1f}%")
