"""Dataset input/output plus the synthetic series generator.

Kernel file layout (little-endian)::

    bytes 0-3    magic  b"MKGM"
    bytes 4-7    uint32 format version (1)
    bytes 8-15   uint64 number of rows
    bytes 16-23  uint64 number of columns
    bytes 24-    rows * cols float64 values, row-major

Training kernels are square; the same layout holds rectangular test-row
blocks ``K(y_test, Y)``.
"""

import csv
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .kernel import KernelSet, check_gram, normalize_kernel

KERNEL_MAGIC = b"MKGM"
KERNEL_VERSION = 1
_HEADER = struct.Struct("<4sIQQ")


class DataError(ValueError):
    """Malformed or inconsistent input data."""


@dataclass
class Dataset:
    """Samples with integer labels.

    ``features`` is ``(d, N)`` for vectorial data or ``(d, N, L)`` when every
    feature is a series of length ``L``.  ``labels`` are 0-based class
    indices; ``classes[q]`` is the original label of class ``q``.
    """

    features: np.ndarray
    labels: np.ndarray
    name: str = "dataset"
    classes: list = None
    indices: np.ndarray = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.features.ndim not in (2, 3):
            raise DataError("features must be (d, N) or (d, N, L)")
        if self.features.shape[1] != self.labels.size:
            raise DataError("feature and label counts differ")
        if self.classes is None:
            self.classes = list(range(int(self.labels.max()) + 1)) if self.labels.size else []
        if self.indices is None:
            self.indices = np.arange(self.labels.size)
        present = np.unique(self.labels)
        if present.size and (present.min() < 0 or present.max() >= len(self.classes)):
            raise DataError("labels outside the class range")

    @property
    def n_samples(self):
        return self.labels.size

    @property
    def n_classes(self):
        return len(self.classes)

    @property
    def n_features(self):
        return self.features.shape[0]

    def subset(self, idx, name=None):
        idx = np.asarray(idx, dtype=int)
        return Dataset(self.features[:, idx], self.labels[idx], name or self.name,
                       list(self.classes), self.indices[idx])


# ---------------------------------------------------------------- CSV

def _parse_label(text):
    try:
        v = float(text)
    except ValueError:
        return text
    return int(v) if v.is_integer() else v


def load_csv(path, label_column=-1, header=None):
    """Read one sample per row; ``label_column`` is an index or a header name.

    ``header=None`` treats the first row as a header when any of its
    feature cells is non-numeric.  Labels are remapped to ``0..c-1`` in
    sorted order of the original values (kept in ``Dataset.classes``).
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise DataError(f"{path}: empty file")
    names = None
    if header is None:
        header = isinstance(label_column, str) or any(
            _not_number(cell) for j, cell in enumerate(rows[0]) if j != _col(label_column, len(rows[0])))
    if header:
        names, rows = rows[0], rows[1:]
    if not rows:
        raise DataError(f"{path}: no data rows")
    width = len(rows[0])
    if isinstance(label_column, str):
        if names is None or label_column not in names:
            raise DataError(f"{path}: no column named {label_column!r}")
        lc = names.index(label_column)
    else:
        lc = _col(label_column, width)
    feats, raw = [], []
    start = 2 if header else 1
    for r, row in enumerate(rows, start=start):
        if len(row) != width:
            raise DataError(f"{path}: row {r} has {len(row)} cells, expected {width}")
        vals = []
        for j, cell in enumerate(row):
            if j == lc:
                continue
            cell = cell.strip()
            if cell == "" or cell.lower() in ("nan", "na"):
                raise DataError(f"{path}: missing value at row {r}, column {j + 1}")
            try:
                vals.append(float(cell))
            except ValueError:
                raise DataError(f"{path}: non-numeric value {cell!r} at row {r}, column {j + 1}") from None
        lab = row[lc].strip()
        if lab == "":
            raise DataError(f"{path}: missing label at row {r}")
        feats.append(vals)
        raw.append(_parse_label(lab))
    classes = sorted(set(raw), key=lambda v: (isinstance(v, str), v))
    lookup = {v: q for q, v in enumerate(classes)}
    labels = np.array([lookup[v] for v in raw])
    return Dataset(np.array(feats).T, labels, path.stem, classes)


def _col(label_column, width):
    if isinstance(label_column, str):
        return -1
    lc = label_column % width
    return lc


def _not_number(cell):
    try:
        float(cell)
    except ValueError:
        return True
    return False


def write_csv(ds, path, header=True):
    """Write vectorial data, label last; inverse of :func:`load_csv`."""
    if ds.features.ndim != 2:
        raise DataError("only (d, N) features can be written as CSV")
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow([f"f{i + 1}" for i in range(ds.n_features)] + ["label"])
        for s in range(ds.n_samples):
            w.writerow([repr(float(v)) for v in ds.features[:, s]] + [ds.classes[ds.labels[s]]])


# ---------------------------------------------------------------- kernels

def write_matrix(M, path):
    M = np.ascontiguousarray(M, dtype="<f8")
    if M.ndim != 2:
        raise DataError("only 2-D matrices can be written")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(KERNEL_MAGIC, KERNEL_VERSION, M.shape[0], M.shape[1]))
        fh.write(M.tobytes(order="C"))


def read_matrix(path):
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise DataError(f"{path}: truncated header")
        magic, version, rows, cols = _HEADER.unpack(head)
        if magic != KERNEL_MAGIC:
            raise DataError(f"{path}: bad magic {magic!r}")
        if version != KERNEL_VERSION:
            raise DataError(f"{path}: unsupported format version {version}")
        body = fh.read()
    if len(body) != rows * cols * 8:
        raise DataError(f"{path}: expected {rows * cols} values, found {len(body) // 8}")
    return np.frombuffer(body, dtype="<f8").reshape(rows, cols).astype(float)


def load_kernels(paths, normalize=True):
    """Read square Gram matrices; each is validated before cosine normalization."""
    kernels = []
    n = None
    for p in paths:
        K = read_matrix(p)
        try:
            K = check_gram(K, name=str(p))
        except ValueError as exc:
            raise DataError(str(exc)) from None
        if n is None:
            n = K.shape[0]
        elif K.shape[0] != n:
            raise DataError(f"{p}: {K.shape[0]} samples, previous files have {n}")
        kernels.append(normalize_kernel(K) if normalize else K)
    if not kernels:
        raise DataError("no kernel files given")
    return KernelSet(kernels)


# ---------------------------------------------------------------- synthetic

@dataclass
class SyntheticSpec:
    samples_per_class: int = 25
    series_length: int = 50
    noise_std: float = 0.1
    seed: int = 0


N_CLASSES = 4
N_FEATURES = 9
AMPLITUDE = 1.0

# Feature -> (family, parameter per class).  Features 1-6 carry the class.
CURVE_TABLE = {
    0: ("sine", (1.0, 2.0, 3.0, 4.0)),          # frequency
    1: ("square", (1.0, 1.5, 2.0, 2.5)),        # frequency
    2: ("ramp", (0.1, 0.3, 0.5, 0.7)),          # rise position
    3: ("bump", (0.2, 0.4, 0.6, 0.8)),          # centre
    4: ("sine", (0.0, 0.5, 1.0, 1.5)),          # phase / pi, frequency 2
    5: ("bump", (0.8, 0.6, 0.4, 0.2)),          # centre
}
SHARED_CURVE = ("sine", 0.5)  # features 8 and 9, identical for every sample


def _curve(family, param, t, feature):
    if family == "sine":
        if feature == 4:
            return np.sin(2 * np.pi * 2.0 * t + np.pi * param)
        return np.sin(2 * np.pi * param * t)
    if family == "square":
        return np.sign(np.sin(2 * np.pi * param * t + 1e-9))
    if family == "ramp":
        return np.clip((t - param) / 0.2, 0.0, 1.0)
    if family == "bump":
        return np.exp(-((t - param) ** 2) / (2 * 0.08 ** 2))
    raise ValueError(family)


def class_pattern(feature, cls, length):
    """Noise-free curve of ``feature`` (0-based, < 6) for class ``cls``."""
    t = np.linspace(0.0, 1.0, length)
    family, params = CURVE_TABLE[feature]
    return AMPLITUDE * _curve(family, params[cls], t, feature)


def synthesize(spec=None):
    """Four-class, nine-feature multivariate series.

    Features 1-6 follow class-specific curves plus Gaussian noise; feature 7
    is feature 6 with fresh noise added; features 8 and 9 are one fixed
    curve shared by all samples.  Returns a :class:`Dataset` with features
    of shape ``(9, 4 * samples_per_class, series_length)``.
    """
    spec = spec or SyntheticSpec()
    if spec.samples_per_class < 1 or spec.series_length < 1 or spec.noise_std < 0:
        raise ValueError("invalid synthetic spec")
    rng = np.random.default_rng(spec.seed)
    n, L = spec.samples_per_class, spec.series_length
    N = N_CLASSES * n
    labels = np.repeat(np.arange(N_CLASSES), n)
    F = np.empty((N_FEATURES, N, L))
    for f in range(6):
        for q in range(N_CLASSES):
            F[f, labels == q] = class_pattern(f, q, L)
    F[:6] += spec.noise_std * rng.standard_normal((6, N, L))
    F[6] = F[5] + spec.noise_std * rng.standard_normal((N, L))
    t = np.linspace(0.0, 1.0, L)
    shared = AMPLITUDE * np.sin(2 * np.pi * SHARED_CURVE[1] * t)
    F[7] = shared
    F[8] = shared
    return Dataset(F, labels, "synthetic", list(range(1, N_CLASSES + 1)))


# ---------------------------------------------------------------- splits

def split(ds, test_fraction=0.5, seed=0):
    """Stratified random train/test split, deterministic under ``seed``."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for q in range(ds.n_classes):
        members = np.flatnonzero(ds.labels == q)
        if members.size < 2:
            raise DataError(f"class {ds.classes[q]!r} has fewer than 2 samples")
        members = rng.permutation(members)
        n_test = min(max(1, int(math.floor(members.size * test_fraction + 0.5))), members.size - 1)
        test.extend(members[:n_test])
        train.extend(members[n_test:])
    return ds.subset(np.sort(train), ds.name + "-train"), ds.subset(np.sort(test), ds.name + "-test")
