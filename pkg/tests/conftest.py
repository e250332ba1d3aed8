import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def unit_gaussian_kernels(rng, n_kernels, n, dim=2):
    from mkproto.kernel import gaussian_base_kernels
    data = rng.standard_normal((n_kernels, n, dim))
    return gaussian_base_kernels(data)


@pytest.fixture
def small_problem(rng):
    """Eight samples, two classes, three Gaussian kernels."""
    from mkproto.kernel import KernelSet, one_hot
    labels = np.array([0, 0, 0, 0, 1, 1, 1, 1])
    ks = KernelSet(unit_gaussian_kernels(rng, 3, labels.size))
    return ks, one_hot(labels, 2), labels


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
