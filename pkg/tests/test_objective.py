import numpy as np
import pytest

from mkproto.kernel import KernelSet, combine, discrimination_kernel, neighbor_sets, one_hot
from mkproto.objective import (HyperParams, LossBreakdown, dis_cost_vector, j_dis, j_dis_pairwise,
                               j_ip, j_ls, j_rec, loss_breakdown, ls_cost_vector, rec_cost_vector)
from mkproto.optimizer import prototype_linear_term
from conftest import unit_gaussian_kernels
from oracles import dis_double_sum, prototype_loss_direct, rec_explicit


def random_factors(rng, N, m, density=0.5):
    A = rng.random((N, m)) * (rng.random((N, m)) < density)
    X = rng.random((m, N)) * (rng.random((m, N)) < density)
    return A, X


class TestHyperParams:
    def test_resolved_defaults(self):
        h = HyperParams(T=4).resolved(3)
        assert h.k == 4 and h.m == 12

    def test_explicit_values_kept(self):
        h = HyperParams(T=4, k=2, m=5).resolved(3)
        assert (h.k, h.m) == (2, 5)

    @pytest.mark.parametrize("field,value", [("lam", -1.0), ("T", 0), ("eta", 0.0), ("eta", 1.5)])
    def test_rejects_bad_values(self, field, value):
        with pytest.raises(ValueError):
            HyperParams(**{field: value})


class TestReconstruction:
    def test_perfect_self_reconstruction(self, rng):
        K = unit_gaussian_kernels(rng, 1, 6)[0]
        assert j_rec(K, np.eye(6), np.eye(6)) == pytest.approx(0.0, abs=1e-12)

    def test_zero_codes(self, rng):
        K = unit_gaussian_kernels(rng, 1, 6)[0]
        assert j_rec(K, rng.random((6, 3)), np.zeros((3, 6))) == pytest.approx(6.0)

    def test_matches_explicit_features(self, rng):
        for _ in range(10):
            K = unit_gaussian_kernels(rng, 1, 9)[0]
            A, X = random_factors(rng, 9, 4)
            assert j_rec(K, A, X) == pytest.approx(rec_explicit(K, A, X), abs=1e-9)


class TestDiscriminative:
    def test_same_class_identical_is_zero(self):
        K = np.ones((3, 3))
        H = one_hot([0, 0, 0])
        assert j_dis(K, np.eye(3), np.ones((3, 3)), H) == 0.0

    def test_single_cross_class_contribution(self):
        K = np.eye(2)
        H = one_hot([0, 1])
        A = np.array([[0.0], [1.0]])  # prototype on sample 1
        X = np.array([[0.7, 0.0]])    # used to rebuild sample 0
        assert j_dis(K, A, X, H) == pytest.approx(0.7)
        # the unhalved double sum counts the label distance 2 once
        assert 2 * j_dis_pairwise(K, A, X, H) == pytest.approx(1.4)

    def test_matches_double_sum(self, rng):
        for _ in range(20):
            K = unit_gaussian_kernels(rng, 1, 8)[0]
            labels = rng.integers(0, 3, 8)
            H = one_hot(labels, 3)
            A, X = random_factors(rng, 8, 5)
            ref = dis_double_sum(K, A, X, labels)
            assert j_dis(K, A, X, H) == pytest.approx(ref, abs=1e-9)
            assert j_dis_pairwise(K, A, X, H) == pytest.approx(ref, abs=1e-9)

    def test_negative_entries_rejected(self):
        with pytest.raises(ValueError):
            j_dis(np.eye(2), -np.eye(2), np.eye(2), one_hot([0, 1]))


class TestLocalSeparation:
    def test_ideal_separation_is_zero(self):
        labels = np.array([0, 0, 1, 1])
        K = (labels[:, None] == labels[None]).astype(float)
        nb = neighbor_sets(K, one_hot(labels), 1)
        assert j_ls(KernelSet([K]), nb) == 0.0

    def test_hand_arithmetic(self):
        # sample 0: same-label neighbour value 0.5, cross-label value 0.25
        K = np.array([[1.0, 0.5, 0.25], [0.5, 1.0, 0.0], [0.25, 0.0, 1.0]])
        nb = neighbor_sets(K, one_hot([0, 0, 1]), 1)
        costs = ls_cost_vector([K], nb)
        # i=0: (2 - 1) + 0.25; i=1: (2 - 1) + 0; i=2: no same-label, cross 0.25
        assert costs[0] == pytest.approx(1.25 + 1.0 + 0.25)

    def test_one_hot_weight_is_single_kernel(self, rng):
        kernels = unit_gaussian_kernels(rng, 3, 10)
        nb = neighbor_sets(kernels[0], one_hot(rng.integers(0, 2, 10), 2), 2)
        single = ls_cost_vector([kernels[1]], nb)[0]
        assert j_ls(KernelSet(kernels, [0.0, 1.0, 0.0]), nb) == pytest.approx(single)


class TestInterpretability:
    def test_zero(self):
        assert j_ip(one_hot([0, 1]), np.zeros((2, 3))) == 0.0

    def test_single_prototype(self):
        assert j_ip(one_hot([0, 1, 1]), np.array([[0.0], [1.0], [0.0]])) == 1.0

    def test_column_sums(self):
        A = np.array([[0.5, 1.0], [0.0, 0.5]])
        assert j_ip(one_hot([0, 1]), A) == pytest.approx(2.0)


class TestCostVectors:
    def test_zero_codes(self, rng):
        kernels = unit_gaussian_kernels(rng, 3, 5)
        np.testing.assert_allclose(rec_cost_vector(kernels, rng.random((5, 2)), np.zeros((2, 5))), 5.0)

    def test_linear_in_weights(self, rng):
        for _ in range(10):
            kernels = unit_gaussian_kernels(rng, 4, 9)
            labels = rng.integers(0, 3, 9)
            H = one_hot(labels, 3)
            alpha = rng.dirichlet(np.ones(4))
            K = combine(KernelSet(kernels, alpha))
            A, X = random_factors(rng, 9, 4)
            assert alpha @ rec_cost_vector(kernels, A, X) == pytest.approx(j_rec(K, A, X), abs=1e-9)
            assert alpha @ dis_cost_vector(kernels, H, A, X) == pytest.approx(j_dis(K, A, X, H), abs=1e-9)
            Kt_mix = sum(a * discrimination_kernel(Kl, H) for a, Kl in zip(alpha, kernels))
            np.testing.assert_allclose(discrimination_kernel(K, H), Kt_mix, atol=1e-12)


def test_loss_breakdown_weights_terms(small_problem):
    ks, H, labels = small_problem
    rng = np.random.default_rng(0)
    A, X = random_factors(rng, 8, 3)
    hyper = HyperParams(lam=0.5, mu=0.25, tau=2.0)
    nb = neighbor_sets(combine(ks), H, 2)
    lb = loss_breakdown(ks, H, A, X, nb, hyper)
    assert lb.total == pytest.approx(lb.rec + 0.5 * lb.dis + 0.25 * lb.ls + 2.0 * lb.ip)
    assert LossBreakdown(**lb.to_dict()) == lb


def test_prototype_subproblem_matches_direct_expansion(rng):
    """Replacing one column changes the loss by ``||x^i||^2 a^T K a + c^T a``."""
    lam, tau = 0.4, 0.3
    for _ in range(25):
        K = unit_gaussian_kernels(rng, 1, 6)[0]
        labels = rng.integers(0, 2, 6)
        H = one_hot(labels, 2)
        A, X = random_factors(rng, 6, 6, density=0.6)
        Kt = discrimination_kernel(K, H)
        i = int(rng.integers(0, 6))
        x_row = X[i]
        s2 = x_row @ x_row
        AX_rest = A @ X - np.outer(A[:, i], x_row)
        c = prototype_linear_term(K, Kt, AX_rest, x_row, lam, tau)

        def g(a):
            return s2 * a @ K @ a + c @ a

        a1, a2 = rng.random(6), rng.random(6)
        direct = (prototype_loss_direct(K, A, X, labels, i, a1, lam, tau)
                  - prototype_loss_direct(K, A, X, labels, i, a2, lam, tau))
        assert g(a1) - g(a2) == pytest.approx(direct, abs=1e-8)
