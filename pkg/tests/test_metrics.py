import numpy as np
import pytest

from helpers import random_instance, random_params
from mbm.errors import ValidationError
from mbm.metrics import (
    adjusted_rand_index,
    aggregate_errors,
    align_labels,
    permute_parameters,
    recovery_report,
)


class TestAdjustedRandIndex:
    def test_identical(self):
        labels = np.array([0, 0, 1, 2, 2])
        assert adjusted_rand_index(labels, labels) == 1.0

    def test_relabeled_partition(self):
        a = np.array([0, 0, 1, 1, 2])
        b = np.array([2, 2, 0, 0, 1])
        assert adjusted_rand_index(a, b) == 1.0

    def test_hand_value_zero(self):
        # contingency [[2,0],[1,1]]: index 1, expected 1, max 2.5
        a = np.array([1, 1, 2, 2])
        b = np.array([1, 1, 1, 2])
        assert adjusted_rand_index(a, b) == pytest.approx(0.0, abs=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(70)
        for _ in range(20):
            n = int(rng.integers(3, 30))
            a = rng.integers(0, 4, n)
            b = rng.integers(0, 3, n)
            assert adjusted_rand_index(a, b) == pytest.approx(
                adjusted_rand_index(b, a), abs=1e-12
            )

    def test_invariant_to_relabeling(self):
        rng = np.random.default_rng(71)
        for _ in range(20):
            n = int(rng.integers(4, 30))
            a = rng.integers(0, 3, n)
            b = rng.integers(0, 3, n)
            perm = rng.permutation(3)
            assert adjusted_rand_index(a, b) == pytest.approx(
                adjusted_rand_index(perm[a], b), abs=1e-12
            )

    def test_single_cluster_convention(self):
        assert adjusted_rand_index(np.zeros(5, int), np.zeros(5, int)) == 1.0

    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            adjusted_rand_index(np.array([0, 1]), np.array([0, 1, 2]))

    def test_empty(self):
        with pytest.raises(ValidationError):
            adjusted_rand_index(np.array([]), np.array([]))

    def test_range(self):
        rng = np.random.default_rng(72)
        for _ in range(50):
            n = int(rng.integers(3, 40))
            a = rng.integers(0, 5, n)
            b = rng.integers(0, 5, n)
            value = adjusted_rand_index(a, b)
            assert -1.0 <= value <= 1.0


class TestAlignLabels:
    def test_identity(self):
        z = np.array([0, 1, 2, 0, 1])
        assert np.array_equal(align_labels(z, z, 3), np.arange(3))

    def test_recovers_known_permutation(self):
        rng = np.random.default_rng(73)
        for k in (2, 3, 5):
            true = rng.integers(0, k, 40)
            perm = rng.permutation(k)
            est = perm[true]  # estimated label j corresponds to true perm^{-1}[j]
            found = align_labels(true, est, k)
            assert np.array_equal(found[perm], np.arange(k))
            assert np.array_equal(found[est], true)

    def test_double_application_restores(self):
        rng = np.random.default_rng(74)
        net, params, _ = random_instance(rng, max_k=3)
        k = params.k
        perms = [rng.permutation(kq) for kq in k]
        inverse = [np.argsort(p) for p in perms]
        moved = permute_parameters(params, perms, net)
        restored = permute_parameters(moved, inverse, net)
        for a, b in zip(params.alpha, restored.alpha):
            assert np.array_equal(a, b)
        for a, b in zip(params.pi, restored.pi):
            assert np.array_equal(a, b)


class TestRecoveryReport:
    def test_mismatched_sizes_flagged(self):
        rng = np.random.default_rng(75)
        net, params, _ = random_instance(rng, q_count=2, max_k=2, allow_intra=False)
        other = random_params(rng, net, tuple(k + 1 for k in params.k))
        true_labels = [rng.integers(0, k, g.size) for g, k in zip(net.groups, params.k)]
        est_labels = [rng.integers(0, k + 1, g.size) for g, k in zip(net.groups, params.k)]
        report = recovery_report(net, params, other, true_labels, est_labels)
        assert not report.aligned
        assert report.alpha_errors is None

    def test_perfect_recovery(self):
        rng = np.random.default_rng(76)
        net, params, _ = random_instance(rng, max_k=3)
        k = params.k
        labels = [rng.integers(0, kq, g.size) for g, kq in zip(net.groups, k)]
        perms = [rng.permutation(kq) for kq in k]
        moved = permute_parameters(params, perms, net)
        moved_labels = [perm[lab] for perm, lab in zip(perms, labels)]
        report = recovery_report(net, params, moved, labels, moved_labels)
        assert all(a == 1.0 for a in report.ari)
        for grid in report.alpha_errors:
            assert np.allclose(grid, 0.0, atol=1e-12)


class TestAggregateErrors:
    def test_bias_and_rmse(self):
        grids = [np.array([[0.1, -0.1]]), np.array([[0.3, 0.1]])]
        bias, rmse = aggregate_errors(grids)
        assert np.allclose(bias, [[0.2, 0.0]])
        assert np.allclose(rmse, [[np.sqrt(0.05), 0.1]])
        assert (rmse**2 >= bias**2 - 1e-15).all()
