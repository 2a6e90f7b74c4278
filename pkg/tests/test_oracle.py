import math

import numpy as np
import pytest

from helpers import make_group, random_instance, random_params, random_tau, tiny_bipartite
from mbm.criteria import complete_log_likelihood
from mbm.errors import BudgetError
from mbm.metrics import permute_parameters
from mbm.network import InteractionSpec, MultipartiteNetwork, ObservationMatrix
from mbm.emissions import EmissionFamily
from mbm.oracle import (
    configuration_count,
    exact_log_likelihood,
    exact_posterior_marginals,
)
from mbm.vem import MbmParameters, VariationalAssignment, elbo

EXACT_LL = math.log(0.1681)


class TestExactLogLikelihood:
    def test_single_configuration(self):
        net, params = tiny_bipartite()
        params = MbmParameters(
            pi=[np.array([1.0]), np.array([1.0])],
            alpha=[np.array([[0.3]])],
            variance=[None],
        )
        expected = complete_log_likelihood(net, params, [np.zeros(2, int), np.zeros(2, int)])
        assert exact_log_likelihood(net, params) == pytest.approx(expected, abs=1e-12)

    def test_hand_enumeration(self):
        net, params = tiny_bipartite()
        assert exact_log_likelihood(net, params) == pytest.approx(EXACT_LL, abs=1e-10)

    def test_upper_bounds_random_memberships(self):
        rng = np.random.default_rng(60)
        net, params = tiny_bipartite()
        ll = exact_log_likelihood(net, params)
        for _ in range(100):
            tau = VariationalAssignment(
                [rng.dirichlet(np.ones(2), 2), np.ones((2, 1))]
            )
            assert elbo(net, params, tau) <= ll + 1e-10

    def test_matches_direct_sum_on_random_instances(self):
        # independent check: brute force with itertools
        import itertools

        rng = np.random.default_rng(61)
        for _ in range(10):
            net, params, _ = random_instance(rng, max_size=3, max_k=2)
            if configuration_count(net, params.k) > 2000:
                continue
            terms = []
            ranges = [range(kq) for g, kq in zip(net.groups, params.k) for _ in range(g.size)]
            sizes = net.sizes
            for flat in itertools.product(*ranges):
                labels, pos = [], 0
                for n in sizes:
                    labels.append(np.asarray(flat[pos : pos + n], dtype=int))
                    pos += n
                terms.append(complete_log_likelihood(net, params, labels))
            expected = np.logaddexp.reduce(terms)
            assert exact_log_likelihood(net, params) == pytest.approx(expected, abs=1e-9)

    def test_relabeling_invariance(self):
        rng = np.random.default_rng(62)
        net, params, _ = random_instance(rng, max_size=3, max_k=2)
        base = exact_log_likelihood(net, params)
        perms = [rng.permutation(kq) for kq in params.k]
        permuted = permute_parameters(params, perms, net)
        assert exact_log_likelihood(net, permuted) == pytest.approx(base, abs=1e-9)

    def test_budget_error(self):
        spec = InteractionSpec(0, 1, EmissionFamily.BERNOULLI)
        net = MultipartiteNetwork(
            [make_group("a", 30), make_group("b", 30)],
            [ObservationMatrix(spec, np.zeros((30, 30)), np.ones((30, 30), bool))],
        )
        params = random_params(np.random.default_rng(0), net, (2, 2))
        with pytest.raises(BudgetError):
            exact_log_likelihood(net, params, max_configurations=10**5)


class TestExactPosteriorMarginals:
    def test_label_symmetry_gives_uniform(self):
        net, params = tiny_bipartite()
        params = MbmParameters(
            pi=[np.array([0.5, 0.5]), np.array([1.0])],
            alpha=[np.array([[0.4], [0.4]])],
            variance=[None],
        )
        marginals = exact_posterior_marginals(net, params)
        assert np.allclose(marginals[0], 0.5, atol=1e-12)

    def test_hand_normalized_value(self):
        net, params = tiny_bipartite()
        marginals = exact_posterior_marginals(net, params)
        assert marginals[0][0, 0] == pytest.approx(0.16605 / 0.1681, abs=1e-10)

    def test_rows_stochastic(self):
        rng = np.random.default_rng(63)
        for _ in range(10):
            net, params, _ = random_instance(rng, max_size=3, max_k=2)
            for m in exact_posterior_marginals(net, params):
                assert np.allclose(m.sum(axis=1), 1.0, atol=1e-12)
                assert (m >= 0).all()

    def test_kl_identity(self):
        # KL(mean-field || posterior) computed by enumeration equals the gap
        # between the exact log-likelihood and the bound.
        import itertools

        rng = np.random.default_rng(64)
        for _ in range(5):
            net, params, tau = random_instance(rng, max_size=3, max_k=2)
            if configuration_count(net, params.k) > 2000:
                continue
            ll = exact_log_likelihood(net, params)
            gap = ll - elbo(net, params, tau)
            kl = 0.0
            ranges = [range(kq) for g, kq in zip(net.groups, params.k) for _ in range(g.size)]
            for flat in itertools.product(*ranges):
                labels, pos = [], 0
                for n in net.sizes:
                    labels.append(np.asarray(flat[pos : pos + n], dtype=int))
                    pos += n
                log_r = sum(
                    math.log(tau.tau[q][i, z])
                    for q, lab in enumerate(labels)
                    for i, z in enumerate(lab)
                )
                log_post = complete_log_likelihood(net, params, labels) - ll
                kl += math.exp(log_r) * (log_r - log_post)
            assert kl >= -1e-10
            assert kl == pytest.approx(gap, abs=1e-8)
