"""Exact likelihood computations by exhaustive enumeration, for tiny instances.

The marginal likelihood sums the complete likelihood over every joint
assignment of nodes to blocks, so these routines are exponential in the node
counts and exist purely to verify the variational machinery on instances
small enough to enumerate.
"""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln, logsumexp

from .emissions import EmissionFamily, log_density_coeffs
from .errors import BudgetError
from .network import MultipartiteNetwork

DEFAULT_BUDGET = 10**6


def configuration_count(net: MultipartiteNetwork, k: tuple[int, ...]) -> int:
    """Number of joint label assignments for the given block counts."""
    total = 1
    for g, kq in zip(net.groups, k):
        total *= kq**g.size
    return total


def _enumerate_labels(net: MultipartiteNetwork, k: tuple[int, ...], budget: int):
    """All joint assignments in lexicographic order (last node varies fastest).

    Returns one (total, n_q) uint8 array per group.
    """
    total = configuration_count(net, k)
    if total > budget:
        raise BudgetError(
            f"{total} configurations exceed the enumeration budget of {budget}"
        )
    positions = [(q, i) for q, g in enumerate(net.groups) for i in range(g.size)]
    configs = np.arange(total, dtype=np.int64)
    labels = [np.empty((total, g.size), dtype=np.uint8) for g in net.groups]
    stride = 1
    for q, i in reversed(positions):
        kq = k[q]
        labels[q][:, i] = (configs // stride) % kq
        stride *= kq
    return labels


def _complete_ll_all(net: MultipartiteNetwork, params, labels) -> np.ndarray:
    """Complete log-likelihood of every enumerated assignment, vectorized."""
    total = labels[0].shape[0]
    ll = np.zeros(total)
    with np.errstate(divide="ignore"):
        log_pi = [np.log(pi) for pi in params.pi]
    for q, lab in enumerate(labels):
        ll += log_pi[q][lab].sum(axis=1)
    for pair_idx, mat in enumerate(net.matrices):
        spec = mat.spec
        c0, c1, c2 = log_density_coeffs(
            spec.family, params.alpha[pair_idx], params.variance[pair_idx]
        )
        src, tgt = labels[spec.source], labels[spec.target]
        for i, j in np.argwhere(mat.mask):
            x = mat.values[i, j]
            table = c0 + c1 * x
            if c2 is not None:
                table = table + c2 * x * x
            if spec.family is EmissionFamily.POISSON:
                table = table - float(gammaln(x + 1.0))
            ll += table[src[:, i], tgt[:, j]]
    return ll


def exact_log_likelihood(
    net: MultipartiteNetwork,
    params,
    max_configurations: int = DEFAULT_BUDGET,
) -> float:
    """Marginal log-likelihood by summing over every joint block assignment."""
    labels = _enumerate_labels(net, params.k, max_configurations)
    return float(logsumexp(_complete_ll_all(net, params, labels)))


def exact_posterior_marginals(
    net: MultipartiteNetwork,
    params,
    max_configurations: int = DEFAULT_BUDGET,
) -> list[np.ndarray]:
    """Exact per-node posterior block probabilities, one (n_q, k_q) array per group."""
    k = params.k
    labels = _enumerate_labels(net, k, max_configurations)
    ll = _complete_ll_all(net, params, labels)
    weights = np.exp(ll - logsumexp(ll))
    marginals = []
    for q, g in enumerate(net.groups):
        m = np.empty((g.size, k[q]))
        for i in range(g.size):
            m[i] = np.bincount(labels[q][:, i], weights=weights, minlength=k[q])
        m /= m.sum(axis=1, keepdims=True)
        marginals.append(m)
    return marginals
