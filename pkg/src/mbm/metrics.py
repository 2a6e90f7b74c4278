"""Clustering comparison and label alignment for parameter-recovery studies."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ValidationError
from .network import MultipartiteNetwork

# Exhaustive alignment search is exact and lexicographic up to this many blocks;
# larger problems use the assignment algorithm.
_EXHAUSTIVE_K = 8


def adjusted_rand_index(a, b) -> float:
    """Chance-corrected agreement between two partitions of the same items.

    Equals 1 for identical partitions up to relabeling, is near 0 for
    independent ones.  When both partitions consist of a single cluster the
    correction degenerates (0/0) and 1 is returned by convention.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValidationError("partitions must be 1-d arrays of equal length")
    if a.size == 0:
        raise ValidationError("partitions must be non-empty")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)

    def comb2(x):
        return x * (x - 1) / 2.0

    index = comb2(table).sum()
    sum_a = comb2(table.sum(axis=1)).sum()
    sum_b = comb2(table.sum(axis=0)).sum()
    expected = sum_a * sum_b / comb2(a.size)
    maximum = 0.5 * (sum_a + sum_b)
    if maximum == expected:
        return 1.0
    return float((index - expected) / (maximum - expected))


def align_labels(true_labels, est_labels, k: int) -> np.ndarray:
    """Permutation of estimated block labels that best matches the true ones.

    Returns ``perm`` with ``perm[j]`` the aligned index of estimated block
    ``j``, maximizing the label agreement.  Ties resolve to the
    lexicographically smallest permutation (exact for k <= 8).
    """
    true_labels = np.asarray(true_labels, dtype=int)
    est_labels = np.asarray(est_labels, dtype=int)
    if true_labels.shape != est_labels.shape:
        raise ValidationError("label vectors must have equal length")
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (est_labels, true_labels), 1)
    if k <= _EXHAUSTIVE_K:
        best, best_score = None, -1
        for perm in itertools.permutations(range(k)):
            score = confusion[np.arange(k), perm].sum()
            if score > best_score:
                best, best_score = perm, score
        return np.asarray(best, dtype=int)
    rows, cols = linear_sum_assignment(-confusion)
    perm = np.empty(k, dtype=int)
    perm[rows] = cols
    return perm


def permute_parameters(params, perms: list[np.ndarray], net: MultipartiteNetwork):
    """Relabel parameter grids by per-group block permutations.

    ``perms[q][j]`` is the new index of block ``j``; mixture weights and both
    axes of every grid touching the group move together.
    """
    from .vem import MbmParameters

    def permute_vector(v, perm):
        out = np.empty_like(v)
        out[perm] = v
        return out

    def permute_grid(grid, perm_src, perm_tgt):
        if grid is None:
            return None
        out = np.empty_like(grid)
        out[np.ix_(perm_src, perm_tgt)] = grid
        return out

    pi = [permute_vector(p, perm) for p, perm in zip(params.pi, perms)]
    alpha, variance, degenerate = [], [], []
    for pair_idx, mat in enumerate(net.matrices):
        ps, pt = perms[mat.spec.source], perms[mat.spec.target]
        alpha.append(permute_grid(params.alpha[pair_idx], ps, pt))
        variance.append(permute_grid(params.variance[pair_idx], ps, pt))
        if params.degenerate is not None:
            degenerate.append(permute_grid(params.degenerate[pair_idx], ps, pt))
    return MbmParameters(pi, alpha, variance, degenerate or None)


@dataclass
class RecoveryReport:
    """Per-group clustering agreement and aligned parameter errors for one fit."""

    ari: list[float]
    k_true: tuple[int, ...]
    k_est: tuple[int, ...]
    aligned: bool
    perms: list[np.ndarray] | None
    pi_errors: list[np.ndarray] | None
    alpha_errors: list[np.ndarray] | None


def recovery_report(
    net: MultipartiteNetwork,
    true_params,
    est_params,
    true_labels: list[np.ndarray],
    est_labels: list[np.ndarray],
) -> RecoveryReport:
    """Compare an estimated model against the generating truth.

    ARI is always reported.  Parameter errors require matching block counts
    in every group; otherwise the report is flagged unaligned and the error
    fields are left empty.
    """
    ari = [
        adjusted_rand_index(t, e) for t, e in zip(true_labels, est_labels)
    ]
    k_true = true_params.k
    k_est = est_params.k
    if k_true != k_est:
        return RecoveryReport(ari, k_true, k_est, False, None, None, None)
    perms = [
        align_labels(t, e, kq)
        for t, e, kq in zip(true_labels, est_labels, k_true)
    ]
    aligned = permute_parameters(est_params, perms, net)
    pi_errors = [a - t for a, t in zip(aligned.pi, true_params.pi)]
    alpha_errors = [a - t for a, t in zip(aligned.alpha, true_params.alpha)]
    return RecoveryReport(ari, k_true, k_est, True, perms, pi_errors, alpha_errors)


def aggregate_errors(error_grids: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Per-entry bias and root-mean-square error across replicates."""
    if not error_grids:
        raise ValidationError("no error grids to aggregate")
    stacked = np.stack(error_grids)
    bias = stacked.mean(axis=0)
    rmse = np.sqrt((stacked**2).mean(axis=0))
    return bias, rmse
