"""Complete-data log-likelihood and the ICL model-selection criterion.

A model is scored by the complete-data log-likelihood at the estimated
parameters and hard clustering, minus an asymptotic penalty with two parts:
one counting the free mixture weights against group sizes and one counting
the free connection parameters against the total number of observable dyads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from scipy.special import gammaln

from .emissions import EmissionFamily, log_density_coeffs
from .errors import ValidationError
from .network import MultipartiteNetwork, block_pair_index_set, dyad_count

if TYPE_CHECKING:  # pragma: no cover
    from .vem import MbmParameters


@dataclass
class IclReport:
    complete_log_likelihood: float
    clustering_penalty: float
    edge_penalty: float
    penalty: float
    icl: float


def complete_log_likelihood(
    net: MultipartiteNetwork,
    params: "MbmParameters",
    labels: list[np.ndarray],
) -> float:
    """Log-likelihood of the data and one hard clustering under the parameters.

    Sums the mixture log-weights of every node plus, over each pair's dyad
    mask, the emission log-density at the labelled block pair.  Non-oriented
    within-group masks hold each unordered dyad once, so no term is counted
    twice.
    """
    k = params.k
    if len(labels) != net.n_groups:
        raise ValidationError("labels must cover every group")
    total = 0.0
    for g, pi, lab, kq in zip(net.groups, params.pi, labels, k):
        lab = np.asarray(lab, dtype=int)
        if lab.shape != (g.size,):
            raise ValidationError(f"labels for group {g.name!r} have shape {lab.shape}")
        if lab.size and (lab.min() < 0 or lab.max() >= kq):
            raise ValidationError(f"label out of range for group {g.name!r} (k={kq})")
        with np.errstate(divide="ignore"):
            total += float(np.log(pi[lab]).sum())
    for pair_idx, mat in enumerate(net.matrices):
        spec = mat.spec
        c0, c1, c2 = log_density_coeffs(
            spec.family, params.alpha[pair_idx], params.variance[pair_idx]
        )
        rows = np.asarray(labels[spec.source], dtype=int)
        cols = np.asarray(labels[spec.target], dtype=int)
        ii, jj = np.nonzero(mat.mask)
        x = mat.values[ii, jj]
        cell = c0[rows[ii], cols[jj]] + c1[rows[ii], cols[jj]] * x
        if c2 is not None:
            cell += c2[rows[ii], cols[jj]] * x * x
        total += float(cell.sum())
        if spec.family is EmissionFamily.POISSON:
            total -= float(gammaln(x + 1.0).sum())
    return total


def penalty_parts(net: MultipartiteNetwork, k: tuple[int, ...]) -> tuple[float, float]:
    """Clustering and connection-parameter parts of the complexity penalty."""
    if len(k) != net.n_groups or any(x < 1 for x in k):
        raise ValidationError(f"invalid block counts {k}")
    clustering = sum((kq - 1) * np.log(g.size) for kq, g in zip(k, net.groups))
    n_params = 0
    total_dyads = 0
    for mat in net.matrices:
        spec = mat.spec
        pairs = block_pair_index_set(spec, k[spec.source], k[spec.target])
        n_params += spec.family.parameter_dimension * len(pairs)
        total_dyads += dyad_count(net, (spec.source, spec.target))
    edge = n_params * (np.log(total_dyads) if total_dyads > 0 else 0.0)
    return 0.5 * float(clustering), 0.5 * float(edge)


def penalty(net: MultipartiteNetwork, k: tuple[int, ...]) -> float:
    """Asymptotic complexity penalty of the model with the given block counts."""
    clustering_pen, edge_pen = penalty_parts(net, k)
    return clustering_pen + edge_pen


def icl(
    net: MultipartiteNetwork,
    params: "MbmParameters",
    labels: list[np.ndarray],
) -> IclReport:
    """ICL report for fitted parameters and their hard clustering."""
    cll = complete_log_likelihood(net, params, labels)
    clustering_pen, edge_pen = penalty_parts(net, params.k)
    pen = clustering_pen + edge_pen
    return IclReport(
        complete_log_likelihood=cll,
        clustering_penalty=clustering_pen,
        edge_penalty=edge_pen,
        penalty=pen,
        icl=cll - pen,
    )
