"""Variational EM for a fixed number of blocks per group.

The variational family makes node memberships independent, with one
row-stochastic weight matrix per group.  One outer iteration is a closed-form
parameter update followed by fixed-point membership sweeps; the objective is
the evidence lower bound (ELBO)

    -sum tau log tau + sum tau log pi + sum tau tau' f(x, alpha)

with the within-group sum split into off-diagonal and diagonal dyads (a node
paired with itself contributes tau_ik * f(x_ii, alpha_kk), not a product of
two weights).

Membership sweeps visit groups in index order using freshly updated values.
Nodes of a group without a within-group relation do not interact given the
other groups, so their rows update as one block; a group with a within-group
relation is swept node by node in index order.  Every update is an exact
coordinate maximization, which makes the outer ELBO trace non-decreasing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, xlogy

from . import criteria
from .emissions import BlockPairParameter, EmissionFamily, log_density_coeffs, mstep_grid
from .errors import ValidationError
from .network import MultipartiteNetwork

ModelSize = tuple[int, ...]


@dataclass
class MbmParameters:
    """Mixture weights per group and emission parameter grids per pair.

    ``alpha[p]`` has one row per source block and one column per target block
    of pair ``p``; for non-oriented within-group relations the grid is tied
    symmetric.  ``variance[p]`` is set for Gaussian pairs, ``degenerate[p]``
    flags grid cells that fell back to the matrix-wide estimate.
    """

    pi: list[np.ndarray]
    alpha: list[np.ndarray]
    variance: list[np.ndarray | None]
    degenerate: list[np.ndarray] | None = None

    @property
    def k(self) -> ModelSize:
        return tuple(len(p) for p in self.pi)


@dataclass
class VariationalAssignment:
    """Per-group row-stochastic membership weights."""

    tau: list[np.ndarray]

    @property
    def k(self) -> ModelSize:
        return tuple(t.shape[1] for t in self.tau)

    def map_labels(self) -> list[np.ndarray]:
        """Per-node argmax labels; ties resolve to the lowest block index."""
        return [np.argmax(t, axis=1) for t in self.tau]

    def copy(self) -> "VariationalAssignment":
        return VariationalAssignment([t.copy() for t in self.tau])


@dataclass
class FitResult:
    params: MbmParameters
    tau: VariationalAssignment
    elbo: float
    elbo_trace: np.ndarray
    map_clustering: list[np.ndarray]
    icl: float
    icl_report: "criteria.IclReport"
    converged: bool
    n_iterations: int

    @property
    def k(self) -> ModelSize:
        return self.params.k


# ---------------------------------------------------------------------------
# Precomputed per-network quantities shared by the ELBO, VE and M steps
# ---------------------------------------------------------------------------


class _PairContext:
    """Masked value products and dyad bookkeeping for one observation matrix."""

    def __init__(self, mat):
        spec = mat.spec
        self.source = spec.source
        self.target = spec.target
        self.family = spec.family
        self.intra = spec.is_intra
        self.oriented = spec.oriented
        gaussian = spec.family is EmissionFamily.GAUSSIAN
        x = mat.values
        if self.intra:
            off = mat.sym_mask().copy()
            np.fill_diagonal(off, False)
            self.mask = off.astype(float)
            diag = np.diagonal(mat.mask).copy()
            self.diag_idx = np.flatnonzero(diag)
            self.diag_x = x[self.diag_idx, self.diag_idx]
        else:
            self.mask = mat.mask.astype(float)
            self.diag_idx = np.empty(0, dtype=int)
            self.diag_x = np.empty(0)
        self.xm = x * self.mask
        self.x2m = (x * x) * self.mask if gaussian else None
        # Off-diagonal ELBO weight: non-oriented sums count each dyad twice.
        self.half = 0.5 if (self.intra and not self.oriented) else 1.0
        if spec.family is EmissionFamily.POISSON:
            self.const = -float(gammaln(x[mat.mask] + 1.0).sum())
        else:
            self.const = 0.0
        n_dyads = int(mat.mask.sum())
        if n_dyads:
            masked = x[mat.mask]
            self.fallback_mean = float(masked.mean())
            self.fallback_var = float(max(masked.var(), 1e-6)) if gaussian else None
        else:
            self.fallback_mean = 0.0
            self.fallback_var = 1.0 if gaussian else None


class _Context:
    def __init__(self, net: MultipartiteNetwork):
        self.net = net
        self.pairs = [_PairContext(m) for m in net.matrices]
        q_count = net.n_groups
        # (pair, role) incidences per group; role is "source", "target" or "intra".
        self.incident: list[list[tuple[_PairContext, str]]] = [[] for _ in range(q_count)]
        self.has_intra = [False] * q_count
        for ctx in self.pairs:
            if ctx.intra:
                self.incident[ctx.source].append((ctx, "intra"))
                self.has_intra[ctx.source] = True
            else:
                self.incident[ctx.source].append((ctx, "source"))
                self.incident[ctx.target].append((ctx, "target"))


def _get_context(net: MultipartiteNetwork, ctx: _Context | None) -> _Context:
    return ctx if ctx is not None and ctx.net is net else _Context(net)


def _pair_coeffs(params: MbmParameters, pair_idx: int, pctx: _PairContext):
    return log_density_coeffs(pctx.family, params.alpha[pair_idx], params.variance[pair_idx])


def _check_tau(net: MultipartiteNetwork, tau: VariationalAssignment) -> None:
    if len(tau.tau) != net.n_groups:
        raise ValidationError("membership weights must cover every group")
    for g, t in zip(net.groups, tau.tau):
        if t.ndim != 2 or t.shape[0] != g.size:
            raise ValidationError(f"membership shape {t.shape} does not match group {g.name!r}")


def _check_params(net: MultipartiteNetwork, params: MbmParameters) -> None:
    if len(params.pi) != net.n_groups or len(params.alpha) != len(net.matrices):
        raise ValidationError("parameter shapes do not match the network")
    k = params.k
    for mat, grid in zip(net.matrices, params.alpha):
        expect = (k[mat.spec.source], k[mat.spec.target])
        if grid.shape != expect:
            raise ValidationError(f"alpha grid {grid.shape} does not match block counts {expect}")


# ---------------------------------------------------------------------------
# ELBO
# ---------------------------------------------------------------------------


def _pair_moments(pctx: _PairContext, t_src: np.ndarray, t_tgt: np.ndarray):
    """Block-pair weight mass and weighted first/second moments of one matrix."""
    w = (t_src.T @ pctx.mask) @ t_tgt
    s1 = (t_src.T @ pctx.xm) @ t_tgt
    s2 = (t_src.T @ pctx.x2m) @ t_tgt if pctx.x2m is not None else None
    if pctx.intra:
        if not pctx.oriented:
            w = 0.5 * (w + w.T)
            s1 = 0.5 * (s1 + s1.T)
            if s2 is not None:
                s2 = 0.5 * (s2 + s2.T)
        if pctx.diag_idx.size:
            td = t_src[pctx.diag_idx]
            w = w + np.diag(td.sum(axis=0) / pctx.half)
            s1 = s1 + np.diag(td.T @ pctx.diag_x / pctx.half)
            if s2 is not None:
                s2 = s2 + np.diag(td.T @ (pctx.diag_x**2) / pctx.half)
    return w, s1, s2


def elbo(
    net: MultipartiteNetwork,
    params: MbmParameters,
    tau: VariationalAssignment,
    ctx: _Context | None = None,
) -> float:
    """Evidence lower bound at the given parameters and membership weights."""
    _check_tau(net, tau)
    _check_params(net, params)
    ctx = _get_context(net, ctx)
    total = 0.0
    for t, pi in zip(tau.tau, params.pi):
        total -= float(xlogy(t, t).sum())
        total += float(xlogy(t, pi[None, :]).sum())
    for pair_idx, pctx in enumerate(ctx.pairs):
        c0, c1, c2 = _pair_coeffs(params, pair_idx, pctx)
        w, s1, s2 = _pair_moments(pctx, tau.tau[pctx.source], tau.tau[pctx.target])
        part = float((c0 * w).sum() + (c1 * s1).sum())
        if c2 is not None:
            part += float((c2 * s2).sum())
        total += pctx.half * part + pctx.const
    return total


# ---------------------------------------------------------------------------
# VE step
# ---------------------------------------------------------------------------


def _external_scores(q, tau_list, log_pi, coeffs, ctx):
    """Membership log-scores of group q from relations with other groups,
    plus the diagonal terms of its within-group relation (fixed during sweeps)."""
    n = tau_list[q].shape[0]
    scores = np.broadcast_to(log_pi[q], (n, log_pi[q].size)).copy()
    for pctx, role in ctx.incident[q]:
        c0, c1, c2 = coeffs[id(pctx)]
        if role == "source":
            t = tau_list[pctx.target]
            scores += (pctx.mask @ t) @ c0.T + (pctx.xm @ t) @ c1.T
            if c2 is not None:
                scores += (pctx.x2m @ t) @ c2.T
        elif role == "target":
            t = tau_list[pctx.source]
            scores += (pctx.mask.T @ t) @ c0 + (pctx.xm.T @ t) @ c1
            if c2 is not None:
                scores += (pctx.x2m.T @ t) @ c2
        else:  # within-group relation: only its diagonal term is external
            if pctx.diag_idx.size:
                d = np.diagonal(c0) + np.diagonal(c1) * pctx.diag_x[:, None]
                if c2 is not None:
                    d = d + np.diagonal(c2) * (pctx.diag_x**2)[:, None]
                scores[pctx.diag_idx] += d
    return scores


def _normalize_rows(scores: np.ndarray) -> np.ndarray:
    scores = scores - scores.max(axis=1, keepdims=True)
    np.exp(scores, out=scores)
    scores /= scores.sum(axis=1, keepdims=True)
    return scores


def ve_step(
    net: MultipartiteNetwork,
    params: MbmParameters,
    tau: VariationalAssignment,
    inner_tol: float = 1e-4,
    max_inner: int = 50,
    ctx: _Context | None = None,
) -> VariationalAssignment:
    """Fixed-point membership update at fixed parameters.

    Sweeps stop when the largest absolute membership change falls below
    ``inner_tol`` or after ``max_inner`` sweeps.
    """
    _check_tau(net, tau)
    _check_params(net, params)
    ctx = _get_context(net, ctx)
    tau_list = [t.copy() for t in tau.tau]
    with np.errstate(divide="ignore"):
        log_pi = [np.log(pi) for pi in params.pi]
    coeffs = {
        id(pctx): _pair_coeffs(params, pair_idx, pctx)
        for pair_idx, pctx in enumerate(ctx.pairs)
    }
    for _ in range(max_inner):
        delta = 0.0
        for q in range(net.n_groups):
            ext = _external_scores(q, tau_list, log_pi, coeffs, ctx)
            if not ctx.has_intra[q]:
                new = _normalize_rows(ext)
                delta = max(delta, float(np.abs(new - tau_list[q]).max()))
                tau_list[q] = new
                continue
            intra = [(p, coeffs[id(p)]) for p, role in ctx.incident[q] if role == "intra"]
            t = tau_list[q]
            for i in range(t.shape[0]):
                s = ext[i].copy()
                for pctx, (c0, c1, c2) in intra:
                    s += c0 @ (pctx.mask[i] @ t) + c1 @ (pctx.xm[i] @ t)
                    if c2 is not None:
                        s += c2 @ (pctx.x2m[i] @ t)
                    if pctx.oriented:
                        s += c0.T @ (pctx.mask[:, i] @ t) + c1.T @ (pctx.xm[:, i] @ t)
                        if c2 is not None:
                            s += c2.T @ (pctx.x2m[:, i] @ t)
                row = _normalize_rows(s[None, :])[0]
                delta = max(delta, float(np.abs(row - t[i]).max()))
                t[i] = row
        if delta < inner_tol:
            break
    return VariationalAssignment(tau_list)


# ---------------------------------------------------------------------------
# M step
# ---------------------------------------------------------------------------


def m_step(
    net: MultipartiteNetwork,
    tau: VariationalAssignment,
    ctx: _Context | None = None,
) -> MbmParameters:
    """Closed-form parameter update at fixed membership weights."""
    _check_tau(net, tau)
    ctx = _get_context(net, ctx)
    pi = [t.mean(axis=0) for t in tau.tau]
    alpha, variance, degenerate = [], [], []
    for pctx in ctx.pairs:
        w, s1, s2 = _pair_moments(pctx, tau.tau[pctx.source], tau.tau[pctx.target])
        fallback = BlockPairParameter(pctx.fallback_mean, pctx.fallback_var)
        a, v, d = mstep_grid(s1, s2, w, pctx.family, fallback)
        alpha.append(a)
        variance.append(v)
        degenerate.append(d)
    return MbmParameters(pi, alpha, variance, degenerate)


# ---------------------------------------------------------------------------
# Outer loop
# ---------------------------------------------------------------------------


def init_from_clustering(
    net: MultipartiteNetwork,
    k: ModelSize,
    labels: list[np.ndarray],
    smoothing: float = 0.1,
) -> VariationalAssignment:
    """Membership weights concentrated on the given hard labels.

    Each row puts ``1 - smoothing`` on its label and spreads the rest evenly
    over the other blocks (all mass on the single block when k_q == 1).
    """
    if len(labels) != net.n_groups or len(k) != net.n_groups:
        raise ValidationError("labels and block counts must cover every group")
    tau = []
    for g, kq, lab in zip(net.groups, k, labels):
        lab = np.asarray(lab, dtype=int)
        if lab.shape != (g.size,):
            raise ValidationError(f"labels for group {g.name!r} have shape {lab.shape}")
        if lab.size and (lab.min() < 0 or lab.max() >= kq):
            raise ValidationError(f"label out of range for group {g.name!r} (k={kq})")
        if kq == 1:
            t = np.ones((g.size, 1))
        else:
            t = np.full((g.size, kq), smoothing / (kq - 1))
            t[np.arange(g.size), lab] = 1.0 - smoothing
        tau.append(t)
    return VariationalAssignment(tau)


def fit(
    net: MultipartiteNetwork,
    k: ModelSize,
    init: VariationalAssignment,
    tol: float = 1e-6,
    max_iter: int = 200,
    inner_tol: float = 1e-4,
    max_inner: int = 50,
    ctx: _Context | None = None,
) -> FitResult:
    """Run the variational EM to convergence from the given initial weights.

    Convergence is declared when the relative ELBO improvement
    ``|delta| / (|elbo| + 1)`` drops below ``tol``.  The run is deterministic:
    identical data, initialization and tolerances yield identical results.
    """
    k = tuple(int(x) for x in k)
    if len(k) != net.n_groups or any(x < 1 for x in k):
        raise ValidationError(f"invalid block counts {k}")
    _check_tau(net, init)
    if init.k != k:
        raise ValidationError(f"initial weights have block counts {init.k}, expected {k}")
    ctx = _get_context(net, ctx)
    tau = init
    trace = []
    params = None
    converged = False
    previous = None
    for _ in range(max_iter):
        params = m_step(net, tau, ctx)
        tau = ve_step(net, params, tau, inner_tol=inner_tol, max_inner=max_inner, ctx=ctx)
        value = elbo(net, params, tau, ctx)
        trace.append(value)
        if previous is not None and abs(value - previous) / (abs(value) + 1.0) < tol:
            converged = True
            break
        previous = value
    labels = tau.map_labels()
    report = criteria.icl(net, params, labels)
    return FitResult(
        params=params,
        tau=tau,
        elbo=trace[-1],
        elbo_trace=np.asarray(trace),
        map_clustering=labels,
        icl=report.icl,
        icl_report=report,
        converged=converged,
        n_iterations=len(trace),
    )
