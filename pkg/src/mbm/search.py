"""Stepwise split/merge exploration of block counts, scored by ICL.

From a starting clustering the procedure repeatedly proposes, for every
group, one-block splits (one candidate per existing cluster) and pairwise
merges, refines each candidate by a full variational fit, and moves to the
highest-ICL model among the incumbent and the best split/merge per group.
It stops at a fixed point, so the accepted ICL sequence is strictly
increasing and the search terminates.

Candidate fits inside one iteration are independent; with ``workers > 1``
they run on a thread pool and are reduced in a fixed order, so results do
not depend on scheduling.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .network import MultipartiteNetwork
from .vem import (
    FitResult,
    ModelSize,
    VariationalAssignment,
    _Context,
    fit,
    init_from_clustering,
)

MAX_OUTER_ITERATIONS = 100


@dataclass
class SearchConfig:
    """Bounds, tolerances and seeding of one model search."""

    k_max: int | tuple[int, ...] = 10
    n_split_restarts: int = 1
    seed: int = 0
    smoothing: float = 0.1
    tol: float = 1e-6
    max_iter: int = 200
    inner_tol: float = 1e-4
    max_inner: int = 50
    workers: int = 1

    def bounds(self, n_groups: int) -> tuple[int, ...]:
        if isinstance(self.k_max, int):
            bounds = (self.k_max,) * n_groups
        else:
            bounds = tuple(int(x) for x in self.k_max)
        if len(bounds) != n_groups or any(b < 1 for b in bounds):
            raise ValidationError(f"invalid block-count bounds {bounds}")
        return bounds


@dataclass
class SearchMove:
    start_index: int
    iteration: int
    move: str  # "init", "split", "merge" or "stop"
    group: int | None
    k: ModelSize
    icl: float
    accepted: bool


@dataclass
class SearchTrace:
    moves: list[SearchMove] = field(default_factory=list)
    best_by_k: dict[ModelSize, FitResult] = field(default_factory=dict)

    def record_fit(self, result: FitResult) -> None:
        k = result.k
        incumbent = self.best_by_k.get(k)
        if incumbent is None or result.icl > incumbent.icl:
            self.best_by_k[k] = result


def _labels_key(k: ModelSize, labels: list[np.ndarray]) -> tuple:
    digest = hashlib.sha1()
    for lab in labels:
        digest.update(np.asarray(lab, dtype=np.int64).tobytes())
    return k, digest.hexdigest()


def connectivity_profiles(
    net: MultipartiteNetwork, tau: VariationalAssignment, q: int, ctx: _Context | None = None
) -> np.ndarray:
    """Expected connectivity of each node of group q toward every current block.

    One column per block of every relation side facing the group (both
    directions for an oriented within-group relation), concatenated over the
    matrices touching the group.  This is the geometry used to seed splits.
    """
    ctx = ctx if ctx is not None and ctx.net is net else _Context(net)
    chunks = []
    for pctx, role in ctx.incident[q]:
        sides = []
        if role in ("source", "intra"):
            other = tau.tau[pctx.target if role == "source" else q]
            sides.append((pctx.mask @ other, pctx.xm @ other))
        if role == "target" or (role == "intra" and pctx.oriented):
            other = tau.tau[pctx.source if role == "target" else q]
            sides.append((pctx.mask.T @ other, pctx.xm.T @ other))
        for weight, weighted_x in sides:
            profile = np.divide(
                weighted_x, weight, out=np.zeros_like(weighted_x), where=weight > 1e-12
            )
            chunks.append(profile)
    if not chunks:
        return np.zeros((net.groups[q].size, 1))
    return np.concatenate(chunks, axis=1)


def _bipartition(points: np.ndarray, init: tuple[int, int] | None = None) -> np.ndarray:
    """Two-means assignment of profile rows; deterministic farthest-pair
    seeding unless explicit initial center indices are given."""
    m = points.shape[0]
    if m <= 1:
        return np.zeros(m, dtype=int)
    if init is None:
        sq = ((points[:, None, :] - points[None, :, :]) ** 2).sum(axis=2)
        init = np.unravel_index(int(np.argmax(sq)), sq.shape)
        if init[0] == init[1]:
            init = (0, 1)
    centers = points[list(init)].astype(float)
    assign = np.zeros(m, dtype=int)
    for _ in range(100):
        d0 = ((points - centers[0]) ** 2).sum(axis=1)
        d1 = ((points - centers[1]) ** 2).sum(axis=1)
        new_assign = (d1 < d0).astype(int)
        if (new_assign == assign).all():
            break
        assign = new_assign
        for side in (0, 1):
            members = points[assign == side]
            if len(members):
                centers[side] = members.mean(axis=0)
    return assign


def split_candidates(
    net: MultipartiteNetwork,
    current: FitResult,
    q: int,
    config: SearchConfig | None = None,
    ctx: _Context | None = None,
) -> list[VariationalAssignment]:
    """One initialization per existing cluster of group q, bipartitioned in two.

    The split cluster's members are divided by two-means on their expected
    connectivity profiles; all other labels are kept, and the new cluster
    takes index ``k_q`` in a model with ``k_q + 1`` blocks for the group.
    """
    config = config or SearchConfig()
    k = current.k
    bounds = config.bounds(net.n_groups)
    if k[q] >= bounds[q]:
        raise ValidationError(f"group {q} already at its block-count bound {bounds[q]}")
    labels = current.map_clustering
    profiles = connectivity_profiles(net, current.tau, q, ctx)
    new_k = tuple(kq + 1 if g == q else kq for g, kq in enumerate(k))
    rng = np.random.default_rng(config.seed + 7919 * q)
    candidates = []
    for c in range(k[q]):
        members = np.flatnonzero(labels[q] == c)
        for restart in range(max(config.n_split_restarts, 1)):
            if restart == 0 or members.size < 2:
                side = _bipartition(profiles[members])
            else:
                pick = rng.choice(members.size, size=2, replace=False)
                side = _bipartition(profiles[members], init=(int(pick[0]), int(pick[1])))
            new_labels = [lab.copy() for lab in labels]
            new_labels[q][members[side == 1]] = k[q]
            candidates.append(
                init_from_clustering(net, new_k, new_labels, config.smoothing)
            )
    return candidates


def merge_candidates(
    net: MultipartiteNetwork,
    current: FitResult,
    q: int,
    config: SearchConfig | None = None,
) -> list[VariationalAssignment]:
    """One initialization per unordered cluster pair of group q, merged into one."""
    config = config or SearchConfig()
    k = current.k
    if k[q] <= 1:
        raise ValidationError(f"group {q} has a single cluster, nothing to merge")
    labels = current.map_clustering
    new_k = tuple(kq - 1 if g == q else kq for g, kq in enumerate(k))
    candidates = []
    for a in range(k[q]):
        for b in range(a + 1, k[q]):
            merged = labels[q].copy()
            merged[merged == b] = a
            merged[merged > b] -= 1
            new_labels = [lab.copy() for lab in labels]
            new_labels[q] = merged
            candidates.append(
                init_from_clustering(net, new_k, new_labels, config.smoothing)
            )
    return candidates


class _Engine:
    """Shared fit cache and evaluation helpers for one search run."""

    def __init__(self, net: MultipartiteNetwork, config: SearchConfig, trace: SearchTrace):
        self.net = net
        self.config = config
        self.trace = trace
        self.ctx = _Context(net)
        self.cache: dict[tuple, FitResult] = {}

    def _run_fit(self, init: VariationalAssignment) -> FitResult:
        cfg = self.config
        return fit(
            self.net,
            init.k,
            init,
            tol=cfg.tol,
            max_iter=cfg.max_iter,
            inner_tol=cfg.inner_tol,
            max_inner=cfg.max_inner,
            ctx=self.ctx,
        )

    def evaluate(self, inits: list[VariationalAssignment]) -> list[FitResult]:
        """Fit every initialization, deduplicated and reduced in input order."""
        keys = [_labels_key(init.k, init.map_labels()) for init in inits]
        pending: dict[tuple, VariationalAssignment] = {}
        for key, init in zip(keys, inits):
            if key not in self.cache and key not in pending:
                pending[key] = init
        order = list(pending.keys())
        if self.config.workers > 1 and len(order) > 1:
            with ThreadPoolExecutor(max_workers=self.config.workers) as pool:
                results = list(pool.map(self._run_fit, [pending[k] for k in order]))
        else:
            results = [self._run_fit(pending[k]) for k in order]
        for key, result in zip(order, results):
            self.cache[key] = result
            self.trace.record_fit(result)
        return [self.cache[key] for key in keys]

    def evaluate_labels(self, k: ModelSize, labels: list[np.ndarray]) -> FitResult:
        init = init_from_clustering(self.net, k, labels, self.config.smoothing)
        return self.evaluate([init])[0]


def _all_ones_start(net: MultipartiteNetwork) -> list[np.ndarray]:
    return [np.zeros(g.size, dtype=int) for g in net.groups]


def independent_start(
    net: MultipartiteNetwork, config: SearchConfig | None = None
) -> list[np.ndarray]:
    """Starting clustering obtained by searching each matrix on its own.

    Each matrix is fit as a stand-alone (co-)clustering problem; a group
    appearing in several matrices takes its labels from the matrix whose
    stand-alone search selected the most clusters for it (ties: first matrix
    in declaration order).  Deterministic given the configuration seed.
    """
    config = config or SearchConfig()
    bounds = config.bounds(net.n_groups)
    chosen_k = [1] * net.n_groups
    chosen_labels = [np.zeros(g.size, dtype=int) for g in net.groups]
    for pair_idx in range(len(net.matrices)):
        sub, kept = net.restrict(pair_idx)
        sub_config = SearchConfig(
            k_max=tuple(bounds[g] for g in kept),
            n_split_restarts=config.n_split_restarts,
            seed=config.seed,
            smoothing=config.smoothing,
            tol=config.tol,
            max_iter=config.max_iter,
            inner_tol=config.inner_tol,
            max_inner=config.max_inner,
            workers=config.workers,
        )
        best, _ = search(sub, sub_config, starts=[_all_ones_start(sub)])
        for sub_q, q in enumerate(kept):
            if best.k[sub_q] > chosen_k[q]:
                chosen_k[q] = best.k[sub_q]
                chosen_labels[q] = best.map_clustering[sub_q].copy()
    return chosen_labels


def search(
    net: MultipartiteNetwork,
    config: SearchConfig | None = None,
    starts: list[list[np.ndarray]] | None = None,
) -> tuple[FitResult, SearchTrace]:
    """Select block counts by stepwise split/merge moves from each start.

    Default starts are the all-ones model and the per-matrix stand-alone
    clusterings (the latter only when there is more than one matrix, since it
    is redundant otherwise).  Returns the best fit over all starts and the
    full trace.
    """
    config = config or SearchConfig()
    bounds = config.bounds(net.n_groups)
    if starts is None:
        starts = [_all_ones_start(net)]
        if len(net.matrices) > 1:
            starts.append(independent_start(net, config))
    if not starts:
        raise ValidationError("at least one start is required")
    trace = SearchTrace()
    engine = _Engine(net, config, trace)
    best_overall: FitResult | None = None

    for start_index, start_labels in enumerate(starts):
        k = tuple(
            min(int(np.max(lab)) + 1 if lab.size else 1, bounds[q])
            for q, lab in enumerate(start_labels)
        )
        labels = [np.minimum(lab, k[q] - 1) for q, lab in enumerate(start_labels)]
        current = engine.evaluate_labels(k, labels)
        trace.moves.append(
            SearchMove(start_index, 0, "init", None, current.k, current.icl, True)
        )
        for iteration in range(1, MAX_OUTER_ITERATIONS + 1):
            proposals: list[tuple[str, int, list[VariationalAssignment]]] = []
            for q in range(net.n_groups):
                if current.k[q] < bounds[q]:
                    proposals.append(
                        ("split", q, split_candidates(net, current, q, config, engine.ctx))
                    )
                if current.k[q] > 1:
                    proposals.append(("merge", q, merge_candidates(net, current, q, config)))
            flat = [init for _, _, cands in proposals for init in cands]
            fits = engine.evaluate(flat)
            best_record: SearchMove | None = None
            best_fit: FitResult | None = None
            cursor = 0
            for move, q, cands in proposals:
                batch = fits[cursor : cursor + len(cands)]
                cursor += len(cands)
                if not batch:
                    continue
                top = max(batch, key=lambda r: r.icl)
                record = SearchMove(start_index, iteration, move, q, top.k, top.icl, False)
                trace.moves.append(record)
                if best_fit is None or top.icl > best_fit.icl:
                    best_record, best_fit = record, top
            if best_fit is None or best_fit.icl <= current.icl:
                trace.moves.append(
                    SearchMove(
                        start_index, iteration, "stop", None, current.k, current.icl, True
                    )
                )
                break
            best_record.accepted = True
            current = best_fit
        if best_overall is None or current.icl > best_overall.icl:
            best_overall = current
    return best_overall, trace
