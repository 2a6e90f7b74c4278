"""Shared builders for randomized test instances."""

from __future__ import annotations

import numpy as np

from mbm.emissions import EmissionFamily
from mbm.network import (
    FunctionalGroup,
    InteractionSpec,
    MultipartiteNetwork,
    ObservationMatrix,
    _build_mask,
)
from mbm.vem import MbmParameters, VariationalAssignment

FAMILIES = (EmissionFamily.BERNOULLI, EmissionFamily.POISSON, EmissionFamily.GAUSSIAN)


def make_group(name: str, n: int) -> FunctionalGroup:
    return FunctionalGroup(name, tuple(f"{name}{i:03d}" for i in range(n)))


def random_matrix(rng, spec: InteractionSpec, n: int, m: int) -> ObservationMatrix:
    mask = _build_mask(spec, n, m)
    if spec.family is EmissionFamily.BERNOULLI:
        values = rng.integers(0, 2, (n, m)).astype(float)
    elif spec.family is EmissionFamily.POISSON:
        values = rng.poisson(2.0, (n, m)).astype(float)
    else:
        values = rng.normal(0.0, 1.0, (n, m))
    if spec.is_intra and not spec.oriented:
        values = np.triu(values) + np.triu(values, 1).T
        values = values * (mask | mask.T)
    else:
        values = values * mask
    return ObservationMatrix(spec, values, mask)


def random_params(rng, net: MultipartiteNetwork, k: tuple[int, ...]) -> MbmParameters:
    pi = [rng.dirichlet(np.ones(kq)) for kq in k]
    alpha, variance = [], []
    for mat in net.matrices:
        spec = mat.spec
        ka, kb = k[spec.source], k[spec.target]
        if spec.family is EmissionFamily.BERNOULLI:
            grid = rng.uniform(0.05, 0.95, (ka, kb))
        elif spec.family is EmissionFamily.POISSON:
            grid = rng.uniform(0.2, 4.0, (ka, kb))
        else:
            grid = rng.normal(0.0, 1.0, (ka, kb))
        if spec.is_intra and not spec.oriented:
            grid = (grid + grid.T) / 2.0
        alpha.append(grid)
        if spec.family is EmissionFamily.GAUSSIAN:
            var = rng.uniform(0.3, 2.0, (ka, kb))
            if spec.is_intra and not spec.oriented:
                var = (var + var.T) / 2.0
            variance.append(var)
        else:
            variance.append(None)
    return MbmParameters(pi, alpha, variance)


def random_tau(rng, net: MultipartiteNetwork, k: tuple[int, ...]) -> VariationalAssignment:
    return VariationalAssignment(
        [rng.dirichlet(np.ones(kq), g.size) for g, kq in zip(net.groups, k)]
    )


def random_instance(
    rng,
    q_count: int | None = None,
    min_size: int = 2,
    max_size: int = 5,
    max_k: int = 3,
    families=FAMILIES,
    allow_intra: bool = True,
):
    """Random network + parameters + membership weights with mixed relations."""
    q_count = q_count or int(rng.integers(1 if allow_intra else 2, 4))
    sizes = [int(x) for x in rng.integers(min_size, max_size + 1, q_count)]
    groups = [make_group(f"g{q}", n) for q, n in enumerate(sizes)]
    possible = [(a, b) for a in range(q_count) for b in range(q_count) if a < b]
    if allow_intra:
        possible = [(q, q) for q in range(q_count)] + possible
    chosen = [p for p in possible if rng.random() < 0.6] or [possible[int(rng.integers(len(possible)))]]
    matrices = []
    for a, b in chosen:
        family = families[int(rng.integers(len(families)))]
        oriented = bool(rng.integers(0, 2)) if a == b else True
        loops = bool(rng.integers(0, 2)) if a == b else False
        spec = InteractionSpec(a, b, family, oriented=oriented, self_loops=loops)
        matrices.append(random_matrix(rng, spec, sizes[a], sizes[b]))
    net = MultipartiteNetwork(groups, matrices)
    k = tuple(int(x) for x in rng.integers(1, max_k + 1, q_count))
    return net, random_params(rng, net, k), random_tau(rng, net, k)


def tiny_bipartite():
    """The 2x2 reference instance: K=(2,1), pi=(1/2,1/2), alpha=((0.9),(0.1)),
    X = [[1,1],[0,0]].  Exact marginal likelihood 0.1681 by enumeration."""
    g1 = make_group("rows", 2)
    g2 = make_group("cols", 2)
    spec = InteractionSpec(0, 1, EmissionFamily.BERNOULLI)
    x = np.array([[1.0, 1.0], [0.0, 0.0]])
    net = MultipartiteNetwork(
        [g1, g2], [ObservationMatrix(spec, x, np.ones((2, 2), dtype=bool))]
    )
    params = MbmParameters(
        pi=[np.array([0.5, 0.5]), np.array([1.0])],
        alpha=[np.array([[0.9], [0.1]])],
        variance=[None],
    )
    return net, params
