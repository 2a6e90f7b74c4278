"""Synthetic multipartite networks drawn from known block-model parameters.

Sampling draws each node's block from its group's mixture weights, then each
observable dyad independently from the emission family of its pair at the
block-pair parameter.  Two ready-made benchmark presets are included: a
four-group collection of three bipartite binary networks, and a two-group
system combining an oriented within-group network with a bipartite one.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .emissions import EmissionFamily
from .errors import ConfigError, ValidationError
from .network import (
    FunctionalGroup,
    InteractionSpec,
    MultipartiteNetwork,
    ObservationMatrix,
    _build_mask,
    save_network,
)
from .vem import MbmParameters


@dataclass
class GeneratorSpec:
    """Ground-truth model from which datasets are drawn."""

    group_names: list[str]
    sizes: list[int]
    pairs: list[InteractionSpec]
    pi: list[np.ndarray]
    alpha: list[np.ndarray]
    variance: list[np.ndarray | None] = field(default_factory=list)
    seed: int = 0

    def __post_init__(self):
        if not self.variance:
            self.variance = [None] * len(self.pairs)
        self.pi = [np.asarray(p, dtype=float) for p in self.pi]
        self.alpha = [np.asarray(a, dtype=float) for a in self.alpha]
        self.variance = [
            None if v is None else np.asarray(v, dtype=float) for v in self.variance
        ]
        if any(n < 1 for n in self.sizes):
            raise ValidationError("group sizes must be positive")
        for spec, a, v in zip(self.pairs, self.alpha, self.variance):
            expect = (len(self.pi[spec.source]), len(self.pi[spec.target]))
            if a.shape != expect:
                raise ValidationError(f"alpha grid {a.shape} does not match block counts {expect}")
            if spec.family is EmissionFamily.GAUSSIAN and v is None:
                raise ValidationError("Gaussian pairs need a variance grid")

    @property
    def k(self) -> tuple[int, ...]:
        return tuple(len(p) for p in self.pi)

    def params(self) -> MbmParameters:
        return MbmParameters(
            pi=[p.copy() for p in self.pi],
            alpha=[a.copy() for a in self.alpha],
            variance=[None if v is None else v.copy() for v in self.variance],
        )


def _node_labels(name: str, n: int) -> tuple[str, ...]:
    width = max(4, len(str(n)))
    return tuple(f"{name}_{i:0{width}d}" for i in range(n))


def sample(
    spec: GeneratorSpec, seed: int | None = None
) -> tuple[MultipartiteNetwork, list[np.ndarray]]:
    """Draw one dataset; returns the network and the true labels per group.

    The same spec and seed reproduce the same dataset bit for bit.  Mixture
    weights are normalized before sampling, so presets whose printed weights
    sum to 0.9999 or 1.0001 are accepted as-is.
    """
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    labels = []
    for n, pi in zip(spec.sizes, spec.pi):
        p = np.asarray(pi, dtype=float)
        labels.append(rng.choice(len(p), size=n, p=p / p.sum()))
    matrices = []
    for pair, alpha, var in zip(spec.pairs, spec.alpha, spec.variance):
        z_src = labels[pair.source]
        z_tgt = labels[pair.target]
        cell_alpha = alpha[np.ix_(z_src, z_tgt)]
        if pair.family is EmissionFamily.BERNOULLI:
            values = (rng.random(cell_alpha.shape) < cell_alpha).astype(float)
        elif pair.family is EmissionFamily.POISSON:
            values = rng.poisson(cell_alpha).astype(float)
        else:
            sd = np.sqrt(var[np.ix_(z_src, z_tgt)])
            values = rng.normal(cell_alpha, sd)
        mask = _build_mask(pair, len(z_src), len(z_tgt))
        if pair.is_intra and not pair.oriented:
            # One draw per unordered dyad, mirrored below the diagonal.
            upper = np.triu(values, k=0 if pair.self_loops else 1)
            values = upper + np.triu(upper, 1).T
            sym = mask | mask.T
            values = values * sym
        else:
            values = values * mask
        matrices.append(ObservationMatrix(pair, values, mask))
    groups = [
        FunctionalGroup(name, _node_labels(name, n))
        for name, n in zip(spec.group_names, spec.sizes)
    ]
    return MultipartiteNetwork(groups, matrices), labels


def scenario1() -> GeneratorSpec:
    """Four groups, three bipartite binary networks, 7/2/2/1 blocks.

    Group sizes 141/173/46/30; the shared group connects to each of the other
    three.
    """
    alpha_12 = [
        [0.0957, 0.0075],
        [0.0100, 0.0],
        [0.0, 0.0003],
        [0.1652, 0.0343],
        [0.2018, 0.1380],
        [0.0, 0.0],
        [0.0, 0.0],
    ]
    alpha_13 = [
        [0.0, 0.0006],
        [0.5431, 0.0589],
        [0.0, 0.0],
        [0.6620, 0.1542],
        [0.0, 0.0],
        [0.0, 0.0],
        [0.8492, 0.3565],
    ]
    alpha_14 = [
        [0.0013],
        [0.0],
        [0.0753],
        [0.0],
        [0.0163],
        [0.5108],
        [0.0],
    ]
    bern = EmissionFamily.BERNOULLI
    return GeneratorSpec(
        group_names=["plants", "pollinators", "ants", "birds"],
        sizes=[141, 173, 46, 30],
        pairs=[
            InteractionSpec(0, 1, bern),
            InteractionSpec(0, 2, bern),
            InteractionSpec(0, 3, bern),
        ],
        pi=[
            [0.3651, 0.1270, 0.1190, 0.1460, 0.0842, 0.0794, 0.0794],
            [0.1, 0.9],
            [0.1, 0.9],
            [1.0],
        ],
        alpha=[alpha_12, alpha_13, alpha_14],
    )


def scenario2() -> GeneratorSpec:
    """Two groups: an oriented binary within-group network (no self-loops)
    plus a bipartite binary network, with 3/2 blocks and sizes 30/37."""
    bern = EmissionFamily.BERNOULLI
    return GeneratorSpec(
        group_names=["farmers", "crops"],
        sizes=[30, 37],
        pairs=[
            InteractionSpec(0, 0, bern, oriented=True, self_loops=False),
            InteractionSpec(0, 1, bern),
        ],
        pi=[[0.31, 0.42, 0.27], [0.65, 0.35]],
        alpha=[
            [
                [0.025, 0.123, 0.053],
                [0.159, 0.300, 0.070],
                [0.374, 0.585, 0.357],
            ],
            [
                [0.186, 0.653],
                [0.559, 0.905],
                [0.390, 0.696],
            ],
        ],
    )


SCENARIOS = {"1": scenario1, "2": scenario2}


# ---------------------------------------------------------------------------
# Serialization of generator specs, parameters and labels
# ---------------------------------------------------------------------------


def spec_to_dict(spec: GeneratorSpec) -> dict:
    return {
        "groups": [
            {"name": n, "size": s} for n, s in zip(spec.group_names, spec.sizes)
        ],
        "pairs": [
            {
                "source": spec.group_names[p.source],
                "target": spec.group_names[p.target],
                "family": p.family.value,
                "orientation": "oriented" if p.oriented else "non-oriented",
                "self_loops": p.self_loops,
            }
            for p in spec.pairs
        ],
        "pi": [list(map(float, p)) for p in spec.pi],
        "alpha": [[list(map(float, row)) for row in a] for a in spec.alpha],
        "variance": [
            None if v is None else [list(map(float, row)) for row in v]
            for v in spec.variance
        ],
        "seed": spec.seed,
    }


def spec_from_dict(data: dict) -> GeneratorSpec:
    try:
        names = [g["name"] for g in data["groups"]]
        sizes = [int(g["size"]) for g in data["groups"]]
        name_to_q = {n: q for q, n in enumerate(names)}
        pairs = [
            InteractionSpec(
                name_to_q[p["source"]],
                name_to_q[p["target"]],
                EmissionFamily(p["family"]),
                oriented=p.get("orientation", "oriented") == "oriented",
                self_loops=bool(p.get("self_loops", False)),
            )
            for p in data["pairs"]
        ]
        return GeneratorSpec(
            group_names=names,
            sizes=sizes,
            pairs=pairs,
            pi=data["pi"],
            alpha=data["alpha"],
            variance=data.get("variance") or [],
            seed=int(data.get("seed", 0)),
        )
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed generator spec: {exc}") from None


def params_to_dict(net: MultipartiteNetwork, params: MbmParameters) -> dict:
    return {
        "k": list(params.k),
        "groups": [g.name for g in net.groups],
        "sizes": {g.name: g.size for g in net.groups},
        "pi": {
            g.name: list(map(float, p)) for g, p in zip(net.groups, params.pi)
        },
        "alpha": [
            {
                "source": net.groups[m.spec.source].name,
                "target": net.groups[m.spec.target].name,
                "family": m.spec.family.value,
                "orientation": "oriented" if m.spec.oriented else "non-oriented",
                "values": [list(map(float, row)) for row in a],
                "variance": None if v is None else [list(map(float, row)) for row in v],
            }
            for m, a, v in zip(net.matrices, params.alpha, params.variance)
        ],
    }


def params_from_dict(net: MultipartiteNetwork, data: dict) -> MbmParameters:
    try:
        pi = [np.asarray(data["pi"][g.name], dtype=float) for g in net.groups]
        alpha = [np.asarray(entry["values"], dtype=float) for entry in data["alpha"]]
        variance = [
            None if entry.get("variance") is None else np.asarray(entry["variance"], dtype=float)
            for entry in data["alpha"]
        ]
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed parameter file: {exc}") from None
    return MbmParameters(pi, alpha, variance)


def write_labels(
    net: MultipartiteNetwork, labels: list[np.ndarray], path: str | Path
) -> None:
    """Write per-node block labels as CSV with columns group,node,block."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["group", "node", "block"])
        for g, lab in zip(net.groups, labels):
            for node, block in zip(g.node_labels, lab):
                writer.writerow([g.name, node, int(block)])


def read_labels(net: MultipartiteNetwork, path: str | Path) -> list[np.ndarray]:
    """Read a labels CSV back into per-group label arrays in node order."""
    by_group: dict[str, dict[str, int]] = {g.name: {} for g in net.groups}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:3]] != ["group", "node", "block"]:
            raise ConfigError(f"{path}: expected header group,node,block")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            gname, node, block = row[0].strip(), row[1].strip(), row[2].strip()
            if gname not in by_group:
                raise ValidationError(f"{path}:{lineno}: unknown group {gname!r}")
            by_group[gname][node] = int(block)
    labels = []
    for g in net.groups:
        seen = by_group[g.name]
        missing = [n for n in g.node_labels if n not in seen]
        if missing:
            raise ValidationError(f"{path}: missing labels for {g.name!r} nodes {missing[:3]}")
        labels.append(np.asarray([seen[n] for n in g.node_labels], dtype=int))
    return labels


def write_dataset(
    spec: GeneratorSpec,
    net: MultipartiteNetwork,
    labels: list[np.ndarray],
    out_dir: str | Path,
    seed: int,
) -> Path:
    """Write one simulated dataset: network files, true labels, true parameters."""
    out_dir = Path(out_dir)
    save_network(net, out_dir)
    write_labels(net, labels, out_dir / "labels.csv")
    payload = params_to_dict(net, spec.params())
    payload["seed"] = seed
    (out_dir / "params.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return out_dir
