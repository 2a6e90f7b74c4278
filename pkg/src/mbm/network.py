"""Representation, validation and file ingestion of multipartite networks.

A network is a set of node groups plus one observation matrix per declared
group pair.  Within-group matrices may be oriented or non-oriented and may or
may not admit self-loops.  Every matrix carries a dyad mask listing which
cells are observable; for non-oriented within-group matrices the mask is
canonical (each unordered dyad appears once, in the upper triangle) while the
value grid itself is kept full and symmetric.

On disk a dataset is one JSON configuration plus one edge-list CSV per pair
(header ``source,target,value``; the value column may be omitted for binary
relations) and optional per-pair CSVs listing unobservable dyads.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .emissions import EmissionFamily, check_support
from .errors import ConfigError, ValidationError


@dataclass(frozen=True)
class FunctionalGroup:
    """A named set of nodes of one kind, with a fixed node order."""

    name: str
    node_labels: tuple[str, ...]

    def __post_init__(self):
        if len(self.node_labels) == 0:
            raise ValidationError(f"group {self.name!r} has no nodes")
        if len(set(self.node_labels)) != len(self.node_labels):
            raise ValidationError(f"group {self.name!r} has duplicate node labels")

    @property
    def size(self) -> int:
        return len(self.node_labels)

    def index_of(self) -> dict[str, int]:
        return {label: i for i, label in enumerate(self.node_labels)}


@dataclass(frozen=True)
class InteractionSpec:
    """One declared relation between a pair of groups (possibly the same group)."""

    source: int
    target: int
    family: EmissionFamily
    oriented: bool = True
    self_loops: bool = False

    def __post_init__(self):
        if not self.is_intra:
            if not self.oriented:
                raise ValidationError("non-oriented relations are only legal within a group")
            if self.self_loops:
                raise ValidationError("self-loops are only meaningful within a group")

    @property
    def is_intra(self) -> bool:
        return self.source == self.target


@dataclass
class ObservationMatrix:
    """Dense value grid plus the boolean dyad mask for one group pair.

    For non-oriented within-group relations the mask holds each unordered
    dyad exactly once (upper triangle) while ``values`` stays full and
    symmetric; everywhere else the mask is in the matrix's own orientation.
    """

    spec: InteractionSpec
    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.values.shape != self.mask.shape or self.values.ndim != 2:
            raise ValidationError("values and mask must be 2-d arrays of equal shape")
        self.values.setflags(write=False)
        self.mask.setflags(write=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def sym_mask(self) -> np.ndarray:
        """Mask with both orderings marked (identity for oriented/inter relations)."""
        if self.spec.is_intra and not self.spec.oriented:
            return self.mask | self.mask.T
        return self.mask

    def validate(self) -> None:
        spec = self.spec
        n, m = self.shape
        if spec.is_intra and n != m:
            raise ValidationError("within-group matrix must be square")
        diag = np.diagonal(self.mask) if spec.is_intra else None
        if spec.is_intra and not spec.self_loops and diag.any():
            raise ValidationError("diagonal dyads present but self-loops are disabled")
        if spec.is_intra and not spec.oriented:
            if np.tril(self.mask, -1).any():
                raise ValidationError(
                    "non-oriented mask must be canonical (upper triangle only)"
                )
            full = self.mask | self.mask.T
            if not np.array_equal(self.values[full], self.values.T[full]):
                raise ValidationError("non-oriented matrix must be symmetric on its mask")
        vals = self.values[self.mask]
        if spec.family is EmissionFamily.BERNOULLI:
            if not np.isin(vals, (0.0, 1.0)).all():
                raise ValidationError("binary relation contains values outside {0, 1}")
        elif spec.family is EmissionFamily.POISSON:
            if (vals < 0).any() or (vals != np.round(vals)).any():
                raise ValidationError("count relation contains non-integer or negative values")
        else:
            if not np.isfinite(vals).all():
                raise ValidationError("real-valued relation contains non-finite values")
        if (self.values[~self.sym_mask()] != 0).any():
            raise ValidationError("values present outside the dyad mask")


@dataclass
class MultipartiteNetwork:
    """All groups together with one observation matrix per declared pair."""

    groups: list[FunctionalGroup]
    matrices: list[ObservationMatrix]
    pair_index: dict[tuple[int, int], int] = field(init=False)

    def __post_init__(self):
        self.pair_index = {}
        for idx, mat in enumerate(self.matrices):
            key = (mat.spec.source, mat.spec.target)
            if key in self.pair_index:
                raise ValidationError(f"pair {key} declared more than once")
            self.pair_index[key] = idx
        self.validate()

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(g.size for g in self.groups)

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return [(m.spec.source, m.spec.target) for m in self.matrices]

    def validate(self) -> None:
        q_max = self.n_groups
        for mat in self.matrices:
            spec = mat.spec
            if not (0 <= spec.source < q_max and 0 <= spec.target < q_max):
                raise ValidationError(f"pair ({spec.source}, {spec.target}) references unknown group")
            expected = (self.groups[spec.source].size, self.groups[spec.target].size)
            if mat.shape != expected:
                raise ValidationError(
                    f"matrix for pair ({spec.source}, {spec.target}) has shape {mat.shape}, "
                    f"expected {expected}"
                )
            mat.validate()

    def incident_pairs(self, q: int) -> list[int]:
        """Indices of matrices whose relation touches group ``q``."""
        return [
            i for i, m in enumerate(self.matrices)
            if m.spec.source == q or m.spec.target == q
        ]

    def restrict(self, pair_idx: int) -> tuple["MultipartiteNetwork", list[int]]:
        """Single-matrix sub-network; returns it plus its groups' original indices."""
        mat = self.matrices[pair_idx]
        spec = mat.spec
        kept = sorted(set((spec.source, spec.target)))
        remap = {q: i for i, q in enumerate(kept)}
        sub_spec = InteractionSpec(
            remap[spec.source], remap[spec.target], spec.family,
            oriented=spec.oriented, self_loops=spec.self_loops,
        )
        sub = MultipartiteNetwork(
            groups=[self.groups[q] for q in kept],
            matrices=[ObservationMatrix(sub_spec, mat.values, mat.mask)],
        )
        return sub, kept


def dyad_count(net: MultipartiteNetwork, pair: tuple[int, int]) -> int:
    """Number of observable dyads of one declared pair."""
    if pair not in net.pair_index:
        raise ValidationError(f"pair {pair} not declared in the network")
    return int(net.matrices[net.pair_index[pair]].mask.sum())


def block_pair_index_set(spec: InteractionSpec, k_source: int, k_target: int) -> list[tuple[int, int]]:
    """Block-pair indices carrying a free parameter for this relation.

    Full product for between-group and oriented within-group relations;
    unordered pairs (k <= k') for non-oriented within-group relations, where
    the parameter grid is tied symmetric.
    """
    if k_source < 1 or k_target < 1:
        raise ValidationError("block counts must be >= 1")
    if spec.is_intra and not spec.oriented:
        return [(k, kp) for k in range(k_source) for kp in range(k, k_source)]
    return [(k, kp) for k in range(k_source) for kp in range(k_target)]


# ---------------------------------------------------------------------------
# File ingestion and writing
# ---------------------------------------------------------------------------

_FAMILIES = {f.value: f for f in EmissionFamily}
_ORIENTATIONS = {"oriented": True, "non-oriented": False}


def _read_edge_rows(path: Path, allow_value: bool) -> list[tuple[str, str, str | None]]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            return rows
        header = [h.strip().lower() for h in header]
        if header[:2] != ["source", "target"]:
            raise ConfigError(f"{path}: edge list header must start with 'source,target'")
        has_value = len(header) >= 3 and header[2] == "value"
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 2:
                raise ConfigError(f"{path}:{lineno}: expected at least two columns")
            value = row[2].strip() if has_value and len(row) > 2 and row[2].strip() else None
            if value is not None and not allow_value:
                raise ConfigError(f"{path}:{lineno}: unexpected value column")
            rows.append((row[0].strip(), row[1].strip(), value))
    return rows


def _parse_value(raw: str | None, family: EmissionFamily, where: str) -> float:
    if raw is None:
        if family is not EmissionFamily.BERNOULLI:
            raise ValidationError(f"{where}: value column required for {family.value} relations")
        return 1.0
    try:
        value = float(raw)
    except ValueError:
        raise ValidationError(f"{where}: cannot parse value {raw!r}") from None
    try:
        check_support(family, value)
    except ValidationError as exc:
        raise ValidationError(f"{where}: {exc}") from None
    return value


def _build_mask(spec: InteractionSpec, n: int, m: int) -> np.ndarray:
    if not spec.is_intra:
        return np.ones((n, m), dtype=bool)
    if spec.oriented:
        mask = np.ones((n, n), dtype=bool)
        if not spec.self_loops:
            np.fill_diagonal(mask, False)
        return mask
    mask = np.triu(np.ones((n, n), dtype=bool), k=0 if spec.self_loops else 1)
    return mask


def load_network(config_path: str | Path, data_dir: str | Path | None = None) -> MultipartiteNetwork:
    """Load and validate a dataset from its JSON configuration.

    ``data_dir`` locates the referenced CSV files and defaults to the
    configuration file's directory.  Node order within each group follows the
    explicit ``nodes`` list when given, otherwise labels collected from the
    pair files are sorted lexicographically.
    """
    config_path = Path(config_path)
    data_dir = Path(data_dir) if data_dir is not None else config_path.parent
    try:
        config = json.loads(config_path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"configuration file not found: {config_path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{config_path}: invalid JSON ({exc})") from None
    if not isinstance(config, dict) or "groups" not in config or "pairs" not in config:
        raise ConfigError(f"{config_path}: expected an object with 'groups' and 'pairs'")

    group_cfgs = config["groups"]
    names = [g.get("name") for g in group_cfgs]
    if any(not n for n in names):
        raise ConfigError("every group needs a 'name'")
    if len(set(names)) != len(names):
        raise ConfigError("duplicate group names")
    name_to_q = {n: q for q, n in enumerate(names)}

    pair_cfgs = config["pairs"]
    specs = []
    for pc in pair_cfgs:
        for key in ("source", "target", "family", "edge_file"):
            if key not in pc:
                raise ConfigError(f"pair entry missing {key!r}")
        for side in ("source", "target"):
            if pc[side] not in name_to_q:
                raise ConfigError(f"pair references unknown group {pc[side]!r}")
        family = _FAMILIES.get(pc["family"])
        if family is None:
            raise ConfigError(f"unknown family {pc['family']!r}")
        orientation = pc.get("orientation", "oriented")
        if orientation not in _ORIENTATIONS:
            raise ConfigError(f"unknown orientation {orientation!r}")
        try:
            spec = InteractionSpec(
                name_to_q[pc["source"]], name_to_q[pc["target"]], family,
                oriented=_ORIENTATIONS[orientation],
                self_loops=bool(pc.get("self_loops", False)),
            )
        except ValidationError as exc:
            raise ConfigError(str(exc)) from None
        specs.append(spec)

    files: list[tuple[list[tuple[str, str, str | None]], list[tuple[str, str, str | None]]]] = []
    for pc, spec in zip(pair_cfgs, specs):
        edge_path = data_dir / pc["edge_file"]
        if not edge_path.exists():
            raise ConfigError(f"edge list not found: {edge_path}")
        edges = _read_edge_rows(edge_path, allow_value=True)
        nas = []
        if pc.get("na_file"):
            na_path = data_dir / pc["na_file"]
            if not na_path.exists():
                raise ConfigError(f"NA list not found: {na_path}")
            nas = _read_edge_rows(na_path, allow_value=False)
        files.append((edges, nas))

    # Resolve node labels: explicit lists are taken in their given order,
    # otherwise labels observed in the files are sorted.
    observed: dict[int, set[str]] = {q: set() for q in range(len(names))}
    for (edges, nas), spec in zip(files, specs):
        for rows in (edges, nas):
            for src, tgt, _ in rows:
                observed[spec.source].add(src)
                observed[spec.target].add(tgt)
    groups = []
    for q, gc in enumerate(group_cfgs):
        if gc.get("nodes"):
            labels = tuple(str(x) for x in gc["nodes"])
        else:
            if not observed[q]:
                raise ConfigError(
                    f"group {names[q]!r} has no explicit node list and no file mentions it"
                )
            labels = tuple(sorted(observed[q]))
        if "size" in gc and gc["size"] != len(labels):
            raise ConfigError(
                f"group {names[q]!r}: declared size {gc['size']} != {len(labels)} nodes"
            )
        groups.append(FunctionalGroup(names[q], labels))

    matrices = []
    for pc, spec, (edges, nas) in zip(pair_cfgs, specs, files):
        src_index = groups[spec.source].index_of()
        tgt_index = groups[spec.target].index_of()
        n, m = groups[spec.source].size, groups[spec.target].size
        mask = _build_mask(spec, n, m)
        values = np.zeros((n, m))
        non_oriented = spec.is_intra and not spec.oriented
        where = pc["edge_file"]

        def resolve(src: str, tgt: str, what: str) -> tuple[int, int]:
            if src not in src_index:
                raise ValidationError(f"{what}: unknown {groups[spec.source].name!r} node {src!r}")
            if tgt not in tgt_index:
                raise ValidationError(f"{what}: unknown {groups[spec.target].name!r} node {tgt!r}")
            return src_index[src], tgt_index[tgt]

        for src, tgt, _ in nas:
            i, j = resolve(src, tgt, pc.get("na_file", "NA list"))
            if non_oriented:
                i, j = min(i, j), max(i, j)
            mask[i, j] = False

        seen: set[tuple[int, int]] = set()
        for src, tgt, raw in edges:
            i, j = resolve(src, tgt, where)
            key = (min(i, j), max(i, j)) if non_oriented else (i, j)
            if key in seen:
                raise ValidationError(f"{where}: duplicate record for dyad ({src}, {tgt})")
            seen.add(key)
            if spec.is_intra and i == j and not spec.self_loops:
                raise ValidationError(f"{where}: self-loop ({src}) but self-loops are disabled")
            if not (mask[key] if non_oriented else mask[i, j]):
                raise ValidationError(f"{where}: record on unobservable dyad ({src}, {tgt})")
            value = _parse_value(raw, spec.family, f"{where} ({src},{tgt})")
            values[i, j] = value
            if non_oriented:
                values[j, i] = value
        matrices.append(ObservationMatrix(spec, values, mask))

    return MultipartiteNetwork(groups, matrices)


def _edge_file_name(net: MultipartiteNetwork, pair_idx: int) -> str:
    spec = net.matrices[pair_idx].spec
    return f"edges_{net.groups[spec.source].name}_{net.groups[spec.target].name}_{pair_idx}.csv"


def save_network(net: MultipartiteNetwork, out_dir: str | Path) -> Path:
    """Write a network as a config plus edge lists; returns the config path.

    Binary relations record present edges only (no value column); count
    relations record non-zero cells; real-valued relations record every
    observable dyad.  Reloading the written dataset reproduces the network
    exactly, including node order.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    config: dict = {"groups": [], "pairs": []}
    for g in net.groups:
        config["groups"].append({"name": g.name, "nodes": list(g.node_labels)})
    for idx, mat in enumerate(net.matrices):
        spec = mat.spec
        edge_file = _edge_file_name(net, idx)
        entry = {
            "source": net.groups[spec.source].name,
            "target": net.groups[spec.target].name,
            "family": spec.family.value,
            "orientation": "oriented" if spec.oriented else "non-oriented",
            "self_loops": spec.self_loops,
            "edge_file": edge_file,
        }
        src_labels = net.groups[spec.source].node_labels
        tgt_labels = net.groups[spec.target].node_labels
        full_mask = _build_mask(spec, *mat.shape)
        missing = np.argwhere(full_mask & ~mat.mask)
        if missing.size:
            na_file = f"na_{idx}.csv"
            entry["na_file"] = na_file
            with open(out_dir / na_file, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["source", "target"])
                for i, j in missing:
                    writer.writerow([src_labels[i], tgt_labels[j]])
        binary = spec.family is EmissionFamily.BERNOULLI
        if spec.family is EmissionFamily.GAUSSIAN:
            cells = np.argwhere(mat.mask)
        else:
            cells = np.argwhere(mat.mask & (mat.values != 0))
        with open(out_dir / edge_file, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["source", "target"] if binary else ["source", "target", "value"])
            for i, j in cells:
                value = mat.values[i, j]
                if binary:
                    writer.writerow([src_labels[i], tgt_labels[j]])
                else:
                    text = str(int(value)) if spec.family is EmissionFamily.POISSON else repr(float(value))
                    writer.writerow([src_labels[i], tgt_labels[j], text])
        config["pairs"].append(entry)
    config_path = out_dir / "network.json"
    config_path.write_text(json.dumps(config, indent=2, sort_keys=True) + "\n")
    return config_path
