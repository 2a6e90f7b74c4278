"""Command-line interface: simulate, fit, search, evaluate, export.

Every command writes its tabular results as CSV, a JSON companion for
programmatic use, rendered figures, and a manifest recording the command,
its inputs, the library version and a digest of each data file.  Outputs are
deterministic given the same inputs and seed.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, plots, simulate
from .errors import ConfigError, MbmError
from .network import MultipartiteNetwork, load_network
from .search import SearchConfig, SearchTrace, search
from .simulate import (
    SCENARIOS,
    params_from_dict,
    params_to_dict,
    read_labels,
    spec_from_dict,
    write_labels,
)
from .vem import FitResult, VariationalAssignment, fit, init_from_clustering

_DATA_SUFFIXES = {".csv", ".json"}


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir: Path, command: str, inputs: dict) -> Path:
    """Record the run: command, inputs, library version, output digests.

    The digest covers the data files (CSV/JSON) of the directory itself, not
    its subdirectories, figures, or the manifest.
    """
    digests = {}
    for child in sorted(out_dir.iterdir()):
        if child.is_file() and child.suffix in _DATA_SUFFIXES and child.name != "manifest.json":
            digests[child.name] = _sha256(child)
    manifest = {
        "command": command,
        "inputs": inputs,
        "library_version": __version__,
        "created_at": datetime.now(timezone.utc).isoformat(),
        "outputs": digests,
    }
    path = out_dir / "manifest.json"
    _write_json(path, manifest)
    return path


def _resolve_out(args, command: str) -> Path:
    if args.out:
        out = Path(args.out)
    else:
        root = os.environ.get("MBM_OUT_ROOT")
        if not root:
            raise ConfigError("no --out given and MBM_OUT_ROOT is not set")
        out = Path(root) / command
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_dataset(path: str) -> MultipartiteNetwork:
    p = Path(path)
    config = p if p.is_file() else p / "network.json"
    return load_network(config)


def _parse_ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from None


# ---------------------------------------------------------------------------
# Shared fit-report writing
# ---------------------------------------------------------------------------


def _write_fit_outputs(out: Path, net: MultipartiteNetwork, result: FitResult) -> None:
    _write_json(out / "params.json", params_to_dict(net, result.params))
    with open(out / "pi.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["group", "block", "pi"])
        for g, pi in zip(net.groups, result.params.pi):
            for b, value in enumerate(pi):
                writer.writerow([g.name, b, repr(float(value))])
    for idx, mat in enumerate(net.matrices):
        spec = mat.spec
        name = f"alpha_{idx}_{net.groups[spec.source].name}_{net.groups[spec.target].name}.csv"
        grid = result.params.alpha[idx]
        var = result.params.variance[idx]
        with open(out / name, "w", newline="") as fh:
            writer = csv.writer(fh)
            header = ["source_block", "target_block", "alpha"]
            if var is not None:
                header.append("variance")
            writer.writerow(header)
            for k in range(grid.shape[0]):
                for kp in range(grid.shape[1]):
                    row = [k, kp, repr(float(grid[k, kp]))]
                    if var is not None:
                        row.append(repr(float(var[k, kp])))
                    writer.writerow(row)
    for g, t in zip(net.groups, result.tau.tau):
        with open(out / f"tau_{g.name}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["node"] + [f"block_{b}" for b in range(t.shape[1])])
            for label, row in zip(g.node_labels, t):
                writer.writerow([label] + [repr(float(x)) for x in row])
    write_labels(net, result.map_clustering, out / "labels.csv")
    with open(out / "elbo_trace.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "elbo"])
        for i, value in enumerate(result.elbo_trace, start=1):
            writer.writerow([i, repr(float(value))])
    report = result.icl_report
    _write_json(
        out / "icl.json",
        {
            "complete_log_likelihood": report.complete_log_likelihood,
            "clustering_penalty": report.clustering_penalty,
            "edge_penalty": report.edge_penalty,
            "penalty": report.penalty,
            "icl": report.icl,
        },
    )
    _write_json(
        out / "fit.json",
        {
            "k": list(result.k),
            "elbo": result.elbo,
            "icl": result.icl,
            "converged": result.converged,
            "n_iterations": result.n_iterations,
        },
    )
    plots.save_elbo_trace(result.elbo_trace, out / "elbo_trace.png")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    if args.scenario:
        if args.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {args.scenario!r}")
        spec = SCENARIOS[args.scenario]()
    else:
        spec = spec_from_dict(json.loads(Path(args.spec).read_text()))
    out = _resolve_out(args, "simulate")
    for r in range(args.replicates):
        seed = args.seed + r
        net, labels = simulate.sample(spec, seed)
        rep_dir = out / f"rep_{r:04d}"
        simulate.write_dataset(spec, net, labels, rep_dir, seed)
        write_manifest(
            rep_dir,
            "simulate",
            {
                "scenario": args.scenario,
                "spec": args.spec,
                "seed": seed,
                "replicate": r,
            },
        )
    write_manifest(
        out,
        "simulate",
        {
            "scenario": args.scenario,
            "spec": args.spec,
            "seed": args.seed,
            "replicates": args.replicates,
        },
    )
    print(f"wrote {args.replicates} dataset(s) under {out}")
    return 0


def _initial_assignment(args, net: MultipartiteNetwork, k) -> VariationalAssignment:
    if args.init == "ones":
        labels = [np.zeros(g.size, dtype=int) for g in net.groups]
    elif args.init == "random":
        rng = np.random.default_rng(args.seed)
        labels = [rng.integers(0, kq, size=g.size) for g, kq in zip(net.groups, k)]
    else:
        labels = read_labels(net, args.init)
    return init_from_clustering(net, k, labels, smoothing=args.smoothing)


def cmd_fit(args) -> int:
    net = _load_dataset(args.dataset)
    k = _parse_ints(args.k)
    init = _initial_assignment(args, net, k)
    result = fit(
        net, k, init,
        tol=args.tol, max_iter=args.max_iter,
        inner_tol=args.inner_tol, max_inner=args.max_inner,
    )
    out = _resolve_out(args, "fit")
    _write_fit_outputs(out, net, result)
    write_manifest(
        out,
        "fit",
        {
            "dataset": str(args.dataset),
            "k": list(k),
            "init": args.init,
            "seed": args.seed,
            "tol": args.tol,
            "max_iter": args.max_iter,
            "inner_tol": args.inner_tol,
            "max_inner": args.max_inner,
            "smoothing": args.smoothing,
        },
    )
    print(f"fit k={list(k)} elbo={result.elbo:.6f} icl={result.icl:.6f} -> {out}")
    return 0


def _write_search_outputs(out: Path, trace: SearchTrace) -> None:
    with open(out / "search_trace.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["start", "iteration", "move", "group", "k", "icl", "accepted"])
        for m in trace.moves:
            writer.writerow(
                [
                    m.start_index,
                    m.iteration,
                    m.move,
                    "" if m.group is None else m.group,
                    ":".join(map(str, m.k)),
                    repr(float(m.icl)),
                    int(m.accepted),
                ]
            )
    with open(out / "models.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "icl", "elbo", "converged"])
        for k in sorted(trace.best_by_k):
            r = trace.best_by_k[k]
            writer.writerow(
                [":".join(map(str, k)), repr(float(r.icl)), repr(float(r.elbo)), int(r.converged)]
            )
    accepted = [m for m in trace.moves if m.accepted and m.move != "stop"]
    if accepted:
        plots.save_icl_trace(
            [m.icl for m in accepted], [m.k for m in accepted], out / "icl_trace.png"
        )


def cmd_search(args) -> int:
    net = _load_dataset(args.dataset)
    k_max = _parse_ints(args.k_max) if "," in args.k_max else int(args.k_max)
    workers = args.workers if args.workers else (os.cpu_count() or 1)
    config = SearchConfig(
        k_max=k_max,
        seed=args.seed,
        tol=args.tol,
        max_iter=args.max_iter,
        inner_tol=args.inner_tol,
        max_inner=args.max_inner,
        smoothing=args.smoothing,
        workers=workers,
    )
    best, trace = search(net, config)
    out = _resolve_out(args, "search")
    _write_fit_outputs(out, net, best)
    _write_search_outputs(out, trace)
    write_manifest(
        out,
        "search",
        {
            "dataset": str(args.dataset),
            "k_max": list(k_max) if isinstance(k_max, tuple) else k_max,
            "seed": args.seed,
            "workers": workers,
            "tol": args.tol,
            "max_iter": args.max_iter,
            "inner_tol": args.inner_tol,
            "max_inner": args.max_inner,
            "smoothing": args.smoothing,
        },
    )
    print(f"selected k={list(best.k)} icl={best.icl:.6f} -> {out}")
    return 0


def cmd_evaluate(args) -> int:
    from .metrics import recovery_report

    truth_net = _load_dataset(args.truth_dir)
    truth_params = params_from_dict(
        truth_net, json.loads((Path(args.truth_dir) / "params.json").read_text())
    )
    truth_labels = read_labels(truth_net, Path(args.truth_dir) / "labels.csv")
    fit_dir = Path(args.fit_dir)
    est_params = params_from_dict(
        truth_net, json.loads((fit_dir / "params.json").read_text())
    )
    est_labels = read_labels(truth_net, fit_dir / "labels.csv")
    report = recovery_report(truth_net, truth_params, est_params, truth_labels, est_labels)

    out = _resolve_out(args, "evaluate")
    with open(out / "ari.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["group", "ari"])
        for g, value in zip(truth_net.groups, report.ari):
            writer.writerow([g.name, repr(float(value))])
    names, errors = [], []
    with open(out / "errors.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["kind", "pair", "group_or_source", "target_block", "block", "true", "estimate", "error"]
        )
        if report.aligned:
            for g, true_pi, err in zip(truth_net.groups, truth_params.pi, report.pi_errors):
                for b, e in enumerate(err):
                    writer.writerow(
                        ["pi", "", g.name, "", b,
                         repr(float(true_pi[b])), repr(float(true_pi[b] + e)), repr(float(e))]
                    )
            for idx, (mat, err) in enumerate(zip(truth_net.matrices, report.alpha_errors)):
                spec = mat.spec
                pair = f"{truth_net.groups[spec.source].name}-{truth_net.groups[spec.target].name}"
                true_grid = truth_params.alpha[idx]
                for k in range(err.shape[0]):
                    for kp in range(err.shape[1]):
                        writer.writerow(
                            ["alpha", pair, k, kp, "",
                             repr(float(true_grid[k, kp])),
                             repr(float(true_grid[k, kp] + err[k, kp])),
                             repr(float(err[k, kp]))]
                        )
                        names.append(f"{pair}[{k},{kp}]")
                        errors.append(float(err[k, kp]))
    _write_json(
        out / "summary.json",
        {
            "ari": {g.name: float(a) for g, a in zip(truth_net.groups, report.ari)},
            "k_true": list(report.k_true),
            "k_est": list(report.k_est),
            "aligned": report.aligned,
            "max_abs_alpha_error": (
                max((abs(e) for e in errors), default=0.0) if report.aligned else None
            ),
        },
    )
    plots.save_ari_bars([g.name for g in truth_net.groups], report.ari, out / "ari.png")
    if report.aligned and names:
        plots.save_error_bars(names, errors, out / "errors.png")
    write_manifest(
        out,
        "evaluate",
        {"fit_dir": str(args.fit_dir), "truth_dir": str(args.truth_dir)},
    )
    print(f"evaluated {fit_dir} against {args.truth_dir} -> {out}")
    return 0


def _export_graph(params_doc: dict, threshold: float):
    """Nodes and thresholded edges of the block-level summary graph."""
    groups = params_doc["groups"]
    sizes = params_doc["sizes"]
    nodes, edges = [], []
    for g in groups:
        pi = params_doc["pi"][g]
        for b, weight in enumerate(pi):
            nodes.append(
                {"group": g, "block": b, "name": f"{g}/{b}", "mass": sizes[g] * weight}
            )
    directed_pairs = set()
    for idx, entry in enumerate(params_doc["alpha"]):
        src, tgt = entry["source"], entry["target"]
        grid = entry["values"]
        intra = src == tgt
        oriented = entry.get("orientation", "oriented") == "oriented"
        if intra and oriented:
            directed_pairs.add(idx)
        for k, row in enumerate(grid):
            for kp, value in enumerate(row):
                if intra and not oriented and kp < k:
                    continue
                if value > threshold:
                    edges.append(
                        {
                            "pair": idx,
                            "from": (src, k),
                            "to": (tgt, kp),
                            "weight": float(value),
                            "oriented": bool(intra and oriented),
                        }
                    )
    return nodes, edges, directed_pairs


def cmd_export(args) -> int:
    fit_dir = Path(args.fit_dir)
    params_path = fit_dir / "params.json"
    if not params_path.exists():
        raise ConfigError(f"{fit_dir} does not contain params.json")
    params_doc = json.loads(params_path.read_text())
    nodes, edges, directed_pairs = _export_graph(params_doc, args.threshold)
    out = _resolve_out(args, "export")
    if args.format == "dot":
        lines = []
        digraph = bool(directed_pairs)
        lines.append(("digraph" if digraph else "graph") + " blocks {")
        for node in nodes:
            lines.append(
                f'  "{node["name"]}" [size={node["mass"]:.6g}, group="{node["group"]}"];'
            )
        op = "->" if digraph else "--"
        for edge in edges:
            attrs = f"width={edge['weight']:.6g}"
            if digraph and not edge["oriented"]:
                attrs += ", dir=none"
            lines.append(
                f'  "{edge["from"][0]}/{edge["from"][1]}" {op} '
                f'"{edge["to"][0]}/{edge["to"][1]}" [{attrs}];'
            )
        lines.append("}")
        (out / "graph.dot").write_text("\n".join(lines) + "\n")
    elif args.format == "json":
        _write_json(
            out / "graph.json",
            {
                "schema": "mbm-export/1",
                "threshold": args.threshold,
                "nodes": [
                    {"group": n["group"], "block": n["block"], "mass": n["mass"]}
                    for n in nodes
                ],
                "edges": [
                    {
                        "source_group": e["from"][0],
                        "source_block": e["from"][1],
                        "target_group": e["to"][0],
                        "target_block": e["to"][1],
                        "weight": e["weight"],
                        "oriented": e["oriented"],
                    }
                    for e in edges
                ],
            },
        )
    else:
        raise ConfigError(f"unknown export format {args.format!r}")
    plots.save_mesoscopic(nodes, edges, out / "mesoscopic.png", directed_pairs)
    write_manifest(
        out,
        "export",
        {"fit_dir": str(args.fit_dir), "format": args.format, "threshold": args.threshold},
    )
    print(f"exported block graph ({len(nodes)} blocks, {len(edges)} edges) -> {out}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_tolerance_flags(parser) -> None:
    parser.add_argument("--tol", type=float, default=1e-6, help="relative ELBO tolerance")
    parser.add_argument("--max-iter", type=int, default=200, help="outer iteration cap")
    parser.add_argument("--inner-tol", type=float, default=1e-4,
                        help="membership fixed-point tolerance")
    parser.add_argument("--max-inner", type=int, default=50, help="fixed-point sweep cap")
    parser.add_argument("--smoothing", type=float, default=0.1,
                        help="mass spread off the labelled block in initializations")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mbm",
        description="Block models for collections of interconnected networks.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw datasets from a known model")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", choices=sorted(SCENARIOS), help="built-in benchmark preset")
    src.add_argument("--spec", help="generator spec JSON file")
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="variational EM at fixed block counts")
    p.add_argument("dataset", help="dataset directory or config file")
    p.add_argument("--k", required=True, help="comma-separated block counts")
    p.add_argument("--init", default="ones",
                   help="'ones', 'random', or a labels CSV path")
    p.add_argument("--seed", type=int, default=0, help="seed for --init random")
    _add_tolerance_flags(p)
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("search", help="select block counts by split/merge search")
    p.add_argument("dataset", help="dataset directory or config file")
    p.add_argument("--k-max", default="10", help="bound per group (int or comma list)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=0,
                   help="concurrent candidate fits (0 = available parallelism)")
    _add_tolerance_flags(p)
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("evaluate", help="compare a fit against its generating truth")
    p.add_argument("fit_dir", help="directory written by fit or search")
    p.add_argument("truth_dir", help="dataset directory written by simulate")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("export", help="block-level summary graph of a fit")
    p.add_argument("fit_dir", help="directory written by fit or search")
    p.add_argument("--format", choices=["dot", "json"], default="dot")
    p.add_argument("--threshold", type=float, default=0.01,
                   help="omit edges with connection parameter at or below this")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MbmError as exc:
        record = {"error": type(exc).__name__, "message": str(exc)}
        try:
            if getattr(args, "out", None):
                out = Path(args.out)
                out.mkdir(parents=True, exist_ok=True)
                _write_json(out / "error.json", record)
        except OSError:
            pass
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
