"""Command-line interface.

Subcommands cover the full workflow: inspect a dataset (``ingest``,
``summarize``), pick features (``select``), run the discovery pipeline
(``discover``), turn a graph into claims (``claims``), build synthetic
benchmarks (``simulate``, ``evaluate``) and hand a claims file to the
external verifier (``verify``).  Figures are rendered here, never in
the library, so library outputs stay byte-reproducible.

Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import shutil
import subprocess
import sys
from pathlib import Path

from .claims import claims_to_json_dict, edges_to_claims
from .featsel import mi_select, mmmb
from .graphs import MixedGraph, to_dot
from .pipeline import PipelineConfig, run_pipeline
from .simulate import SimSpec, evaluate, random_dag, simulate_discrete
from .tabular import column_summary, load_csv

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2


def _json_text(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _emit(payload: dict, out: str | None) -> None:
    text = _json_text(payload)
    if out:
        Path(out).write_text(text, encoding="utf-8")
        print(out)
    else:
        sys.stdout.write(text)


def _load_graph(path: str) -> tuple[MixedGraph, dict]:
    """A graph file is either a bare graph or a search result wrapping
    one; returns the graph and any run parameters found alongside."""
    with open(path, encoding="utf-8") as fh:
        blob = json.load(fh)
    if "graph" in blob and isinstance(blob["graph"], dict):
        return MixedGraph.from_json_dict(blob["graph"]), dict(
            blob.get("params") or {})
    return MixedGraph.from_json_dict(blob), {}


def _cmd_ingest(args) -> int:
    table = load_csv(args.data, args.target)
    variables = []
    for meta in table.metas:
        kind = ("categorical(%d)" % meta.kind.cardinality
                if meta.is_categorical else "continuous")
        variables.append({"name": meta.name, "kind": kind,
                          "family": meta.family.value})
    _emit({"n_rows": table.n_rows, "n_dropped": table.n_dropped,
           "n_variables": len(variables), "variables": variables}, args.out)
    return EXIT_OK


def _cmd_summarize(args) -> int:
    table = load_csv(args.data, args.target)
    split = args.target if args.by_target else None
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "summary.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["name", "kind", "levels", "mean", "sd", "min",
                         "max", "by_target"])
        for name in table.names:
            summary = column_summary(table, name, by_target=split)
            per_level = (json.dumps(summary.by_target, sort_keys=True)
                         if summary.by_target else "")
            if summary.counts is not None:
                levels = ";".join(f"{lvl}:{cnt}"
                                  for lvl, cnt in summary.counts.items())
                writer.writerow([name, summary.kind, levels, "", "", "", "",
                                 per_level])
            else:
                stats = summary.stats
                writer.writerow([name, summary.kind, "",
                                 f"{stats['mean']:.6g}", f"{stats['sd']:.6g}",
                                 f"{stats['min']:.6g}", f"{stats['max']:.6g}",
                                 per_level])
    print(csv_path)
    if not args.no_figures:
        from .figures import render_table_overview

        figure_path = out_dir / "summary.png"
        render_table_overview(table, figure_path)
        print(figure_path)
    return EXIT_OK


def _cmd_select(args) -> int:
    table = load_csv(args.data, args.target)
    if args.method == "mi":
        if args.k is None:
            raise ValueError("mi selection needs --k")
        result = mi_select(table, args.target, args.k, seed=args.seed)
    else:
        result = mmmb(table, args.target, test=args.test, alpha=args.alpha)
    _emit(result.to_json_dict(), args.out)
    return EXIT_OK


def _cmd_discover(args) -> int:
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            config = PipelineConfig.from_json_dict(json.load(fh))
    else:
        raise ValueError("discover needs --config")
    overrides = {}
    for name in ("dataset", "target", "seed"):
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    if args.out_dir is not None:
        overrides["output_dir"] = args.out_dir
    if overrides:
        config = dataclasses.replace(config, **overrides)
        config.validate()
    report = run_pipeline(config)
    out = Path(config.output_dir)
    for name in report.manifest:
        print(out / name)
    if not args.no_figures:
        from .figures import render_graph

        figure_path = out / "graph.png"
        render_graph(report.result.graph, figure_path,
                     title=config.algorithm)
        print(figure_path)
    return EXIT_OK


def _cmd_claims(args) -> int:
    graph, params = _load_graph(args.graph)
    table = load_csv(args.data, args.target)
    provenance = {
        "algorithm": params.get("algorithm"),
        "test_or_score": params.get("test", params.get("score")),
        "alpha": params.get("alpha"),
        "graph_file": str(args.graph),
    }
    claims = edges_to_claims(graph, args.target, list(table.metas),
                             provenance)
    _emit(claims_to_json_dict(claims), args.out)
    return EXIT_OK


def _cmd_simulate(args) -> int:
    if args.degree is not None and args.density is not None:
        raise ValueError("give either --degree or --density, not both")
    degree = args.degree if (args.degree is not None
                             or args.density is not None) else 2.0
    spec = SimSpec(n_nodes=args.nodes, expected_degree=degree,
                   edge_density=args.density, n_rows=args.rows,
                   seed=args.seed)
    dag = random_dag(spec)
    table = simulate_discrete(dag, args.cardinality, args.rows,
                              seed=args.seed)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset_path = out_dir / "dataset.csv"
    truth_path = out_dir / "truth.json"
    table.to_csv(dataset_path)
    truth_path.write_text(_json_text(dag.to_json_dict()), encoding="utf-8")
    (out_dir / "truth.dot").write_text(to_dot(dag) + "\n", encoding="utf-8")
    print(dataset_path)
    print(truth_path)
    print(out_dir / "truth.dot")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    estimated, _ = _load_graph(args.est)
    truth, _ = _load_graph(args.truth)
    report = evaluate(estimated, truth)
    sys.stdout.write(_json_text(report.to_json_dict()))
    if args.csv:
        path = Path(args.csv)
        new_file = not path.exists()
        with open(path, "a", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            if new_file:
                writer.writerow(report.CSV_FIELDS)
            writer.writerow(report.to_csv_row())
    if args.figure:
        from .figures import render_metrics

        render_metrics(report, args.figure)
    return EXIT_OK


def _cmd_verify(args) -> int:
    exe = shutil.which("claimverify")
    if exe is None:
        raise ValueError(
            "claim verifier not installed (no 'claimverify' on PATH)")
    cmd = [exe, "verify", "--claims", args.claims]
    if args.model:
        cmd += ["--model", args.model]
    if args.out:
        cmd += ["--out", args.out]
    return subprocess.run(cmd, check=False).returncode


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="causalomics",
        description="Causal structure discovery on mixed-type tables, "
                    "with claim generation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load a dataset and report its shape")
    p.add_argument("--data", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("summarize",
                       help="per-column summary CSV plus overview figure")
    p.add_argument("--data", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--out-dir", default="out")
    p.add_argument("--by-target", action="store_true",
                   help="split summaries by target level")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=_cmd_summarize)

    p = sub.add_parser("select", help="run one feature-selection route")
    p.add_argument("--data", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--method", choices=("mi", "mmmb"), required=True)
    p.add_argument("--k", type=int, help="subset size for mi")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--test", default="auto")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_select)

    p = sub.add_parser("discover", help="run the full pipeline")
    p.add_argument("--config", required=True)
    p.add_argument("--dataset")
    p.add_argument("--target")
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=_cmd_discover)

    p = sub.add_parser("claims",
                       help="claims for edges touching the target")
    p.add_argument("--graph", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_claims)

    p = sub.add_parser("simulate",
                       help="random DAG plus a sampled dataset")
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--degree", type=float,
                   help="expected neighbors per node (default 2)")
    p.add_argument("--density", type=float,
                   help="edge probability per pair")
    p.add_argument("--cardinality", type=int, default=3)
    p.add_argument("--out-dir", default="out")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("evaluate",
                       help="grade an estimated graph against a true DAG")
    p.add_argument("--est", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--csv", help="append a delimited metrics row here")
    p.add_argument("--figure", help="write a metrics bar chart here")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("verify",
                       help="send a claims file to the external verifier")
    p.add_argument("--claims", required=True)
    p.add_argument("--model")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if not exc.code else int(exc.code)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
