"""Command-line front-end.

Exit codes: 0 success, 2 validation or input-format error, 3 pipeline
stage failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .consensus import (build_consensus, load_ontology, query_neighbors,
                        radar_data, save_ontology, save_radar_csv)
from .cooccur import (count_cooccurrences, fisher_method_outputs,
                      jaccard_matrix, joint_counts_matrix,
                      save_fisher_results)
from .embeddings import cosine_matrix, load_embeddings
from .errors import ComorbidError, FormatError, StageError
from .evaluation import bootstrap_spearman, pr_auc, vectorize_aligned
from .graphs import (degree_report, edge_difference, intersect_components,
                     largest_component, load_graph, save_degree_report,
                     save_graph, threshold_graph)
from .ingest import filter_lengths, load_cohort, load_gem, save_cohort
from .llm import (adjacency_matrix, answers_from_responses,
                  load_endpoint_config, load_responses, query_endpoint,
                  render_prompt)
from .matrix import load_matrix, save_matrix
from .pipeline import load_config, run_pipeline
from .report import heatmap_export, load_manifest, verify_manifest


def _print_json(obj) -> None:
    json.dump(obj, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def _symmetric(path: str):
    matrix = load_matrix(path)
    return matrix if matrix.symmetric else matrix.symmetrize()


def cmd_run(args) -> int:
    config = load_config(args.config, out_dir=args.out)
    manifest = run_pipeline(config)
    _print_json({"out_dir": str(config.out_dir), "steps": manifest.steps})
    return 0


def cmd_ingest(args) -> int:
    gem = load_gem(args.gem) if args.gem else None
    cohort = load_cohort(args.input, gem)
    if args.min_len is not None or args.max_len is not None:
        if args.min_len is None or args.max_len is None:
            raise FormatError("--min-len and --max-len must be given together")
        cohort = filter_lengths(cohort, args.min_len, args.max_len)
    save_cohort(cohort, args.out)
    _print_json({
        "patients": len(cohort),
        "codes": len(cohort.vocab),
        "out": str(args.out),
    })
    return 0


def cmd_cooccur(args) -> int:
    cohort = load_cohort(args.cohort)
    counts = count_cooccurrences(cohort)
    out = Path(args.out_prefix)
    out.mkdir(parents=True, exist_ok=True)
    save_matrix(joint_counts_matrix(counts), out / "counts.csv")
    save_matrix(jaccard_matrix(counts), out / "jaccard.csv")
    fisher, results = fisher_method_outputs(counts, "count")
    save_matrix(fisher, out / "fisher_counts.csv")
    save_fisher_results(results, out / "fisher_results.csv")
    n_sig = sum(1 for r in results if r.significant)
    _print_json({
        "patients": counts.total_patients,
        "codes": len(counts.vocab),
        "pairs_tested": len(results),
        "significant": n_sig,
        "out": str(out),
    })
    return 0


def cmd_cosine(args) -> int:
    emb = load_embeddings(args.embeddings, source_name=args.name)
    matrix = cosine_matrix(emb, l2_normalize=not args.no_normalize)
    save_matrix(matrix, args.out)
    _print_json({"codes": len(matrix.vocab), "out": str(args.out)})
    return 0


def cmd_llm_render(args) -> int:
    sys.stdout.write(render_prompt(args.code, args.description))
    sys.stdout.write("\n")
    return 0


def _read_descriptions(path: str) -> list[tuple[str, str]]:
    items: list[tuple[str, str]] = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"code", "description"} <= set(reader.fieldnames):
            raise FormatError(f"{path}: expected CSV columns code, description")
        for row in reader:
            items.append((row["code"].strip(), row["description"].strip()))
    return items


def cmd_llm_query(args) -> int:
    config = load_endpoint_config(args.endpoint)
    items = [(code, render_prompt(code, desc))
             for code, desc in _read_descriptions(args.inputs)]
    records = query_endpoint(config, items, args.out)
    failures = sum(1 for r in records if r.error is not None)
    _print_json({"prompts": len(items), "failures": failures, "out": str(args.out)})
    return 0


def _cohort_vocab(path: str):
    return load_cohort(path).vocab


def cmd_llm_parse(args) -> int:
    vocab = _cohort_vocab(args.cohort)
    answers, failures = answers_from_responses(load_responses(args.responses), vocab)
    _print_json({
        "parsed": len(answers),
        "parse_failures": failures,
        "dropped_entries": sum(a.dropped for a in answers),
        "out_of_vocab": sum(len(a.out_of_vocab) for a in answers),
    })
    return 0


def cmd_llm_matrix(args) -> int:
    vocab = _cohort_vocab(args.cohort)
    answers, _ = answers_from_responses(load_responses(args.responses), vocab)
    matrix = adjacency_matrix(answers, vocab, symmetrize=not args.no_symmetrize)
    save_matrix(matrix, args.out)
    _print_json({
        "codes": len(vocab),
        "nonzero": int(matrix.values.sum()),
        "out": str(args.out),
    })
    return 0


def cmd_graph_build(args) -> int:
    graph = threshold_graph(_symmetric(args.matrix), args.q)
    save_graph(graph, args.out)
    _print_json({
        "vertices": graph.n_vertices,
        "edges": graph.n_edges,
        "threshold": graph.threshold,
        "out": str(args.out),
    })
    return 0


def cmd_graph_component(args) -> int:
    component = largest_component(load_graph(args.input))
    save_graph(component, args.out)
    _print_json({
        "vertices": component.n_vertices,
        "edges": component.n_edges,
        "out": str(args.out),
    })
    return 0


def cmd_graph_intersect(args) -> int:
    graphs = [load_graph(p) for p in args.graphs]
    inter = intersect_components(graphs)
    save_graph(inter, args.out)
    _print_json({
        "vertices": inter.n_vertices,
        "edges": inter.n_edges,
        "out": str(args.out),
    })
    return 0


def cmd_graph_degrees(args) -> int:
    graph = load_graph(args.input)
    if args.component:
        graph = largest_component(graph)
    report = degree_report(graph)
    save_degree_report(report, args.out_dir)
    _print_json({name: s.as_dict() for name, s in report.summaries.items()})
    return 0


def cmd_graph_diff(args) -> int:
    diff = edge_difference(load_graph(args.a), load_graph(args.b))
    _print_json({"edges": [list(e) for e in sorted(diff)]})
    return 0


def cmd_eval_corr(args) -> int:
    x, y = vectorize_aligned(_symmetric(args.a), _symmetric(args.b))
    result = bootstrap_spearman(
        x, y, n_boot=args.boot, seed=args.seed,
        method_a=Path(args.a).stem, method_b=Path(args.b).stem,
    )
    _print_json(result.as_dict())
    return 0


def cmd_eval_prauc(args) -> int:
    result = pr_auc(_symmetric(args.gt), _symmetric(args.cand), gt_quantile=args.q)
    _print_json(result.as_dict())
    return 0


def cmd_consensus_build(args) -> int:
    graphs = [load_graph(p) for p in args.graphs]
    onto = build_consensus(graphs)
    save_ontology(onto, args.out)
    _print_json({
        "methods": onto.n_methods,
        "edges": len(onto.edges),
        "out": str(args.out),
    })
    return 0


def cmd_consensus_query(args) -> int:
    onto = load_ontology(args.onto)
    hits = query_neighbors(onto, args.code, args.min_support)
    _print_json([
        {
            "a": e.code_a,
            "b": e.code_b,
            "support": e.support_count,
            "methods": list(e.supporting_methods),
            "tier": e.tier,
        }
        for e in hits
    ])
    return 0


def cmd_consensus_radar(args) -> int:
    onto = load_ontology(args.onto)
    graphs = [load_graph(p) for p in args.graphs]
    neighbors, methods, table = radar_data(
        onto, args.code, graphs, cancer_only=args.cancer_only
    )
    save_radar_csv(neighbors, methods, table, args.out)
    _print_json({"neighbors": len(neighbors), "out": str(args.out)})
    return 0


def cmd_report_heatmap(args) -> int:
    matrix = load_matrix(args.matrix)
    heatmap_export(matrix, args.transforms, args.out)
    _print_json({"transforms": args.transforms, "out": str(args.out)})
    return 0


def cmd_report_verify(args) -> int:
    manifest = load_manifest(args.run_dir)
    mismatches = verify_manifest(manifest)
    _print_json({"mismatches": mismatches})
    return 0 if not mismatches else 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="comorbid",
        description="Disease-interconnection matrices, graphs, and consensus "
                    "ontology from ICD-10 code sequences.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute the full pipeline from a config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="override the config out_dir")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("ingest", help="normalize a raw cohort CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--gem", default=None)
    p.add_argument("--min-len", type=int, default=None)
    p.add_argument("--max-len", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("cooccur", help="counts, Jaccard, and Fisher outputs")
    p.add_argument("--cohort", required=True)
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(fn=cmd_cooccur)

    p = sub.add_parser("cosine", help="cosine matrix from an embedding CSV")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--name", default=None, help="method name for the matrix")
    p.add_argument("--no-normalize", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_cosine)

    llm = sub.add_parser("llm", help="prompting, querying, parsing, adjacency")
    llm_sub = llm.add_subparsers(dest="llm_command", required=True)
    p = llm_sub.add_parser("render", help="print the prompt for one code")
    p.add_argument("--code", required=True)
    p.add_argument("--description", required=True)
    p.set_defaults(fn=cmd_llm_render)
    p = llm_sub.add_parser("query", help="send prompts to an endpoint")
    p.add_argument("--endpoint", required=True, help="endpoint config JSON")
    p.add_argument("--inputs", required=True, help="CSV with code,description")
    p.add_argument("--out", required=True, help="responses JSONL")
    p.set_defaults(fn=cmd_llm_query)
    p = llm_sub.add_parser("parse", help="parse persisted responses")
    p.add_argument("--responses", required=True)
    p.add_argument("--cohort", required=True)
    p.set_defaults(fn=cmd_llm_parse)
    p = llm_sub.add_parser("matrix", help="binary adjacency from responses")
    p.add_argument("--responses", required=True)
    p.add_argument("--cohort", required=True)
    p.add_argument("--no-symmetrize", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_llm_matrix)

    graph = sub.add_parser("graph", help="threshold graphs and degree analysis")
    graph_sub = graph.add_subparsers(dest="graph_command", required=True)
    p = graph_sub.add_parser("build", help="quantile-threshold graph")
    p.add_argument("--matrix", required=True)
    p.add_argument("--q", type=float, default=0.95)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_graph_build)
    p = graph_sub.add_parser("component", help="largest connected component")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_graph_component)
    p = graph_sub.add_parser("intersect", help="intersection of largest components")
    p.add_argument("--graphs", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_graph_intersect)
    p = graph_sub.add_parser("degrees", help="degree slices with cancer partition")
    p.add_argument("--input", required=True)
    p.add_argument("--component", action="store_true",
                   help="restrict to the largest component first")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=cmd_graph_degrees)
    p = graph_sub.add_parser("diff", help="edges of A missing from B")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.set_defaults(fn=cmd_graph_diff)

    ev = sub.add_parser("eval", help="matrix comparison metrics")
    ev_sub = ev.add_subparsers(dest="eval_command", required=True)
    p = ev_sub.add_parser("corr", help="bootstrap Spearman correlation")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--boot", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_eval_corr)
    p = ev_sub.add_parser("prauc", help="pseudo-ground-truth average precision")
    p.add_argument("--gt", required=True)
    p.add_argument("--cand", required=True)
    p.add_argument("--q", type=float, default=0.95)
    p.set_defaults(fn=cmd_eval_prauc)

    cons = sub.add_parser("consensus", help="consensus ontology")
    cons_sub = cons.add_subparsers(dest="consensus_command", required=True)
    p = cons_sub.add_parser("build", help="aggregate method graphs")
    p.add_argument("--graphs", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_consensus_build)
    p = cons_sub.add_parser("query", help="neighbors above a support level")
    p.add_argument("--onto", required=True)
    p.add_argument("--code", required=True)
    p.add_argument("--min-support", type=int, default=1)
    p.set_defaults(fn=cmd_consensus_query)
    p = cons_sub.add_parser("radar", help="neighbor-by-method 0/1 table")
    p.add_argument("--onto", required=True)
    p.add_argument("--code", required=True)
    p.add_argument("--graphs", nargs="+", required=True)
    p.add_argument("--cancer-only", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_consensus_radar)

    rep = sub.add_parser("report", help="plot-ready exports and manifests")
    rep_sub = rep.add_subparsers(dest="report_command", required=True)
    p = rep_sub.add_parser("heatmap", help="apply transforms and export")
    p.add_argument("--matrix", required=True)
    p.add_argument("--transforms", nargs="*", default=[],
                   help="e.g. 'clip(0.997)' minmax")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_report_heatmap)
    p = rep_sub.add_parser("verify", help="check manifest input digests")
    p.add_argument("--run-dir", required=True)
    p.set_defaults(fn=cmd_report_verify)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ComorbidError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
