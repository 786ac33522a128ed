"""Quantile-threshold graphs, connected components, degree slices with a
cancer partition, intersections, and edge differences.

Graphs are undirected with no self-loops. Edges are stored as
lexicographically ordered code pairs so set operations and serialization
are deterministic.
"""

from __future__ import annotations

import csv
import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .codes import Vocabulary, is_cancer
from .errors import FormatError, ValidationError
from .matrix import InterconnectionMatrix
from .transforms import quantile

SLICES = (
    "all_all",
    "cancer_any",
    "noncancer_any",
    "cancer_cancer",
    "noncancer_cancer",
    "noncancer_noncancer",
)


def _ordered(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class MethodGraph:
    vocab: Vocabulary
    edges: frozenset[tuple[str, str]]
    method_name: str
    threshold: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "edges", frozenset(self.edges))
        for a, b in self.edges:
            if a == b:
                raise ValidationError(f"self-loop on {a}")
            if a > b:
                raise ValidationError(f"edge ({a}, {b}) not in canonical order")
            if a not in self.vocab or b not in self.vocab:
                raise ValidationError(f"edge ({a}, {b}) leaves the vocabulary")

    @property
    def n_vertices(self) -> int:
        return len(self.vocab)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def neighbors(self) -> dict[str, set[str]]:
        adj: dict[str, set[str]] = {code: set() for code in self.vocab}
        for a, b in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        return adj

    def degree(self, code: str) -> int:
        if code not in self.vocab:
            raise ValidationError(f"code {code} not in graph")
        return sum(1 for e in self.edges if code in e)


def threshold_graph(matrix: InterconnectionMatrix, q: float = 0.95) -> MethodGraph:
    """Connect codes whose score is strictly above the off-diagonal
    q-quantile. Ties at the threshold fall below."""
    if not 0.0 < q < 1.0:
        raise ValidationError(f"graph quantile must lie in (0, 1), got {q}")
    if not matrix.symmetric:
        raise ValidationError(
            "threshold_graph requires a symmetric matrix; symmetrize first"
        )
    bound = quantile(matrix.off_diagonal(), q)
    codes = matrix.vocab.codes
    rows, cols = np.nonzero(np.triu(matrix.values, k=1) > bound)
    edges = frozenset(_ordered(codes[i], codes[j]) for i, j in zip(rows, cols))
    return MethodGraph(
        vocab=matrix.vocab,
        edges=edges,
        method_name=matrix.method_name,
        threshold=float(bound),
    )


def _components(graph: MethodGraph) -> list[list[str]]:
    adj = graph.neighbors()
    seen: set[str] = set()
    components: list[list[str]] = []
    for start in graph.vocab:
        if start in seen:
            continue
        queue = deque([start])
        seen.add(start)
        members = [start]
        while queue:
            node = queue.popleft()
            for nxt in adj[node]:
                if nxt not in seen:
                    seen.add(nxt)
                    members.append(nxt)
                    queue.append(nxt)
        components.append(sorted(members))
    return components


def subgraph(graph: MethodGraph, codes: Iterable[str]) -> MethodGraph:
    keep = set(codes)
    vocab = Vocabulary(sorted(keep))
    edges = frozenset(e for e in graph.edges if e[0] in keep and e[1] in keep)
    return MethodGraph(vocab=vocab, edges=edges,
                       method_name=graph.method_name, threshold=graph.threshold)


def largest_component(graph: MethodGraph) -> MethodGraph:
    """Induced subgraph of the largest connected component; size ties are
    broken by the lexicographically smallest member."""
    if graph.n_vertices == 0:
        return graph
    components = _components(graph)
    top = max(len(c) for c in components)
    best = min((c for c in components if len(c) == top), key=lambda c: c[0])
    return subgraph(graph, best)


@dataclass(frozen=True)
class BoxplotSummary:
    """Five-number summary, whisker bounds at the 1.5*IQR fences clamped
    to the data range, and the count of points outside the fences. An
    empty sample reports n=0 with every statistic at 0."""

    n: int
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float
    whisker_low: float
    whisker_high: float
    outliers: int

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "minimum": self.minimum,
            "q1": self.q1,
            "median": self.median,
            "q3": self.q3,
            "maximum": self.maximum,
            "whisker_low": self.whisker_low,
            "whisker_high": self.whisker_high,
            "outliers": self.outliers,
        }


def boxplot_summary(values: Sequence[float]) -> BoxplotSummary:
    v = np.asarray(list(values), dtype=np.float64)
    if v.size == 0:
        return BoxplotSummary(0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0)
    q1 = quantile(v, 0.25)
    q3 = quantile(v, 0.75)
    iqr = q3 - q1
    lo_fence = q1 - 1.5 * iqr
    hi_fence = q3 + 1.5 * iqr
    inside = v[(v >= lo_fence) & (v <= hi_fence)]
    # fences always bracket the quartiles, so inside is never empty
    return BoxplotSummary(
        n=int(v.size),
        minimum=float(v.min()),
        q1=q1,
        median=quantile(v, 0.5),
        q3=q3,
        maximum=float(v.max()),
        whisker_low=float(inside.min()),
        whisker_high=float(inside.max()),
        outliers=int(v.size - inside.size),
    )


@dataclass(frozen=True)
class DegreeReport:
    """Per-code degrees for the six cancer-partition slices.

    Slice key semantics: `<group>_<neighbors>` where group selects which
    codes get a row and neighbors selects which adjacent codes count.
    """

    degrees: dict[str, dict[str, int]]
    summaries: dict[str, BoxplotSummary]


def degree_report(
    graph: MethodGraph,
    cancer: Callable[[str], bool] = is_cancer,
) -> DegreeReport:
    adj = graph.neighbors()
    flags = {code: bool(cancer(code)) for code in graph.vocab}

    def deg(code: str, want_cancer: bool | None) -> int:
        if want_cancer is None:
            return len(adj[code])
        return sum(1 for n in adj[code] if flags[n] == want_cancer)

    degrees: dict[str, dict[str, int]] = {
        "all_all": {c: deg(c, None) for c in graph.vocab},
        "cancer_any": {c: deg(c, None) for c in graph.vocab if flags[c]},
        "noncancer_any": {c: deg(c, None) for c in graph.vocab if not flags[c]},
        "cancer_cancer": {c: deg(c, True) for c in graph.vocab if flags[c]},
        "noncancer_cancer": {c: deg(c, True) for c in graph.vocab if not flags[c]},
        "noncancer_noncancer": {c: deg(c, False) for c in graph.vocab if not flags[c]},
    }
    summaries = {name: boxplot_summary(list(vals.values()))
                 for name, vals in degrees.items()}
    return DegreeReport(degrees=degrees, summaries=summaries)


def intersect_components(graphs: Sequence[MethodGraph]) -> MethodGraph:
    """Intersection of the largest components: vertices present in all of
    them, edges present in every one restricted to those vertices."""
    if len(graphs) < 2:
        raise ValidationError("intersection needs at least 2 graphs")
    components = [largest_component(g) for g in graphs]
    shared = set(components[0].vocab.codes)
    for comp in components[1:]:
        shared &= set(comp.vocab.codes)
    edges = set(components[0].edges)
    for comp in components[1:]:
        edges &= comp.edges
    edges = {e for e in edges if e[0] in shared and e[1] in shared}
    return MethodGraph(
        vocab=Vocabulary(sorted(shared)),
        edges=frozenset(edges),
        method_name="intersection",
        threshold=None,
    )


def edge_difference(a: MethodGraph, b: MethodGraph) -> set[tuple[str, str]]:
    """Edges of `a` on the shared vocabulary that `b` lacks."""
    shared = set(a.vocab.codes) & set(b.vocab.codes)
    return {e for e in a.edges
            if e[0] in shared and e[1] in shared and e not in b.edges}


def _graph_meta_path(path: Path) -> Path:
    return path.with_suffix(".meta.json")


def save_graph(graph: MethodGraph, path: str | Path) -> None:
    """Edge-list CSV (code_a,code_b, sorted) plus a metadata sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("code_a,code_b\n")
        for a, b in sorted(graph.edges):
            fh.write(f"{a},{b}\n")
    meta = {
        "method_name": graph.method_name,
        "threshold": graph.threshold,
        "vocab_size": graph.n_vertices,
        "vocab": list(graph.vocab.codes),
    }
    with open(_graph_meta_path(path), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_graph(path: str | Path) -> MethodGraph:
    path = Path(path)
    meta_path = _graph_meta_path(path)
    if not meta_path.exists():
        raise FormatError(f"{path}: missing metadata sidecar {meta_path.name}")
    with open(meta_path, encoding="utf-8") as fh:
        meta = json.load(fh)
    for key in ("method_name", "threshold", "vocab_size", "vocab"):
        if key not in meta:
            raise FormatError(f"{meta_path}: missing `{key}`")
    vocab = Vocabulary(meta["vocab"])
    if len(vocab) != meta["vocab_size"]:
        raise FormatError(f"{meta_path}: vocab_size does not match vocab list")
    edges: set[tuple[str, str]] = set()
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["code_a", "code_b"]:
            raise FormatError(f"{path}: expected header code_a,code_b")
        for row in reader:
            if not row:
                continue
            if len(row) != 2:
                raise FormatError(f"{path}: malformed edge row {row!r}")
            edges.add(_ordered(row[0], row[1]))
    threshold = meta["threshold"]
    return MethodGraph(
        vocab=vocab,
        edges=frozenset(edges),
        method_name=str(meta["method_name"]),
        threshold=None if threshold is None else float(threshold),
    )


def save_degree_report(report: DegreeReport, out_dir: str | Path) -> None:
    """One CSV per slice (code,degree) plus a summary JSON."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in SLICES:
        with open(out_dir / f"degree_{name}.csv", "w", encoding="utf-8",
                  newline="\n") as fh:
            fh.write("code,degree\n")
            for code in sorted(report.degrees[name]):
                fh.write(f"{code},{report.degrees[name][code]}\n")
    summary = {name: s.as_dict() for name, s in report.summaries.items()}
    with open(out_dir / "degree_summary.json", "w", encoding="utf-8",
              newline="\n") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
