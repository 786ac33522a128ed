"""Consensus ontology: aggregate thresholded method graphs into one edge
list with per-edge support counts and confidence tiers.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .codes import Vocabulary, is_cancer, validate_code
from .errors import FormatError, ValidationError
from .graphs import MethodGraph

TIER_HIGH_FRACTION = 0.7
TIER_LOW_FRACTION = 0.3


@dataclass(frozen=True)
class ConsensusEdge:
    code_a: str
    code_b: str
    support_count: int
    supporting_methods: tuple[str, ...]
    tier: str


@dataclass(frozen=True)
class ConsensusOntology:
    vocab: Vocabulary
    edges: tuple[ConsensusEdge, ...]
    methods: tuple[str, ...]

    @property
    def n_methods(self) -> int:
        return len(self.methods)


def assign_tier(
    support: int,
    n_methods: int,
    high_fraction: float = TIER_HIGH_FRACTION,
    low_fraction: float = TIER_LOW_FRACTION,
) -> str:
    """high when support >= ceil(high_fraction*K), low when support <=
    ceil(low_fraction*K), medium between."""
    if not 1 <= support <= n_methods:
        raise ValidationError(f"support {support} outside [1, {n_methods}]")
    high_cut = math.ceil(high_fraction * n_methods)
    low_cut = math.ceil(low_fraction * n_methods)
    if support >= high_cut:
        return "high"
    if support <= low_cut:
        return "low"
    return "medium"


def build_consensus(
    graphs: Sequence[MethodGraph],
    high_fraction: float = TIER_HIGH_FRACTION,
    low_fraction: float = TIER_LOW_FRACTION,
) -> ConsensusOntology:
    """Union every graph's edges; each edge records exactly the methods
    containing it. Edge order: support descending, then lexicographic."""
    if len(graphs) < 2:
        raise ValidationError("consensus needs at least 2 graphs")
    names = [g.method_name for g in graphs]
    if len(set(names)) != len(names):
        raise ValidationError(f"duplicate method names in {names}")
    support: dict[tuple[str, str], list[str]] = {}
    for graph in graphs:
        for edge in graph.edges:
            support.setdefault(edge, []).append(graph.method_name)
    all_codes = sorted({c for g in graphs for c in g.vocab})
    k = len(graphs)
    edges = tuple(
        ConsensusEdge(
            code_a=a,
            code_b=b,
            support_count=len(methods),
            supporting_methods=tuple(sorted(methods)),
            tier=assign_tier(len(methods), k, high_fraction, low_fraction),
        )
        for (a, b), methods in sorted(
            support.items(), key=lambda item: (-len(item[1]), item[0])
        )
    )
    return ConsensusOntology(
        vocab=Vocabulary(all_codes),
        edges=edges,
        methods=tuple(sorted(names)),
    )


def query_neighbors(
    onto: ConsensusOntology, code: str, min_support: int = 1
) -> list[ConsensusEdge]:
    """Edges incident to `code` with support_count >= min_support, sorted
    by support descending then lexicographic endpoints."""
    code = validate_code(code)
    hits = [e for e in onto.edges
            if code in (e.code_a, e.code_b) and e.support_count >= min_support]
    hits.sort(key=lambda e: (-e.support_count, e.code_a, e.code_b))
    return hits


def radar_data(
    onto: ConsensusOntology,
    code: str,
    graphs: Sequence[MethodGraph],
    cancer_only: bool = False,
) -> tuple[list[str], list[str], list[list[int]]]:
    """Neighbor-by-method 0/1 table for a query code.

    Rows are codes connected to the query in at least one method (only
    cancer codes when cancer_only); columns are method names; cell 1
    means that method's graph contains the edge.
    """
    code = validate_code(code)
    neighbors = sorted({
        e.code_b if e.code_a == code else e.code_a
        for e in query_neighbors(onto, code, min_support=1)
        if not cancer_only or is_cancer(e.code_b if e.code_a == code else e.code_a)
    })
    methods = [g.method_name for g in graphs]
    table = [
        [int(tuple(sorted((code, n))) in g.edges) for g in graphs]
        for n in neighbors
    ]
    return neighbors, methods, table


def save_radar_csv(
    neighbors: Sequence[str],
    methods: Sequence[str],
    table: Sequence[Sequence[int]],
    path: str | Path,
) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("code," + ",".join(methods) + "\n")
        for code, row in zip(neighbors, table):
            fh.write(code + "," + ",".join(str(v) for v in row) + "\n")


def ontology_to_dict(onto: ConsensusOntology) -> dict:
    return {
        "n_methods": onto.n_methods,
        "methods": list(onto.methods),
        "edges": [
            {
                "a": e.code_a,
                "b": e.code_b,
                "support": e.support_count,
                "methods": list(e.supporting_methods),
                "tier": e.tier,
            }
            for e in onto.edges
        ],
    }


def save_ontology(onto: ConsensusOntology, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(ontology_to_dict(onto), fh, indent=2, sort_keys=True)
        fh.write("\n")


def save_ontology_csv(onto: ConsensusOntology, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("code_a,code_b,support,tier,methods\n")
        for e in onto.edges:
            fh.write(f"{e.code_a},{e.code_b},{e.support_count},{e.tier},"
                     + ";".join(e.supporting_methods) + "\n")


def load_ontology(path: str | Path) -> ConsensusOntology:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    for key in ("n_methods", "methods", "edges"):
        if key not in obj:
            raise FormatError(f"{path}: missing `{key}`")
    methods = tuple(obj["methods"])
    if len(methods) != obj["n_methods"]:
        raise FormatError(f"{path}: n_methods does not match methods list")
    edges = []
    codes: set[str] = set()
    for item in obj["edges"]:
        a, b = item["a"], item["b"]
        codes.update((a, b))
        edges.append(ConsensusEdge(
            code_a=a,
            code_b=b,
            support_count=int(item["support"]),
            supporting_methods=tuple(item["methods"]),
            tier=str(item["tier"]),
        ))
    return ConsensusOntology(
        vocab=Vocabulary(sorted(codes)),
        edges=tuple(edges),
        methods=methods,
    )
