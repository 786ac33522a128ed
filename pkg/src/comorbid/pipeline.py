"""End-to-end pipeline: one declarative JSON config in, a run directory
of persisted intermediates and a manifest out.

Stage order: ingest, cooccur, matrices, symmetrize, graphs, degrees,
eval, consensus, report. Every stage persists its outputs; the expensive
upstream stages (ingest, cooccur, matrices) are cached keyed by input
digests and reloaded from disk when nothing changed. All randomness
derives from the master seed, so reruns are byte-identical apart from
timings.json.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from . import __version__
from .consensus import build_consensus, save_ontology, save_ontology_csv
from .cooccur import (count_cooccurrences, fisher_method_outputs,
                      jaccard_matrix, save_fisher_results)
from .embeddings import load_embeddings, cosine_matrix
from .errors import ComorbidError, StageError, ValidationError
from .evaluation import bootstrap_spearman, pr_auc, vectorize_aligned
from .graphs import (degree_report, intersect_components, largest_component,
                     load_graph, save_degree_report, save_graph,
                     threshold_graph)
from .ingest import filter_lengths, load_cohort, load_gem, save_cohort
from .llm import adjacency_matrix, answers_from_responses, load_responses
from .matrix import InterconnectionMatrix, load_matrix, save_matrix
from .report import RunManifest, file_digest, save_manifest

RESERVED_METHOD_NAMES = ("fisher", "jaccard")

STAGES = ("ingest", "cooccur", "matrices", "symmetrize", "graphs",
          "degrees", "eval", "consensus", "report")


@dataclass
class RunConfig:
    out_dir: Path
    cohort: Path | None = None
    gem: Path | None = None
    min_len: int | None = None
    max_len: int | None = None
    embeddings: dict[str, Path] = field(default_factory=dict)
    llm_responses: dict[str, Path] = field(default_factory=dict)
    matrices: dict[str, Path] = field(default_factory=dict)
    fisher_kind: str = "count"
    llm_symmetrize: bool = True
    graph_quantile: float = 0.95
    clip_quantile: float = 0.997
    bootstrap_iterations: int = 500
    gt_methods: tuple[str, ...] = ("jaccard",)
    seed: int = 0

    def validate(self) -> None:
        if not 0.0 < self.graph_quantile < 1.0:
            raise ValidationError("graph_quantile must lie in (0, 1)")
        if not 0.0 < self.clip_quantile < 1.0:
            raise ValidationError("clip_quantile must lie in (0, 1)")
        if self.bootstrap_iterations < 1:
            raise ValidationError("bootstrap_iterations must be at least 1")
        if self.fisher_kind not in ("count", "odds_ratio", "pvalue"):
            raise ValidationError(f"unknown fisher_kind {self.fisher_kind!r}")
        if (self.min_len is None) != (self.max_len is None):
            raise ValidationError("min_len and max_len must be set together")
        if self.cohort is None and not (self.embeddings or self.llm_responses
                                        or self.matrices):
            raise ValidationError("config provides no inputs at all")
        if self.llm_responses and self.cohort is None:
            raise ValidationError(
                "LLM adjacency needs a cohort to define the vocabulary"
            )
        names = list(self.embeddings) + list(self.llm_responses) + list(self.matrices)
        if self.cohort is not None:
            names += list(RESERVED_METHOD_NAMES)
        if len(set(names)) != len(names):
            raise ValidationError(f"method names collide: {sorted(names)}")
        for path in self.input_files():
            if not Path(path).exists():
                raise ValidationError(f"input file does not exist: {path}")
        for method in self.gt_methods:
            if method not in names:
                raise ValidationError(
                    f"gt_method {method!r} is not a configured method"
                )

    def input_files(self) -> list[Path]:
        paths: list[Path] = []
        if self.cohort is not None:
            paths.append(self.cohort)
        if self.gem is not None:
            paths.append(self.gem)
        paths += list(self.embeddings.values())
        paths += list(self.llm_responses.values())
        paths += list(self.matrices.values())
        return paths

    def snapshot(self) -> dict:
        return {
            "out_dir": str(self.out_dir),
            "cohort": None if self.cohort is None else str(self.cohort),
            "gem": None if self.gem is None else str(self.gem),
            "min_len": self.min_len,
            "max_len": self.max_len,
            "embeddings": {k: str(v) for k, v in sorted(self.embeddings.items())},
            "llm_responses": {k: str(v) for k, v in sorted(self.llm_responses.items())},
            "matrices": {k: str(v) for k, v in sorted(self.matrices.items())},
            "fisher_kind": self.fisher_kind,
            "llm_symmetrize": self.llm_symmetrize,
            "graph_quantile": self.graph_quantile,
            "clip_quantile": self.clip_quantile,
            "bootstrap_iterations": self.bootstrap_iterations,
            "gt_methods": list(self.gt_methods),
            "seed": self.seed,
        }


def load_config(path: str | Path, out_dir: str | Path | None = None) -> RunConfig:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    if not isinstance(obj, dict):
        raise ValidationError(f"{path}: run config must be a JSON object")
    base = path.parent

    def resolve(value: str | None) -> Path | None:
        if value is None:
            return None
        p = Path(value)
        return p if p.is_absolute() else base / p

    def resolve_map(value: dict | None) -> dict[str, Path]:
        if not value:
            return {}
        return {str(k): resolve(str(v)) for k, v in value.items()}

    resolved_out = out_dir if out_dir is not None else obj.get("out_dir")
    if resolved_out is None:
        raise ValidationError(f"{path}: config needs an out_dir")
    config = RunConfig(
        out_dir=Path(resolved_out),
        cohort=resolve(obj.get("cohort")),
        gem=resolve(obj.get("gem")),
        min_len=obj.get("min_len"),
        max_len=obj.get("max_len"),
        embeddings=resolve_map(obj.get("embeddings")),
        llm_responses=resolve_map(obj.get("llm_responses")),
        matrices=resolve_map(obj.get("matrices")),
        fisher_kind=obj.get("fisher_kind", "count"),
        llm_symmetrize=bool(obj.get("llm_symmetrize", True)),
        graph_quantile=float(obj.get("graph_quantile", 0.95)),
        clip_quantile=float(obj.get("clip_quantile", 0.997)),
        bootstrap_iterations=int(obj.get("bootstrap_iterations", 500)),
        gt_methods=tuple(obj.get("gt_methods", ["jaccard"])),
        seed=int(obj.get("seed", 0)),
    )
    config.validate()
    return config


def pair_seed(master_seed: int, name_a: str, name_b: str) -> int:
    """Stable per-pair sub-seed so adding a method never shifts the
    random stream of existing comparisons."""
    digest = hashlib.sha256(f"{master_seed}:{name_a}:{name_b}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


class _StageCache:
    """Digest-keyed skip list for the expensive stages."""

    def __init__(self, out_dir: Path):
        self.path = out_dir / ".stage_cache.json"
        self.entries: dict[str, str] = {}
        if self.path.exists():
            try:
                self.entries = json.loads(self.path.read_text(encoding="utf-8"))
            except (json.JSONDecodeError, OSError):
                self.entries = {}

    def key(self, payload: dict) -> str:
        return hashlib.sha256(
            json.dumps(payload, sort_keys=True).encode()
        ).hexdigest()

    def fresh(self, stage: str, key: str, outputs: list[Path]) -> bool:
        return (self.entries.get(stage) == key
                and all(p.exists() for p in outputs))

    def store(self, stage: str, key: str) -> None:
        self.entries[stage] = key
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.entries, fh, indent=2, sort_keys=True)
            fh.write("\n")


def run_pipeline(config: RunConfig) -> RunManifest:
    config.validate()
    out = config.out_dir
    out.mkdir(parents=True, exist_ok=True)
    digests = {str(p): file_digest(p) for p in config.input_files()}
    manifest = RunManifest(
        config=config.snapshot(),
        input_digests=dict(sorted(digests.items())),
        seed=config.seed,
        tool_version=__version__,
    )
    cache = _StageCache(out)
    state: dict = {"matrices": {}}

    def run_stage(name: str, fn: Callable[[], None]) -> None:
        start = time.perf_counter()
        try:
            fn()
        except ComorbidError as exc:
            manifest.record(name, time.perf_counter() - start)
            save_manifest(manifest, out)
            raise StageError(name, str(exc)) from exc
        manifest.record(name, time.perf_counter() - start)

    def stage_ingest() -> None:
        if config.cohort is None:
            return
        cohort_out = out / "cohort.csv"
        key = cache.key({
            "cohort": digests[str(config.cohort)],
            "gem": None if config.gem is None else digests[str(config.gem)],
            "min_len": config.min_len,
            "max_len": config.max_len,
        })
        if cache.fresh("ingest", key, [cohort_out]):
            state["cohort"] = load_cohort(cohort_out)
            return
        gem = load_gem(config.gem) if config.gem is not None else None
        cohort = load_cohort(config.cohort, gem)
        if config.min_len is not None:
            cohort = filter_lengths(cohort, config.min_len, config.max_len)
        save_cohort(cohort, cohort_out)
        cache.store("ingest", key)
        state["cohort"] = cohort

    def stage_cooccur() -> None:
        if "cohort" not in state:
            return
        mdir = out / "matrices"
        mdir.mkdir(exist_ok=True)
        jaccard_out = mdir / "jaccard.csv"
        fisher_out = mdir / "fisher.csv"
        sig_out = out / "fisher_significant.csv"
        key = cache.key({
            "cohort": file_digest(out / "cohort.csv"),
            "fisher_kind": config.fisher_kind,
        })
        if cache.fresh("cooccur", key, [jaccard_out, fisher_out, sig_out]):
            state["matrices"]["jaccard"] = load_matrix(jaccard_out)
            state["matrices"]["fisher"] = load_matrix(fisher_out)
            return
        counts = count_cooccurrences(state["cohort"])
        jaccard = jaccard_matrix(counts)
        fisher, results = fisher_method_outputs(counts, config.fisher_kind)
        save_matrix(jaccard, jaccard_out)
        save_matrix(fisher, fisher_out)
        save_fisher_results(results, sig_out, only_significant=True)
        cache.store("cooccur", key)
        # reload so downstream stages see the serialized precision whether
        # or not this stage was served from cache
        state["matrices"]["jaccard"] = load_matrix(jaccard_out)
        state["matrices"]["fisher"] = load_matrix(fisher_out)

    def stage_matrices() -> None:
        mdir = out / "matrices"
        mdir.mkdir(exist_ok=True)
        outputs = [mdir / f"{name}.csv"
                   for name in list(config.embeddings)
                   + list(config.llm_responses) + list(config.matrices)]
        key = cache.key({
            "inputs": {k: v for k, v in sorted(digests.items())},
            "llm_symmetrize": config.llm_symmetrize,
        })
        if cache.fresh("matrices", key, outputs):
            for path in outputs:
                m = load_matrix(path)
                state["matrices"][m.method_name] = m
            return
        for name, path in sorted(config.embeddings.items()):
            emb = load_embeddings(path, source_name=name)
            m = cosine_matrix(emb, l2_normalize=True)
            save_matrix(m, mdir / f"{name}.csv")
        for name, path in sorted(config.llm_responses.items()):
            vocab = state["cohort"].vocab
            answers, _ = answers_from_responses(load_responses(path), vocab)
            m = adjacency_matrix(answers, vocab, symmetrize=config.llm_symmetrize)
            m = InterconnectionMatrix(vocab=m.vocab, values=m.values,
                                      kind=m.kind, symmetric=m.symmetric,
                                      method_name=name)
            save_matrix(m, mdir / f"{name}.csv")
        for name, path in sorted(config.matrices.items()):
            m = load_matrix(path)
            m = InterconnectionMatrix(vocab=m.vocab, values=m.values,
                                      kind=m.kind, symmetric=m.symmetric,
                                      method_name=name)
            save_matrix(m, mdir / f"{name}.csv")

        cache.store("matrices", key)
        # reload so downstream stages see the serialized precision whether
        # or not this stage was served from cache
        for path in outputs:
            m = load_matrix(path)
            state["matrices"][m.method_name] = m

    def stage_symmetrize() -> None:
        sdir = out / "symmetric"
        sdir.mkdir(exist_ok=True)
        state["symmetric"] = {}
        for name, m in sorted(state["matrices"].items()):
            sym = m if m.symmetric else m.symmetrize()
            save_matrix(sym, sdir / f"{name}.csv")
            state["symmetric"][name] = sym

    def stage_graphs() -> None:
        gdir = out / "graphs"
        cdir = out / "components"
        gdir.mkdir(exist_ok=True)
        cdir.mkdir(exist_ok=True)
        state["graphs"] = {}
        state["components"] = {}
        for name, m in sorted(state["symmetric"].items()):
            graph = threshold_graph(m, config.graph_quantile)
            save_graph(graph, gdir / f"{name}.csv")
            component = largest_component(graph)
            save_graph(component, cdir / f"{name}.csv")
            state["graphs"][name] = graph
            state["components"][name] = component
        if len(state["components"]) >= 2:
            inter = intersect_components(
                [state["graphs"][k] for k in sorted(state["graphs"])]
            )
            save_graph(inter, gdir / "intersection.csv")

    def stage_degrees() -> None:
        for name, component in sorted(state["components"].items()):
            save_degree_report(degree_report(component), out / "degrees" / name)

    def stage_eval() -> None:
        edir = out / "eval"
        edir.mkdir(exist_ok=True)
        names = sorted(state["symmetric"])
        correlations = []
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                x, y = vectorize_aligned(state["symmetric"][a],
                                         state["symmetric"][b])
                result = bootstrap_spearman(
                    x, y,
                    n_boot=config.bootstrap_iterations,
                    seed=pair_seed(config.seed, a, b),
                    method_a=a,
                    method_b=b,
                )
                correlations.append(result.as_dict())
        with open(edir / "correlations.json", "w", encoding="utf-8",
                  newline="\n") as fh:
            json.dump(correlations, fh, indent=2, sort_keys=True)
            fh.write("\n")
        praucs = []
        for gt_name in sorted(config.gt_methods):
            for cand in names:
                if cand == gt_name:
                    continue
                result = pr_auc(state["symmetric"][gt_name],
                                state["symmetric"][cand],
                                gt_quantile=config.graph_quantile)
                praucs.append(result.as_dict())
        with open(edir / "prauc.json", "w", encoding="utf-8", newline="\n") as fh:
            json.dump(praucs, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def stage_consensus() -> None:
        if len(state["graphs"]) < 2:
            return
        onto = build_consensus([state["graphs"][k] for k in sorted(state["graphs"])])
        save_ontology(onto, out / "consensus" / "ontology.json")
        save_ontology_csv(onto, out / "consensus" / "ontology.csv")

    def stage_report() -> None:
        from .report import heatmap_export
        hdir = out / "heatmaps"
        hdir.mkdir(exist_ok=True)
        transforms = [f"clip({config.clip_quantile})", "minmax"]
        for name, m in sorted(state["symmetric"].items()):
            heatmap_export(m, transforms, hdir / f"{name}.csv")

    stage_fns = {
        "ingest": stage_ingest,
        "cooccur": stage_cooccur,
        "matrices": stage_matrices,
        "symmetrize": stage_symmetrize,
        "graphs": stage_graphs,
        "degrees": stage_degrees,
        "eval": stage_eval,
        "consensus": stage_consensus,
        "report": stage_report,
    }
    for name in STAGES:
        run_stage(name, stage_fns[name])
    save_manifest(manifest, out)
    return manifest
