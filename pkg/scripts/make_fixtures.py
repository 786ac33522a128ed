#!/usr/bin/env python3
"""Regenerate the end-to-end test fixtures.

Writes tests/fixtures/golden_inputs/ (a synthetic cohort, two embedding
CSVs, two precomputed matrices, persisted LLM responses, and a run
config) and tests/fixtures/golden/ (the pipeline output for that config,
minus wall-clock and cache bookkeeping files).

Everything is seeded, so reruns reproduce the same bytes. Rerun after
any intentional change to output formats or pipeline behavior, and
commit the result.
"""

from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from comorbid.cooccur import count_cooccurrences, jaccard_matrix
from comorbid.embeddings import EmbeddingSet, save_embeddings
from comorbid.ingest import load_cohort, save_cohort, synth_cohort
from comorbid.matrix import InterconnectionMatrix, save_matrix
from comorbid.pipeline import load_config, run_pipeline

EXCLUDED = {"timings.json", ".stage_cache.json"}


def write_inputs(inputs: Path) -> None:
    if inputs.exists():
        shutil.rmtree(inputs)
    inputs.mkdir(parents=True)

    cohort = synth_cohort(
        400, 20,
        [("C34", "I10", 6.0), ("E11", "C50", 4.0)],
        seed=7,
    )
    save_cohort(cohort, inputs / "cohort.csv")
    cohort = load_cohort(inputs / "cohort.csv")
    codes = cohort.vocab.codes
    n = len(codes)

    # emb_a and pre_x lean on the cohort's own Jaccard structure so that
    # several methods agree on the strongest edges and the consensus
    # exercises more than one support tier; emb_b and pre_y stay
    # independent of the cohort.
    jaccard = jaccard_matrix(count_cooccurrences(cohort)).values

    rng = np.random.default_rng(101)
    vectors = jaccard / jaccard.max() + np.eye(n) + 0.15 * rng.standard_normal((n, n))
    save_embeddings(
        EmbeddingSet(vocab=cohort.vocab, vectors=vectors,
                     source_name="emb_a"),
        inputs / "emb_a.csv",
    )
    rng = np.random.default_rng(202)
    save_embeddings(
        EmbeddingSet(vocab=cohort.vocab,
                     vectors=2.5 * rng.standard_normal((n, 5)),
                     source_name="emb_b"),
        inputs / "emb_b.csv",
    )

    rng = np.random.default_rng(303)
    noise = rng.random((n, n))
    noise = np.maximum(noise, noise.T)
    sim = 0.8 * (jaccard / jaccard.max()) + 0.2 * noise
    np.fill_diagonal(sim, 1.0)
    save_matrix(
        InterconnectionMatrix(vocab=cohort.vocab, values=sim,
                              kind="similarity", symmetric=True,
                              method_name="pre_x"),
        inputs / "pre_x.csv",
    )
    rng = np.random.default_rng(404)
    score = rng.standard_normal((n, n))
    score = 0.5 * (score + score.T)
    save_matrix(
        InterconnectionMatrix(vocab=cohort.vocab, values=score,
                              kind="score", symmetric=True,
                              method_name="pre_y"),
        inputs / "pre_y.csv",
    )

    # Persisted LLM responses: eight parseable answers (one fenced, one
    # with an out-of-vocabulary code, one non-JSON reply) plus one error
    # record, covering every branch the parser handles.
    assert "Q99" not in codes
    planted = ["C34", "I10", "E11", "C50"]
    sources = planted + [c for c in codes if c not in planted][:4]
    records = []
    for i, source in enumerate(sources):
        # answer with the source's strongest cohort neighbors so the
        # adjacency overlaps the co-occurrence methods, but keep the
        # total edge mass under the graph quantile's tail
        row = jaccard[codes.index(source)]
        order = np.argsort(-row)
        answer = [codes[j] for j in order if codes[j] != source]
        answer = answer[:2 if i % 2 == 0 else 1]
        if i == 2:
            answer.append("Q99")
        body = json.dumps({"comment": f"neighbors of {source}",
                           "answer": answer})
        if i == 4:
            body = f"```json\n{body}\n```"
        if i == 6:
            body = "The association profile is unclear for this category."
        records.append({"icd_code": source, "response": body})
    spare = next(c for c in codes if c not in sources)
    records.append({"icd_code": spare, "error": "HTTP 503"})
    with open(inputs / "responses.jsonl", "w", encoding="utf-8",
              newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")

    config = {
        "cohort": "cohort.csv",
        "embeddings": {"emb_a": "emb_a.csv", "emb_b": "emb_b.csv"},
        "llm_responses": {"llm": "responses.jsonl"},
        "matrices": {"pre_x": "pre_x.csv", "pre_y": "pre_y.csv"},
        "fisher_kind": "count",
        "graph_quantile": 0.95,
        "clip_quantile": 0.997,
        "bootstrap_iterations": 200,
        "gt_methods": ["jaccard"],
        "seed": 7,
        "out_dir": "out",
    }
    with open(inputs / "run.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(config, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_golden(inputs: Path, golden: Path) -> None:
    """Run the pipeline exactly the way the test suite does: from a scratch
    copy of the inputs, with relative paths, so no absolute path leaks
    into the recorded outputs."""
    with tempfile.TemporaryDirectory() as tmp:
        work = Path(tmp) / "work"
        shutil.copytree(inputs, work)
        old_cwd = os.getcwd()
        try:
            os.chdir(work)
            config = load_config(Path("run.json"), out_dir=Path("out"))
            run_pipeline(config)
        finally:
            os.chdir(old_cwd)
        if golden.exists():
            shutil.rmtree(golden)
        shutil.copytree(work / "out", golden,
                        ignore=lambda d, names: [x for x in names
                                                 if x in EXCLUDED])


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--fixtures",
        default=str(Path(__file__).resolve().parent.parent
                    / "tests" / "fixtures"),
        help="directory that holds golden_inputs/ and golden/",
    )
    args = parser.parse_args()
    fixtures = Path(args.fixtures)
    inputs = fixtures / "golden_inputs"
    golden = fixtures / "golden"
    write_inputs(inputs)
    run_golden(inputs, golden)
    n_files = sum(1 for p in golden.rglob("*") if p.is_file())
    print(f"wrote {inputs} and {golden} ({n_files} golden files)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
