"""Counting, Jaccard, Fisher exact, and BH adjustment against brute-force
set arithmetic and exact rational oracles."""

from fractions import Fraction
from math import comb

import numpy as np
import pytest

from comorbid.cooccur import (
    benjamini_hochberg,
    count_cooccurrences,
    fisher_exact_one_sided,
    fisher_method_outputs,
    fisher_tables,
    jaccard_matrix,
    joint_counts_matrix,
    save_fisher_results,
)
from comorbid.errors import ValidationError
from comorbid.ingest import Cohort, PatientSequence

from conftest import sequential_vocab


def make_cohort(patient_events):
    patients = tuple(
        PatientSequence(f"p{i:03d}", tuple(sorted(evs)))
        for i, evs in enumerate(patient_events)
    )
    return Cohort(patients=patients)


def hypergeom_upper_tail(a, b, c, d):
    """P(X >= a) for X hypergeometric with the table's margins, exactly."""
    ab, ac, n = a + b, a + c, a + b + c + d
    k_max = min(ab, ac)
    num = sum(Fraction(comb(ac, k) * comb(n - ac, ab - k)) for k in range(a, k_max + 1))
    return num / comb(n, ab)


# ---------------------------------------------------------------- Fisher


def test_fisher_balanced_table():
    p, odds = fisher_exact_one_sided(3, 1, 1, 3)
    assert abs(p - 17 / 70) < 1e-12
    assert odds == 9.0


def test_fisher_perfect_separation():
    p, odds = fisher_exact_one_sided(4, 0, 0, 4)
    assert abs(p - 1 / 70) < 1e-12
    # +0.5 in every cell because zeros are present
    assert odds == (4.5 * 4.5) / (0.5 * 0.5)


def test_fisher_minimal_a_gives_one():
    p, _ = fisher_exact_one_sided(0, 5, 5, 0)
    assert p == 1.0
    p, _ = fisher_exact_one_sided(0, 3, 2, 7)
    assert p == 1.0


def test_fisher_matches_exact_enumeration():
    rng = np.random.default_rng(42)
    for _ in range(300):
        a, b, c, d = (int(x) for x in rng.integers(0, 25, size=4))
        if a + b + c + d == 0:
            continue
        p, _ = fisher_exact_one_sided(a, b, c, d)
        assert abs(p - float(hypergeom_upper_tail(a, b, c, d))) < 1e-12


def test_fisher_large_margins_relative_accuracy():
    for table in [(40, 160, 40, 1760), (300, 700, 500, 1500), (320, 110, 101, 81)]:
        p, _ = fisher_exact_one_sided(*table)
        exact = float(hypergeom_upper_tail(*table))
        assert abs(p - exact) <= 1e-10 * exact


def test_fisher_rejects_bad_cells():
    with pytest.raises(ValidationError):
        fisher_exact_one_sided(-1, 2, 3, 4)
    with pytest.raises(ValidationError):
        fisher_exact_one_sided(1.5, 2, 3, 4)
    with pytest.raises(ValidationError):
        fisher_exact_one_sided(0, 0, 0, 0)


def test_fisher_odds_without_zeros_is_ad_over_bc():
    _, odds = fisher_exact_one_sided(6, 2, 3, 4)
    assert odds == (6 * 4) / (2 * 3)


# ------------------------------------------------------------------- BH


def bh_sorted_oracle(p):
    """Textbook formulation on the sorted vector, undone at the end."""
    p = np.asarray(p, dtype=np.float64)
    m = len(p)
    order = np.argsort(p, kind="stable")
    adj = np.empty(m)
    running = np.inf
    for pos in range(m - 1, -1, -1):
        running = min(running, p[order[pos]] * m / (pos + 1))
        adj[order[pos]] = min(running, 1.0)
    return adj


def test_bh_uniform_grid_collapses_to_max():
    adj = benjamini_hochberg(np.array([0.01, 0.02, 0.03, 0.04]))
    np.testing.assert_allclose(adj, [0.04, 0.04, 0.04, 0.04], atol=1e-15)


def test_bh_matches_sorted_formula():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = int(rng.integers(1, 400))
        p = rng.random(n)
        if rng.random() < 0.3:  # inject ties
            p = np.round(p, 2)
        adj = benjamini_hochberg(p)
        np.testing.assert_allclose(adj, bh_sorted_oracle(p), atol=1e-12)
        assert np.all(adj >= p)
        assert np.all(adj <= 1.0)


def test_bh_preserves_order():
    rng = np.random.default_rng(3)
    p = rng.random(100)
    adj = benjamini_hochberg(p)
    src = np.argsort(p, kind="stable")
    assert np.all(np.diff(adj[src]) >= 0)


def test_bh_single_value_unchanged():
    np.testing.assert_array_equal(benjamini_hochberg(np.array([0.2])), [0.2])


def test_bh_empty_passthrough():
    assert benjamini_hochberg(np.array([])).size == 0


def test_bh_rejects_bad_input():
    with pytest.raises(ValidationError):
        benjamini_hochberg(np.array([[0.1, 0.2]]))
    with pytest.raises(ValidationError):
        benjamini_hochberg(np.array([0.1, 1.5]))
    with pytest.raises(ValidationError):
        benjamini_hochberg(np.array([0.1, np.nan]))


# ------------------------------------------------------------- counting


def test_contingency_layout_by_hand():
    # 6 patients: A before B twice, B before A once, tie once,
    # A alone once, B alone once
    cohort = make_cohort([
        [(0, "A01"), (1, "B02")],
        [(0, "A01"), (2, "B02")],
        [(1, "A01"), (0, "B02")],
        [(0, "A01"), (0, "B02")],
        [(0, "A01")],
        [(1, "B02")],
    ])
    counts = count_cooccurrences(cohort)
    i = counts.vocab.position("A01")
    j = counts.vocab.position("B02")
    assert counts.ordered[i, j] == 2
    assert counts.ordered[j, i] == 1
    assert counts.joint[i, j] == 4
    assert counts.marginal[i] == 5
    assert counts.marginal[j] == 5
    pairs, tables = fisher_tables(counts)
    row = {(int(x), int(y)): t for (x, y), t in zip(pairs, tables)}
    a, b, c, d = row[(i, j)]
    assert (a, b, c, d) == (2, 3, 1, 0)
    assert a + b + c + d == counts.total_patients


def test_same_admission_feeds_joint_only():
    cohort = make_cohort([[(3, "A01"), (3, "B02")]])
    counts = count_cooccurrences(cohort)
    i = counts.vocab.position("A01")
    j = counts.vocab.position("B02")
    assert counts.ordered[i, j] == 0
    assert counts.ordered[j, i] == 0
    assert counts.joint[i, j] == 1


def test_repeat_code_counts_once_per_patient():
    cohort = make_cohort([[(0, "A01"), (2, "A01"), (1, "B02")]])
    counts = count_cooccurrences(cohort)
    i = counts.vocab.position("A01")
    j = counts.vocab.position("B02")
    assert counts.marginal[i] == 1
    # first occurrence of A01 (adm 0) precedes B02 (adm 1)
    assert counts.ordered[i, j] == 1
    assert counts.ordered[j, i] == 0


def test_empty_cohort_rejected():
    with pytest.raises(ValidationError):
        count_cooccurrences(Cohort(patients=()))


# -------------------------------------------------------------- Jaccard


def test_jaccard_three_patient_example():
    cohort = make_cohort([[(0, "A01")], [(0, "B02")], [(0, "A01"), (0, "B02")]])
    jac = jaccard_matrix(count_cooccurrences(cohort))
    assert jac.value("A01", "B02") == pytest.approx(1 / 3, abs=0)
    assert jac.value("A01", "A01") == 1.0
    assert jac.value("B02", "B02") == 1.0


def test_jaccard_equals_set_brute_force():
    rng = np.random.default_rng(11)
    for trial in range(20):
        n_codes = int(rng.integers(3, 30))
        vocab = sequential_vocab(n_codes)
        n_patients = int(rng.integers(5, 80))
        sets = []
        events = []
        for _ in range(n_patients):
            k = int(rng.integers(1, n_codes + 1))
            chosen = rng.choice(n_codes, size=k, replace=False)
            codes = {vocab.codes[c] for c in chosen}
            sets.append(codes)
            events.append([(int(rng.integers(0, 4)), c) for c in sorted(codes)])
        cohort = make_cohort(events)
        jac = jaccard_matrix(count_cooccurrences(cohort))
        for ci in cohort.vocab.codes:
            for cj in cohort.vocab.codes:
                if ci == cj:
                    continue
                inter = sum(1 for s in sets if ci in s and cj in s)
                union = sum(1 for s in sets if ci in s or cj in s)
                expect = inter / union if union else 0.0
                assert jac.value(ci, cj) == expect


def test_jaccard_matrix_is_similarity_kind():
    cohort = make_cohort([[(0, "A01"), (0, "B02")]])
    jac = jaccard_matrix(count_cooccurrences(cohort))
    assert jac.kind == "similarity"
    assert jac.symmetric
    assert jac.method_name == "jaccard"


# -------------------------------------------------------- joint counts


def test_joint_counts_matrix_shape_and_diagonal():
    cohort = make_cohort([
        [(0, "A01"), (1, "B02")],
        [(0, "A01")],
    ])
    counts = count_cooccurrences(cohort)
    m = joint_counts_matrix(counts)
    assert m.kind == "count"
    assert m.symmetric
    assert m.value("A01", "A01") == 2.0
    assert m.value("B02", "B02") == 1.0
    assert m.value("A01", "B02") == 1.0
    assert m.value("B02", "A01") == 1.0


# -------------------------------------------------- full method outputs


def _ordered_cohort(n_with_order=8, n_without=8):
    events = []
    for _ in range(n_with_order):
        events.append([(0, "A01"), (1, "B02")])
    for _ in range(n_without):
        events.append([(0, "C34")])
    return make_cohort(events)


def test_fisher_method_outputs_count_matrix():
    counts = count_cooccurrences(_ordered_cohort())
    matrix, results = fisher_method_outputs(counts)
    assert matrix.kind == "count"
    assert not matrix.symmetric
    assert matrix.method_name == "fisher"
    assert matrix.value("A01", "B02") == 8.0
    assert matrix.value("B02", "A01") == 0.0
    by_pair = {(r.code_i, r.code_j): r for r in results}
    assert set(by_pair) == {
        ("A01", "B02"), ("B02", "A01"),
        ("A01", "C34"), ("C34", "A01"),
        ("B02", "C34"), ("C34", "B02"),
    }
    fwd = by_pair[("A01", "B02")]
    p_exact = float(hypergeom_upper_tail(8, 0, 0, 8))
    assert fwd.p_raw == pytest.approx(p_exact, abs=1e-12)
    assert fwd.p_adjusted >= fwd.p_raw
    assert fwd.significant == (fwd.p_adjusted < 0.05)


def test_fisher_method_outputs_pvalue_matrix_defaults_to_one():
    counts = count_cooccurrences(_ordered_cohort())
    matrix, results = fisher_method_outputs(counts, matrix_kind="pvalue")
    assert matrix.kind == "pvalue"
    assert matrix.value("A01", "A01") == 1.0  # untested diagonal
    by_pair = {(r.code_i, r.code_j): r for r in results}
    assert matrix.value("A01", "B02") == by_pair[("A01", "B02")].p_adjusted


def test_fisher_method_outputs_odds_matrix():
    counts = count_cooccurrences(_ordered_cohort())
    matrix, results = fisher_method_outputs(counts, matrix_kind="odds_ratio")
    assert matrix.kind == "odds_ratio"
    by_pair = {(r.code_i, r.code_j): r for r in results}
    assert matrix.value("A01", "B02") == by_pair[("A01", "B02")].odds_ratio


def test_fisher_method_outputs_rejects_unknown_kind():
    counts = count_cooccurrences(_ordered_cohort())
    with pytest.raises(ValidationError):
        fisher_method_outputs(counts, matrix_kind="zscore")


def test_fisher_results_bh_adjusted_jointly():
    counts = count_cooccurrences(_ordered_cohort())
    _, results = fisher_method_outputs(counts)
    raw = np.array([r.p_raw for r in results])
    adj = np.array([r.p_adjusted for r in results])
    np.testing.assert_allclose(adj, bh_sorted_oracle(raw), atol=1e-12)


def test_save_fisher_results_format(tmp_path):
    counts = count_cooccurrences(_ordered_cohort())
    _, results = fisher_method_outputs(counts)
    out = tmp_path / "fisher.csv"
    save_fisher_results(results, out)
    lines = out.read_text().splitlines()
    assert lines[0] == "code_i,code_j,odds_ratio,p_raw,p_adjusted,significant"
    assert len(lines) == len(results) + 1
    padj = [float(line.split(",")[4]) for line in lines[1:]]
    assert padj == sorted(padj)
    assert all(line.split(",")[5] in ("true", "false") for line in lines[1:])

    only_sig = tmp_path / "sig.csv"
    save_fisher_results(results, only_sig, only_significant=True)
    sig_lines = only_sig.read_text().splitlines()[1:]
    assert len(sig_lines) == sum(r.significant for r in results)
    assert all(line.endswith("true") for line in sig_lines)
