"""Heatmap export transforms and run manifests."""

import json

import numpy as np
import pytest

from comorbid.errors import FormatError, ValidationError
from comorbid.matrix import InterconnectionMatrix, load_matrix
from comorbid.report import (
    RunManifest,
    file_digest,
    heatmap_export,
    load_manifest,
    save_manifest,
    verify_manifest,
)
from comorbid.transforms import off_diagonal_quantile

from conftest import random_symmetric_matrix, sequential_vocab


def count_matrix(seed=0, n=8, scale=50):
    rng = np.random.default_rng(seed)
    v = np.floor(rng.random((n, n)) * scale)
    v = np.maximum(v, v.T)
    np.fill_diagonal(v, 0.0)
    return InterconnectionMatrix(vocab=sequential_vocab(n), values=v,
                                 kind="count", symmetric=True, method_name="m")


# -------------------------------------------------------------- heatmap


def test_heatmap_clip_then_minmax(tmp_path):
    m = count_matrix()
    path = tmp_path / "heat.csv"
    out = heatmap_export(m, ["clip(0.9)", "minmax"], path)
    assert out.values.min() >= 0.0
    assert out.values.max() <= 1.0
    reloaded = load_matrix(path)
    np.testing.assert_allclose(reloaded.values, out.values, rtol=1e-8)
    log = json.loads((tmp_path / "heat.transforms.json").read_text())
    assert log["transforms"] == ["clip(0.9)", "minmax"]


def test_heatmap_clip_caps_at_quantile(tmp_path):
    m = count_matrix(seed=3)
    bound = off_diagonal_quantile(m, 0.9)
    out = heatmap_export(m, ["clip(0.9)"], tmp_path / "h.csv")
    assert out.values.max() == bound


def test_heatmap_empty_transform_list_round_trips(tmp_path):
    m = random_symmetric_matrix(sequential_vocab(5), 1)
    path = tmp_path / "h.csv"
    out = heatmap_export(m, [], path)
    np.testing.assert_array_equal(out.values, m.values)
    reloaded = load_matrix(path)
    np.testing.assert_allclose(reloaded.values, m.values, rtol=1e-8)


def test_heatmap_rejects_unknown_transform(tmp_path):
    m = random_symmetric_matrix(sequential_vocab(4), 0)
    with pytest.raises(ValidationError):
        heatmap_export(m, ["zscore"], tmp_path / "h.csv")
    with pytest.raises(ValidationError):
        heatmap_export(m, ["clip(2.0)"], tmp_path / "h.csv")
    with pytest.raises(ValidationError):
        heatmap_export(m, ["clip(abc)"], tmp_path / "h.csv")


# ------------------------------------------------------------- manifest


def manifest_with_inputs(tmp_path):
    f1 = tmp_path / "a.csv"
    f1.write_text("hello\n")
    f2 = tmp_path / "b.csv"
    f2.write_text("world\n")
    manifest = RunManifest(
        config={"seed": 7},
        input_digests={str(f1): file_digest(f1), str(f2): file_digest(f2)},
        seed=7,
        tool_version="0.1.0",
    )
    manifest.record("ingest", 0.12)
    manifest.record("cooccur", 1.5)
    return manifest, f1, f2


def test_manifest_round_trip(tmp_path):
    manifest, _, _ = manifest_with_inputs(tmp_path)
    out = tmp_path / "run"
    save_manifest(manifest, out)
    again = load_manifest(out)
    assert again.config == manifest.config
    assert again.input_digests == manifest.input_digests
    assert again.steps == ["ingest", "cooccur"]
    assert again.timings == manifest.timings


def test_manifest_json_stable_under_timing_changes(tmp_path):
    manifest, _, _ = manifest_with_inputs(tmp_path)
    save_manifest(manifest, tmp_path / "r1")
    manifest.timings["cooccur"] = 99.0  # different wall-clock, same run
    save_manifest(manifest, tmp_path / "r2")
    assert (tmp_path / "r1" / "manifest.json").read_bytes() == \
           (tmp_path / "r2" / "manifest.json").read_bytes()
    assert (tmp_path / "r1" / "timings.json").read_bytes() != \
           (tmp_path / "r2" / "timings.json").read_bytes()


def test_verify_manifest_detects_tamper(tmp_path):
    manifest, f1, _ = manifest_with_inputs(tmp_path)
    assert verify_manifest(manifest) == []
    f1.write_text("tampered\n")
    assert verify_manifest(manifest) == [str(f1)]


def test_verify_manifest_detects_missing_file(tmp_path):
    manifest, f1, _ = manifest_with_inputs(tmp_path)
    f1.unlink()
    assert verify_manifest(manifest) == [str(f1)]


def test_load_manifest_requires_fields(tmp_path):
    out = tmp_path / "run"
    out.mkdir()
    (out / "manifest.json").write_text(json.dumps({"seed": 1}))
    with pytest.raises(FormatError):
        load_manifest(out)


def test_file_digest_is_sha256(tmp_path):
    f = tmp_path / "x"
    f.write_bytes(b"abc")
    assert file_digest(f) == (
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad")
