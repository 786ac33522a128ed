"""Embedding CSV writing, reading, and pretrained extraction."""

import numpy as np
import pytest

from embed_trainer import (
    FormatError,
    MlmConfig,
    MlmEncoder,
    ValidationError,
    export_embeddings,
    extract_pretrained_embeddings,
    load_embeddings,
    save_embeddings,
)


@pytest.fixture(scope="module")
def tiny_model():
    return MlmEncoder(6, MlmConfig(seed=0))


class TestSaveLoadRoundTrip:
    def test_export_reloads_to_nine_significant_digits(self, tiny_model, tmp_path):
        vocab = ["A00", "B11", "C22", "D33", "E44", "F55"]
        path = tmp_path / "emb.csv"
        exported = export_embeddings(tiny_model, vocab, path)
        codes, loaded = load_embeddings(path)
        assert codes == vocab
        assert loaded.shape == (6, 128)
        np.testing.assert_allclose(loaded, exported, rtol=1e-8, atol=0.0)

    def test_header_names_dimensions(self, tiny_model, tmp_path):
        path = tmp_path / "emb.csv"
        export_embeddings(tiny_model, ["A00"] + [f"B{i:02d}" for i in range(5)], path)
        header = path.read_text().splitlines()[0].split(",")
        assert header[0] == "code"
        assert header[1] == "d0"
        assert header[-1] == "d127"

    def test_vocab_size_mismatch_rejected(self, tiny_model, tmp_path):
        with pytest.raises(ValidationError, match="vocab has"):
            export_embeddings(tiny_model, ["A00", "B01"], tmp_path / "emb.csv")

    def test_duplicate_codes_rejected_on_save(self, tmp_path):
        with pytest.raises(ValidationError, match="duplicate"):
            save_embeddings(["A00", "A00"], np.ones((2, 3)), tmp_path / "e.csv")

    def test_non_finite_vectors_rejected_on_save(self, tmp_path):
        vectors = np.array([[1.0, np.nan], [0.0, 1.0]])
        with pytest.raises(ValidationError, match="finite"):
            save_embeddings(["A00", "B01"], vectors, tmp_path / "e.csv")

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(FormatError, match="does not exist"):
            load_embeddings(tmp_path / "absent.csv")

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "e.csv"
        path.write_text("icd,d0\nA00,1.0\n")
        with pytest.raises(FormatError, match="header"):
            load_embeddings(path)

    def test_ragged_row_rejected(self, tmp_path):
        path = tmp_path / "e.csv"
        path.write_text("code,d0,d1\nA00,1.0,2.0\nB01,3.0\n")
        with pytest.raises(FormatError, match="expected 3 fields"):
            load_embeddings(path)

    def test_non_numeric_value_rejected(self, tmp_path):
        path = tmp_path / "e.csv"
        path.write_text("code,d0\nA00,abc\n")
        with pytest.raises(FormatError, match="non-numeric"):
            load_embeddings(path)

    def test_duplicate_code_rows_rejected(self, tmp_path):
        path = tmp_path / "e.csv"
        path.write_text("code,d0\nA00,1.0\nA00,2.0\n")
        with pytest.raises(FormatError, match="duplicate"):
            load_embeddings(path)


class TestPretrainedExtraction:
    @staticmethod
    def fake_encoder(text: str) -> np.ndarray:
        rng = np.random.default_rng(abs(hash(text)) % (2**32))
        return rng.standard_normal(16) * 3.0

    def test_vectors_are_unit_normalized(self):
        descriptions = {"I10": "hypertension", "E11": "type 2 diabetes"}
        codes, vectors = extract_pretrained_embeddings(
            "any-model", descriptions, encoder=self.fake_encoder
        )
        assert codes == ["E11", "I10"]
        np.testing.assert_allclose(
            np.linalg.norm(vectors, axis=1), 1.0, atol=1e-6
        )

    def test_missing_description_skipped_with_warning(self, caplog):
        descriptions = {"I10": "hypertension", "E11": "", "C34": "   "}
        with caplog.at_level("WARNING", logger="embed_trainer.export"):
            codes, vectors = extract_pretrained_embeddings(
                "any-model", descriptions, encoder=self.fake_encoder
            )
        assert codes == ["I10"]
        assert vectors.shape == (1, 16)
        assert sum("no description" in m for m in caplog.messages) == 2

    def test_all_descriptions_missing_rejected(self):
        with pytest.raises(ValidationError, match="no code has a usable description"):
            extract_pretrained_embeddings(
                "any-model", {"I10": ""}, encoder=self.fake_encoder
            )

    def test_zero_vector_from_encoder_rejected(self):
        with pytest.raises(ValidationError, match="degenerate"):
            extract_pretrained_embeddings(
                "any-model",
                {"I10": "hypertension"},
                encoder=lambda text: np.zeros(8),
            )

    def test_mixed_vector_widths_rejected(self):
        widths = {"a": 4, "b": 5}
        with pytest.raises(ValidationError, match="mixed vector widths"):
            extract_pretrained_embeddings(
                "any-model",
                {"A00": "a", "B01": "b"},
                encoder=lambda text: np.ones(widths[text]),
            )
