"""End-to-end checks of the `embed` command line."""

import csv
import json

import numpy as np
import pytest

from embed_trainer import load_embeddings, synth_markov_sequences
from embed_trainer.cli import main
from embed_trainer.data import load_sequences


def write_cohort(path, sequences):
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["patient_id", "admission_index", "icd_code"])
        for i, seq in enumerate(sequences):
            for j, code in enumerate(seq):
                writer.writerow([f"p{i:04d}", j, code])


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestTrainCommand:
    def test_trains_and_writes_embedding_csv(self, tmp_path, capsys):
        cohort = tmp_path / "cohort.csv"
        write_cohort(
            cohort, synth_markov_sequences(40, 8, seed=3, min_len=6, max_len=12)
        )
        out = tmp_path / "emb.csv"
        code, stdout, _ = run_cli(
            capsys,
            "train",
            "--cohort",
            str(cohort),
            "--out",
            str(out),
            "--seed",
            "11",
            "--max-epochs",
            "2",
            "--batch-size",
            "16",
        )
        assert code == 0
        payload = json.loads(stdout.splitlines()[-1])
        assert payload["codes"] == 8
        assert payload["dim"] == 128
        assert payload["epochs"] == 2
        assert payload["out"] == str(out)
        codes, vectors = load_embeddings(out)
        assert codes == sorted(codes)
        assert vectors.shape == (8, 128)

    def test_missing_cohort_exits_2(self, tmp_path, capsys):
        code, _, stderr = run_cli(
            capsys,
            "train",
            "--cohort",
            str(tmp_path / "absent.csv"),
            "--out",
            str(tmp_path / "emb.csv"),
            "--seed",
            "1",
        )
        assert code == 2
        assert "does not exist" in stderr

    def test_cohort_with_no_admissible_patient_exits_2(self, tmp_path, capsys):
        cohort = tmp_path / "cohort.csv"
        write_cohort(cohort, [["A00", "B01"], ["C02", "D03"]])
        code, _, stderr = run_cli(
            capsys,
            "train",
            "--cohort",
            str(cohort),
            "--out",
            str(tmp_path / "emb.csv"),
            "--seed",
            "1",
        )
        assert code == 2
        assert "no patient" in stderr


class TestExtractCommand:
    def test_extracts_with_encoder_resolved_from_model_id(
        self, tmp_path, capsys, monkeypatch
    ):
        def fake_build(model_id):
            assert model_id == "some/encoder"
            return lambda text: np.full(8, 1.0 + len(text))

        monkeypatch.setattr("embed_trainer.export._build_encoder", fake_build)
        descriptions = tmp_path / "desc.csv"
        descriptions.write_text(
            "code,description\nI10,hypertension\nE11,\nC34,lung cancer\n"
        )
        out = tmp_path / "emb.csv"
        code, stdout, _ = run_cli(
            capsys,
            "extract",
            "--model",
            "some/encoder",
            "--descriptions",
            str(descriptions),
            "--out",
            str(out),
        )
        assert code == 0
        payload = json.loads(stdout.splitlines()[-1])
        assert payload == {"codes": 2, "dim": 8, "skipped": 1, "out": str(out)}
        codes, vectors = load_embeddings(out)
        assert codes == ["C34", "I10"]
        np.testing.assert_allclose(np.linalg.norm(vectors, axis=1), 1.0, atol=1e-6)

    def test_bad_descriptions_header_exits_2(self, tmp_path, capsys):
        descriptions = tmp_path / "desc.csv"
        descriptions.write_text("code,text\nI10,hypertension\n")
        code, _, stderr = run_cli(
            capsys,
            "extract",
            "--model",
            "m",
            "--descriptions",
            str(descriptions),
            "--out",
            str(tmp_path / "emb.csv"),
        )
        assert code == 2
        assert "code,description" in stderr

    def test_duplicate_description_code_exits_2(self, tmp_path, capsys):
        descriptions = tmp_path / "desc.csv"
        descriptions.write_text("code,description\nI10,a\nI10,b\n")
        code, _, stderr = run_cli(
            capsys,
            "extract",
            "--model",
            "m",
            "--descriptions",
            str(descriptions),
            "--out",
            str(tmp_path / "emb.csv"),
        )
        assert code == 2
        assert "duplicate" in stderr


class TestUnknownCommand:
    def test_argparse_rejects_unknown_subcommand(self, capsys):
        with pytest.raises(SystemExit):
            main(["frobnicate"])


class TestCohortLoader:
    def test_orders_by_admission_and_dedups(self, tmp_path):
        cohort = tmp_path / "cohort.csv"
        cohort.write_text(
            "patient_id,admission_index,icd_code\n"
            "p1,1,B01\np1,0,A00\np1,1,C02\np1,2,A00\np1,2,D03\np1,3,E04\n"
        )
        assert load_sequences(cohort) == [["A00", "B01", "C02", "D03", "E04"]]

    def test_length_filter_drops_out_of_range_patients(self, tmp_path):
        cohort = tmp_path / "cohort.csv"
        write_cohort(cohort, [["A00", "B01", "C02"], list(f"Q{i:02d}" for i in range(6))])
        kept = load_sequences(cohort, min_len=5, max_len=100)
        assert kept == [[f"Q{i:02d}" for i in range(6)]]

    def test_wrong_header_rejected(self, tmp_path):
        cohort = tmp_path / "cohort.csv"
        cohort.write_text("subject_id,admission_index,icd_code\np1,0,A00\n")
        from embed_trainer import FormatError

        with pytest.raises(FormatError, match="expected header"):
            load_sequences(cohort)

    def test_non_integer_admission_rejected(self, tmp_path):
        cohort = tmp_path / "cohort.csv"
        cohort.write_text("patient_id,admission_index,icd_code\np1,one,A00\n")
        from embed_trainer import FormatError

        with pytest.raises(FormatError, match="admission_index"):
            load_sequences(cohort)
