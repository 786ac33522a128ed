"""Masked-language-model training over ICD-10 code sequences.

Trains a small transformer encoder to predict masked codes in
per-patient sequences and exports the learned code embeddings in the
shared ``code,d0,...`` CSV format; alternatively embeds code
descriptions with a pretrained text encoder.
"""

from .config import (
    FIRST_CODE_ID,
    MASK_ID,
    MAX_SEQUENCE_LEN,
    MIN_SEQUENCE_LEN,
    PAD_ID,
    MlmConfig,
)
from .data import build_vocab, load_sequences, synth_markov_sequences
from .errors import FormatError, TrainerError, ValidationError
from .export import (
    export_embeddings,
    extract_pretrained_embeddings,
    load_embeddings,
    save_embeddings,
)
from .masking import IGNORE_INDEX, MaskedSequences, mask_sequences
from .model import MlmEncoder
from .training import EpochRecord, TrainingLog, TrainResult, train_mlm

__version__ = "0.1.0"

__all__ = [
    "FIRST_CODE_ID",
    "IGNORE_INDEX",
    "MASK_ID",
    "MAX_SEQUENCE_LEN",
    "MIN_SEQUENCE_LEN",
    "PAD_ID",
    "EpochRecord",
    "FormatError",
    "MaskedSequences",
    "MlmConfig",
    "MlmEncoder",
    "TrainerError",
    "TrainingLog",
    "TrainResult",
    "ValidationError",
    "build_vocab",
    "export_embeddings",
    "extract_pretrained_embeddings",
    "load_embeddings",
    "load_sequences",
    "mask_sequences",
    "save_embeddings",
    "synth_markov_sequences",
    "train_mlm",
    "__version__",
]
