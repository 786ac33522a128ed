"""Disease-interconnection matrices from patient ICD-10 code sequences.

Builds co-occurrence statistics (Fisher exact test with FDR control,
Jaccard), embedding-cosine and LLM-derived adjacency matrices, compares
them with rank and graph metrics, and aggregates thresholded graphs into
a consensus ontology with per-edge support counts.
"""

__version__ = "0.1.0"

from .codes import Vocabulary, chapter_of, chapters, is_cancer, validate_code
from .errors import (ComorbidError, EmptyIntersectionError, FormatError,
                     LlmParseError, StageError, UnmappedCodeError,
                     ValidationError)
from .matrix import InterconnectionMatrix, align, load_matrix, save_matrix

__all__ = [
    "__version__",
    "Vocabulary",
    "chapter_of",
    "chapters",
    "is_cancer",
    "validate_code",
    "ComorbidError",
    "EmptyIntersectionError",
    "FormatError",
    "LlmParseError",
    "StageError",
    "UnmappedCodeError",
    "ValidationError",
    "InterconnectionMatrix",
    "align",
    "load_matrix",
    "save_matrix",
]
