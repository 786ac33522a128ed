import numpy as np
import pytest

from comorbid.codes import Vocabulary
from comorbid.matrix import InterconnectionMatrix


@pytest.fixture
def small_vocab() -> Vocabulary:
    return Vocabulary(["A01", "B02", "C34", "D15", "I10"])


def random_symmetric_matrix(vocab: Vocabulary, seed: int,
                            method_name: str = "rand") -> InterconnectionMatrix:
    rng = np.random.default_rng(seed)
    n = len(vocab)
    values = rng.random((n, n))
    values = np.maximum(values, values.T)
    np.fill_diagonal(values, 1.0)
    return InterconnectionMatrix(
        vocab=vocab,
        values=values,
        kind="similarity",
        symmetric=True,
        method_name=method_name,
    )


def sequential_vocab(n: int) -> Vocabulary:
    codes = []
    letters = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
    for i in range(n):
        codes.append(f"{letters[i // 100]}{i % 100:02d}")
    return Vocabulary(codes)
