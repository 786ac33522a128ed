"""Masked-position selection and corruption for MLM training.

Each position of a token-id sequence is independently selected for
prediction with probability ``mask_fraction``; a sequence in which no
position was selected gets exactly one position chosen uniformly so
every sequence contributes to the loss.  A selected position is then
corrupted one of three ways: replaced with the mask token, replaced
with a random real token, or kept unchanged.  The loss is computed
only at selected positions, which the target arrays mark with the
original token id; all other positions carry ``IGNORE_INDEX``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .config import (
    FIRST_CODE_ID,
    MASK_ID,
    MAX_SEQUENCE_LEN,
    MIN_SEQUENCE_LEN,
    MlmConfig,
)
from .errors import ValidationError

#: Target value at positions that do not contribute to the loss.
IGNORE_INDEX = -100


@dataclass(frozen=True)
class MaskedSequences:
    """Corrupted inputs paired with loss targets.

    ``inputs[i]`` is sequence *i* after corruption and ``targets[i]``
    holds the original token id at selected positions, ``IGNORE_INDEX``
    everywhere else.  Both arrays have the sequence's original length.
    """

    inputs: tuple[np.ndarray, ...]
    targets: tuple[np.ndarray, ...]

    def __len__(self) -> int:
        return len(self.inputs)


def mask_sequences(
    sequences: Sequence[Sequence[int]],
    vocab_size: int,
    config: MlmConfig,
    seed: int,
) -> MaskedSequences:
    """Apply MLM corruption to token-id sequences.

    ``vocab_size`` is the number of real codes; their ids occupy
    ``[FIRST_CODE_ID, FIRST_CODE_ID + vocab_size)`` and random-token
    replacements are drawn uniformly from that range.  Sequences must
    be ``MIN_SEQUENCE_LEN`` to ``MAX_SEQUENCE_LEN`` tokens long.
    The same ``seed`` yields the same selection and corruption.
    """
    if vocab_size < 1:
        raise ValidationError(f"vocab_size must be positive, got {vocab_size}")
    if not sequences:
        raise ValidationError("no sequences to mask")
    rng = np.random.default_rng(seed)
    inputs: list[np.ndarray] = []
    targets: list[np.ndarray] = []
    high = FIRST_CODE_ID + vocab_size
    for index, seq in enumerate(sequences):
        ids = np.asarray(seq, dtype=np.int64)
        if ids.ndim != 1 or not MIN_SEQUENCE_LEN <= ids.size <= MAX_SEQUENCE_LEN:
            raise ValidationError(
                f"sequence {index} has {ids.size} tokens; expected "
                f"{MIN_SEQUENCE_LEN} to {MAX_SEQUENCE_LEN}"
            )
        if ids.min() < FIRST_CODE_ID or ids.max() >= high:
            raise ValidationError(
                f"sequence {index} contains token ids outside "
                f"[{FIRST_CODE_ID}, {high})"
            )
        selected = rng.random(ids.size) < config.mask_fraction
        if not selected.any():
            selected[rng.integers(ids.size)] = True
        corrupted = ids.copy()
        target = np.full(ids.size, IGNORE_INDEX, dtype=np.int64)
        target[selected] = ids[selected]
        (positions,) = np.nonzero(selected)
        branch = rng.random(positions.size)
        mask_branch = branch < config.mask_token_prob
        random_branch = ~mask_branch & (
            branch < config.mask_token_prob + config.random_token_prob
        )
        corrupted[positions[mask_branch]] = MASK_ID
        n_random = int(random_branch.sum())
        if n_random:
            corrupted[positions[random_branch]] = rng.integers(
                FIRST_CODE_ID, high, size=n_random
            )
        inputs.append(corrupted)
        targets.append(target)
    return MaskedSequences(inputs=tuple(inputs), targets=tuple(targets))
