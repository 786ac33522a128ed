"""Training hyper-parameters with invariant checks."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ValidationError

#: Token id used to pad batches to a common length.
PAD_ID = 0
#: Token id substituted at masked positions.
MASK_ID = 1
#: First id available to real codes; everything below is reserved.
FIRST_CODE_ID = 2

#: Shortest admissible code sequence (codes per patient).
MIN_SEQUENCE_LEN = 5
#: Longest admissible code sequence.
MAX_SEQUENCE_LEN = 100


@dataclass(frozen=True)
class MlmConfig:
    """Hyper-parameters for masked-language-model training.

    The three branch probabilities describe what happens to a position
    once it has been selected for prediction: replace with the mask
    token, replace with a random real token, or keep the original token.
    They must sum to one.
    """

    embed_dim: int = 128
    n_layers: int = 3
    n_heads: int = 8
    ff_dim: int = 512
    dropout: float = 0.1
    lr: float = 5e-4
    weight_decay: float = 1e-3
    batch_size: int = 128
    max_epochs: int = 100
    early_stop_patience: int = 5
    mask_fraction: float = 0.15
    mask_token_prob: float = 0.80
    random_token_prob: float = 0.10
    keep_prob: float = 0.10
    train_split: float = 0.8
    seed: int = 0

    def __post_init__(self) -> None:
        if self.embed_dim < 1 or self.n_layers < 1 or self.n_heads < 1 or self.ff_dim < 1:
            raise ValidationError("model dimensions must be positive integers")
        if self.embed_dim % self.n_heads != 0:
            raise ValidationError(
                f"embed_dim ({self.embed_dim}) must be divisible by n_heads ({self.n_heads})"
            )
        if not 0.0 <= self.dropout < 1.0:
            raise ValidationError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.lr < 0.0 or self.weight_decay < 0.0:
            raise ValidationError("lr and weight_decay must be non-negative")
        if self.batch_size < 1 or self.max_epochs < 1 or self.early_stop_patience < 1:
            raise ValidationError(
                "batch_size, max_epochs and early_stop_patience must be positive"
            )
        if not 0.0 < self.mask_fraction < 1.0:
            raise ValidationError(
                f"mask_fraction must be in (0, 1), got {self.mask_fraction}"
            )
        for name in ("mask_token_prob", "random_token_prob", "keep_prob"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValidationError(f"{name} must be in [0, 1], got {value}")
        total = self.mask_token_prob + self.random_token_prob + self.keep_prob
        if abs(total - 1.0) > 1e-9:
            raise ValidationError(
                "mask_token_prob + random_token_prob + keep_prob must sum to 1, "
                f"got {total}"
            )
        if not 0.0 < self.train_split < 1.0:
            raise ValidationError(
                f"train_split must be in (0, 1), got {self.train_split}"
            )
