"""Transformer encoder for masked code prediction."""

from __future__ import annotations

import torch
from torch import nn

from .config import FIRST_CODE_ID, MAX_SEQUENCE_LEN, PAD_ID, MlmConfig
from .errors import ValidationError


class MlmEncoder(nn.Module):
    """Token + learned positional embeddings, encoder stack, LM head.

    ``n_codes`` counts real codes; the embedding table additionally
    holds the padding and mask tokens at the two reserved ids.
    """

    def __init__(self, n_codes: int, config: MlmConfig):
        if n_codes < 2:
            raise ValidationError(f"need at least 2 codes to train, got {n_codes}")
        super().__init__()
        self.n_codes = n_codes
        self.config = config
        n_tokens = FIRST_CODE_ID + n_codes
        self.token_embedding = nn.Embedding(
            n_tokens, config.embed_dim, padding_idx=PAD_ID
        )
        self.position_embedding = nn.Embedding(MAX_SEQUENCE_LEN, config.embed_dim)
        self.dropout = nn.Dropout(config.dropout)
        layer = nn.TransformerEncoderLayer(
            d_model=config.embed_dim,
            nhead=config.n_heads,
            dim_feedforward=config.ff_dim,
            dropout=config.dropout,
            activation="gelu",
            batch_first=True,
        )
        # the nested-tensor fast path is a moving prototype; keep the
        # plain padded path so runs are deterministic across versions
        self.encoder = nn.TransformerEncoder(
            layer, num_layers=config.n_layers, enable_nested_tensor=False
        )
        self.head = nn.Linear(config.embed_dim, n_tokens)
        self._init_weights()

    def _init_weights(self) -> None:
        nn.init.normal_(self.token_embedding.weight, std=0.02)
        nn.init.normal_(self.position_embedding.weight, std=0.02)
        with torch.no_grad():
            self.token_embedding.weight[PAD_ID].zero_()
        nn.init.xavier_uniform_(self.head.weight)
        nn.init.zeros_(self.head.bias)

    def forward(self, input_ids: torch.Tensor) -> torch.Tensor:
        """Logits over the token vocabulary, shape (batch, len, n_tokens).

        ``input_ids`` is a padded (batch, len) id tensor; padding
        positions are excluded from attention.
        """
        if input_ids.shape[1] > MAX_SEQUENCE_LEN:
            raise ValidationError(
                f"sequence length {input_ids.shape[1]} exceeds {MAX_SEQUENCE_LEN}"
            )
        positions = torch.arange(input_ids.shape[1], device=input_ids.device)
        hidden = self.token_embedding(input_ids) + self.position_embedding(positions)
        hidden = self.dropout(hidden)
        pad_mask = input_ids == PAD_ID
        hidden = self.encoder(hidden, src_key_padding_mask=pad_mask)
        return self.head(hidden)

    def code_embeddings(self) -> torch.Tensor:
        """Embedding-table rows for real codes, shape (n_codes, embed_dim).

        Row *i* corresponds to token id ``FIRST_CODE_ID + i``; reserved
        padding and mask rows are excluded.
        """
        return self.token_embedding.weight[FIRST_CODE_ID:].detach().clone()
