"""Masked-language-model training over code sequences."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch
from torch import nn

from .config import FIRST_CODE_ID, PAD_ID, MlmConfig
from .data import build_vocab
from .errors import ValidationError
from .masking import IGNORE_INDEX, MaskedSequences, mask_sequences
from .model import MlmEncoder

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EpochRecord:
    """Metrics for one training epoch."""

    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float
    lr: float


@dataclass(frozen=True)
class TrainingLog:
    """Per-epoch metrics plus how training ended."""

    epochs: tuple[EpochRecord, ...]
    best_epoch: int
    stopped_early: bool


@dataclass(frozen=True)
class TrainResult:
    """Trained model with its vocabulary and training history.

    ``vocab[i]`` is the code embedded at token id ``FIRST_CODE_ID + i``.
    The model carries the weights of the best validation epoch.
    """

    model: MlmEncoder
    vocab: tuple[str, ...]
    log: TrainingLog


def _encode(sequences: Sequence[Sequence[str]], code_to_id: dict[str, int]) -> list[list[int]]:
    return [[code_to_id[code] for code in seq] for seq in sequences]


def _batches(
    masked: MaskedSequences, order: np.ndarray, batch_size: int
) -> list[tuple[torch.Tensor, torch.Tensor]]:
    out = []
    for start in range(0, order.size, batch_size):
        chunk = order[start : start + batch_size]
        width = max(masked.inputs[i].size for i in chunk)
        inputs = np.full((chunk.size, width), PAD_ID, dtype=np.int64)
        targets = np.full((chunk.size, width), IGNORE_INDEX, dtype=np.int64)
        for row, i in enumerate(chunk):
            seq = masked.inputs[i]
            inputs[row, : seq.size] = seq
            targets[row, : seq.size] = masked.targets[i]
        out.append((torch.from_numpy(inputs), torch.from_numpy(targets)))
    return out


def _evaluate(
    model: MlmEncoder, batches: list[tuple[torch.Tensor, torch.Tensor]]
) -> tuple[float, float]:
    model.eval()
    loss_sum = 0.0
    correct = 0
    count = 0
    with torch.no_grad():
        for inputs, targets in batches:
            logits = model(inputs)
            flat_logits = logits.reshape(-1, logits.shape[-1])
            flat_targets = targets.reshape(-1)
            loss_sum += nn.functional.cross_entropy(
                flat_logits, flat_targets, ignore_index=IGNORE_INDEX, reduction="sum"
            ).item()
            masked = flat_targets != IGNORE_INDEX
            correct += int(
                (flat_logits.argmax(dim=-1)[masked] == flat_targets[masked]).sum()
            )
            count += int(masked.sum())
    return loss_sum / count, correct / count


def train_mlm(sequences: Sequence[Sequence[str]], config: MlmConfig) -> TrainResult:
    """Train a masked-code model on per-patient code sequences.

    Patients are split ``train_split`` / remainder at the patient level
    so no sequence contributes to both sides.  Training positions are
    re-selected every epoch; validation masks are fixed across epochs so
    validation losses are comparable.  The learning rate halves after
    two epochs without validation improvement and training stops early
    after ``early_stop_patience`` such epochs, returning the weights of
    the best epoch.
    """
    vocab = tuple(build_vocab(sequences))
    if len(vocab) < 2:
        raise ValidationError(f"need at least 2 distinct codes, got {len(vocab)}")
    if len(sequences) < 2:
        raise ValidationError("need at least 2 sequences for a train/validation split")
    code_to_id = {code: FIRST_CODE_ID + i for i, code in enumerate(vocab)}
    encoded = _encode(sequences, code_to_id)

    split_rng = np.random.default_rng(config.seed)
    order = split_rng.permutation(len(encoded))
    n_train = int(round(config.train_split * len(encoded)))
    n_train = min(max(n_train, 1), len(encoded) - 1)
    train_seqs = [encoded[i] for i in order[:n_train]]
    val_seqs = [encoded[i] for i in order[n_train:]]

    torch.manual_seed(config.seed)
    model = MlmEncoder(len(vocab), config)
    optimizer = torch.optim.AdamW(
        model.parameters(), lr=config.lr, weight_decay=config.weight_decay
    )
    scheduler = torch.optim.lr_scheduler.ReduceLROnPlateau(
        optimizer, factor=0.5, patience=2
    )

    val_masked = mask_sequences(val_seqs, len(vocab), config, seed=config.seed)
    val_batches = _batches(
        val_masked, np.arange(len(val_seqs)), config.batch_size
    )
    shuffle_rng = np.random.default_rng(config.seed + 777)

    records: list[EpochRecord] = []
    best_loss = float("inf")
    best_epoch = 0
    best_state: dict[str, torch.Tensor] = {}
    epochs_since_best = 0
    stopped_early = False

    for epoch in range(1, config.max_epochs + 1):
        train_masked = mask_sequences(
            train_seqs, len(vocab), config, seed=config.seed + epoch
        )
        train_batches = _batches(
            train_masked, shuffle_rng.permutation(len(train_seqs)), config.batch_size
        )
        model.train()
        loss_sum = 0.0
        count = 0
        for inputs, targets in train_batches:
            optimizer.zero_grad()
            logits = model(inputs)
            flat_targets = targets.reshape(-1)
            n_masked = int((flat_targets != IGNORE_INDEX).sum())
            loss = nn.functional.cross_entropy(
                logits.reshape(-1, logits.shape[-1]),
                flat_targets,
                ignore_index=IGNORE_INDEX,
            )
            loss.backward()
            optimizer.step()
            loss_sum += loss.item() * n_masked
            count += n_masked
        train_loss = loss_sum / count
        val_loss, val_accuracy = _evaluate(model, val_batches)
        lr = optimizer.param_groups[0]["lr"]
        records.append(
            EpochRecord(
                epoch=epoch,
                train_loss=train_loss,
                val_loss=val_loss,
                val_accuracy=val_accuracy,
                lr=lr,
            )
        )
        logger.info(
            "epoch %d: train_loss=%.4f val_loss=%.4f val_accuracy=%.4f lr=%.2e",
            epoch,
            train_loss,
            val_loss,
            val_accuracy,
            lr,
        )
        if val_loss < best_loss:
            best_loss = val_loss
            best_epoch = epoch
            best_state = {
                name: tensor.detach().clone()
                for name, tensor in model.state_dict().items()
            }
            epochs_since_best = 0
        else:
            epochs_since_best += 1
            if epochs_since_best >= config.early_stop_patience:
                stopped_early = True
                break
        scheduler.step(val_loss)

    model.load_state_dict(best_state)
    model.eval()
    return TrainResult(
        model=model,
        vocab=vocab,
        log=TrainingLog(
            epochs=tuple(records), best_epoch=best_epoch, stopped_early=stopped_early
        ),
    )
