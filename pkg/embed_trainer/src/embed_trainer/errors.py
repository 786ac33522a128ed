"""Exception hierarchy for the embedding trainer."""

from __future__ import annotations


class TrainerError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(TrainerError):
    """A value or combination of values violates a documented constraint."""


class FormatError(TrainerError):
    """An input file does not match its documented layout."""
