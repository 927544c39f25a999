"""Spectral encoding of peptide sequences and ensemble models."""

from ._core import (
    DegenerateData,
    Ensemble,
    Error,
    InvalidArgument,
    ParseError,
    TrainResult,
    classification_metrics,
    derive_descriptors,
    encode,
    fft_magnitude,
    parse_aaindex,
    regression_metrics,
    train,
)

__all__ = [
    "DegenerateData",
    "Ensemble",
    "Error",
    "InvalidArgument",
    "ParseError",
    "TrainResult",
    "classification_metrics",
    "derive_descriptors",
    "encode",
    "fft_magnitude",
    "parse_aaindex",
    "regression_metrics",
    "train",
]
