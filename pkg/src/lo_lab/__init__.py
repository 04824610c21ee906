"""Exact and numerical toolkit for small-ball probabilities of signed vector sums."""

from .core import (
    Ball,
    CapExceededError,
    ExactProb,
    InvalidInputError,
    LoLabError,
    MaxBallResult,
    SumCloud,
    VectorConfig,
    VerificationError,
    as_fraction,
    enumerate_sums,
    max_ball_probability,
    prob_in_ball,
)

__version__ = "0.1.0"

__all__ = [
    "Ball",
    "CapExceededError",
    "ExactProb",
    "InvalidInputError",
    "LoLabError",
    "MaxBallResult",
    "SumCloud",
    "VectorConfig",
    "VerificationError",
    "as_fraction",
    "enumerate_sums",
    "max_ball_probability",
    "prob_in_ball",
    "__version__",
]
