"""Synthetic data drawn from the hierarchical regression model itself.

Used by the demos and the test suite for generative-recovery and
engine-comparison checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Group, GroupedDataset
from .specialmath import RngStream

__all__ = ["SyntheticTruth", "synthetic_dataset"]


@dataclass(frozen=True)
class SyntheticTruth:
    """Ground-truth parameters behind a generated dataset."""

    beta: np.ndarray  # (C, D)
    delta: np.ndarray  # (D,)
    sigma: float  # noise precision
    s: float  # group-coupling precision
    w: np.ndarray  # (D,) relevance precisions


def synthetic_dataset(
    C: int,
    M: int,
    D: int,
    seed: int,
    sigma: float = 4.0,
    s: float = 1.0,
    w=None,
    delta=None,
) -> tuple[GroupedDataset, SyntheticTruth]:
    """Generate C groups of M rows from the model's own hierarchy.

    delta defaults to a draw from N(0, 1/w) with unit relevance precisions;
    group weights are N(delta, 1/s I); responses add N(0, 1/sigma) noise to
    the linear predictor of standard-normal features.
    """
    rng = RngStream(seed)
    w = np.full(D, 1.0) if w is None else np.asarray(w, dtype=np.float64)
    if delta is None:
        delta = rng.normal(size=D) / np.sqrt(w)
    else:
        delta = np.asarray(delta, dtype=np.float64)
    beta = delta + rng.normal(size=(C, D)) / np.sqrt(s)

    groups = []
    for i in range(C):
        X = rng.normal(size=(M, D))
        y = X @ beta[i] + rng.normal(size=M) / np.sqrt(sigma)
        groups.append(Group(design=X, response=y, label=f"g{i}"))
    dataset = GroupedDataset(
        groups=tuple(groups),
        feature_names=tuple(f"x{d}" for d in range(D)),
    )
    truth = SyntheticTruth(beta=beta, delta=delta, sigma=float(sigma), s=float(s), w=w)
    return dataset, truth
