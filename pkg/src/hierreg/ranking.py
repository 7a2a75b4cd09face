"""Feature and group importance rankings from a fitted posterior."""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch
from .model import VariationalPosterior

__all__ = ["rank_features", "rank_groups", "ranking_csv"]


def rank_features(
    posterior: VariationalPosterior, feature_names
) -> list[tuple[str, float]]:
    """Features sorted by population weight measured in prior-scale units.

    score_d = |delta_d| * sqrt(E[w_d]): the magnitude of the population
    weight divided by the scale 1/sqrt(E[w_d]) its relevance prior allows.
    Ties keep feature order.
    """
    names = list(feature_names)
    if len(names) != posterior.n_features:
        raise DimensionMismatch(
            f"{len(names)} names for {posterior.n_features} features"
        )
    scores = np.abs(posterior.delta_mean) * np.sqrt(posterior.e_n / posterior.f_n)
    order = np.argsort(-scores, kind="stable")
    return [(names[i], float(scores[i])) for i in order]


def rank_groups(
    posterior: VariationalPosterior, group_labels
) -> list[tuple[str, float]]:
    """Groups sorted by how far their weights sit from the population mean.

    score_i = ||beta_i - delta||_2. Ties keep label order.
    """
    labels = list(group_labels)
    if len(labels) != posterior.n_groups:
        raise DimensionMismatch(
            f"{len(labels)} labels for {posterior.n_groups} groups"
        )
    scores = np.array(
        [float(np.linalg.norm(m - posterior.delta_mean)) for m in posterior.beta_mean]
    )
    order = np.argsort(-scores, kind="stable")
    return [(labels[i], float(scores[i])) for i in order]


def ranking_csv(ranking: list[tuple[str, float]]) -> str:
    """Two-column CSV: rank, name."""
    lines = ["rank,name"]
    for pos, (name, _score) in enumerate(ranking, start=1):
        lines.append(f"{pos},{name}")
    return "\n".join(lines) + "\n"
