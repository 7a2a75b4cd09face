"""Student-t posterior predictive distributions for new observations.

The marginal over the Gamma noise factor gives a t density with 2 a_n
degrees of freedom; weight uncertainty enters additively in the squared
scale. Predictions are available for observed groups and, through the
population factor, for groups never seen in training.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .model import VariationalPosterior
from .specialmath import student_t_quantile

__all__ = [
    "StudentTPrediction",
    "predict_known_group",
    "predict_new_group",
    "predictive_interval",
    "prediction_csv_row",
]


@dataclass(frozen=True)
class StudentTPrediction:
    """Location/scale/degrees-of-freedom triple for one predicted response."""

    location: float
    scale: float
    dof: float

    def __post_init__(self):
        if not self.scale > 0:
            raise DomainError(f"scale must be positive, got {self.scale}")
        if not self.dof > 0:
            raise DomainError(f"dof must be positive, got {self.dof}")


def predict_known_group(
    x_star: np.ndarray, group_index: int, posterior: VariationalPosterior
) -> StudentTPrediction:
    """Predictive t for a group that was present during fitting.

    scale^2 = b_n/a_n + x' Cov(beta_i) x: noise variance plus the variance
    contributed by uncertainty in the group's weights.
    """
    x = np.asarray(x_star, dtype=np.float64)
    C = posterior.n_groups
    if not 0 <= int(group_index) < C:
        raise IndexError(f"group index {group_index} outside [0, {C})")
    if x.shape != (posterior.n_features,):
        raise DomainError(
            f"x_star has shape {x.shape}, expected ({posterior.n_features},)"
        )
    i = int(group_index)
    location = float(x @ posterior.beta_mean[i])
    var = posterior.b_n / posterior.a_n + float(x @ posterior.beta_cov[i] @ x)
    return StudentTPrediction(location=location, scale=float(np.sqrt(var)), dof=2.0 * posterior.a_n)


def predict_new_group(x_star: np.ndarray, posterior: VariationalPosterior) -> StudentTPrediction:
    """Predictive t for a group never observed in training.

    The unknown group weights are integrated against the population factor:
    their variance is the coupling variance 1/E[s] = d_n/c_n plus the
    uncertainty of the population mean itself.
    """
    x = np.asarray(x_star, dtype=np.float64)
    if x.shape != (posterior.n_features,):
        raise DomainError(
            f"x_star has shape {x.shape}, expected ({posterior.n_features},)"
        )
    location = float(x @ posterior.delta_mean)
    var = (
        posterior.b_n / posterior.a_n
        + (posterior.d_n / posterior.c_n) * float(x @ x)
        + float(x @ posterior.delta_cov @ x)
    )
    return StudentTPrediction(location=location, scale=float(np.sqrt(var)), dof=2.0 * posterior.a_n)


def predictive_interval(pred: StudentTPrediction, level: float) -> tuple[float, float]:
    """Equal-tailed interval: location +- scale * t-quantile((1+level)/2)."""
    if not 0.0 < level < 1.0:
        raise DomainError(f"level must lie in (0, 1), got {level}")
    half = pred.scale * student_t_quantile((1.0 + level) / 2.0, pred.dof)
    return pred.location - half, pred.location + half


def prediction_csv_row(pred: StudentTPrediction, level: float, group_label: str = "NEW") -> str:
    """CSV row: group_label, location, scale, dof, lower, upper."""
    lower, upper = predictive_interval(pred, level)
    return (
        f"{group_label},{pred.location!r},{pred.scale!r},{pred.dof!r},{lower!r},{upper!r}"
    )
