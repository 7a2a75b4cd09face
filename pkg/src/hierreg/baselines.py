"""Closed-form baselines: ordinary least squares and ridge regression."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NotPositiveDefinite, RankDeficient
from .specialmath import spd_factorize, student_t_cdf

__all__ = ["OlsFit", "ols_fit", "ridge_fit", "ols_table_csv"]


@dataclass(frozen=True)
class OlsFit:
    """OLS estimates with standard errors, t statistics and p values.

    When fitted with an intercept, the intercept is the first coefficient.
    """

    coefficients: np.ndarray
    std_errors: np.ndarray
    t_values: np.ndarray
    p_values: np.ndarray
    residual_variance: float
    include_intercept: bool = False

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if self.include_intercept:
            return self.coefficients[0] + X @ self.coefficients[1:]
        return X @ self.coefficients


def ols_fit(X: np.ndarray, y: np.ndarray, include_intercept: bool = False) -> OlsFit:
    """Least squares via the normal equations with an SPD factorization.

    Standard errors come from s^2 (X'X)^-1 with s^2 = RSS/(N-p); two-sided
    p values use the t distribution with N-p degrees of freedom.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise DomainError(f"incompatible shapes X {X.shape}, y {y.shape}")
    A = np.column_stack([np.ones(X.shape[0]), X]) if include_intercept else X
    N, p = A.shape
    if N <= p:
        raise DomainError(f"need more rows ({N}) than parameters ({p})")
    gram = A.T @ A
    try:
        factor = spd_factorize(gram)
    except NotPositiveDefinite as exc:
        raise RankDeficient("design matrix is rank deficient") from exc
    # a pivot at roundoff scale means a numerically dependent column
    piv = np.diag(factor.lower_triangular)
    if piv.min() ** 2 <= N * np.finfo(float).eps * np.max(np.diag(gram)):
        raise RankDeficient("design matrix is rank deficient")
    coef = factor.solve(A.T @ y)
    resid = y - A @ coef
    rss = float(resid @ resid)
    s2 = rss / (N - p)
    cov = s2 * factor.inverse()
    se = np.sqrt(np.diag(cov))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(se > 0, coef / se, np.where(coef == 0, 0.0, np.inf * np.sign(coef)))
    pvals = 2.0 * (1.0 - student_t_cdf(np.abs(t), N - p))
    return OlsFit(
        coefficients=coef,
        std_errors=se,
        t_values=t,
        p_values=pvals,
        residual_variance=s2,
        include_intercept=include_intercept,
    )


def ridge_fit(X: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    """Ridge coefficients (X'X + lam I)^-1 X'y. No intercept, no scaling."""
    if lam < 0:
        raise DomainError(f"lambda must be non-negative, got {lam}")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    D = X.shape[1]
    factor = spd_factorize(X.T @ X + lam * np.eye(D))
    return factor.solve(X.T @ y)


def ols_table_csv(fit: OlsFit, item_names: list[str]) -> str:
    """CSV with columns item, estimate, std_error, t_value, p_value.

    item_names label the non-intercept coefficients; an intercept row, if
    present, is emitted first as 'intercept'.
    """
    names = (["intercept"] if fit.include_intercept else []) + list(item_names)
    if len(names) != fit.coefficients.shape[0]:
        raise DomainError(
            f"{len(names)} names for {fit.coefficients.shape[0]} coefficients"
        )
    lines = ["item,estimate,std_error,t_value,p_value"]
    for name, est, se, t, p in zip(
        names, fit.coefficients, fit.std_errors, fit.t_values, fit.p_values
    ):
        lines.append(f"{name},{float(est)!r},{float(se)!r},{float(t)!r},{float(p)!r}")
    return "\n".join(lines) + "\n"
