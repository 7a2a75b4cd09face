"""Gibbs sampler for the exact joint model, used as a reference for the
variational approximation.

Every full conditional is conjugate: Gaussians for the group weights and
the population mean, Gammas for the three precisions. The scan order
matches the coordinate-ascent order so traces are directly comparable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InsufficientDraws
from .model import GroupedDataset, Hyperparameters, validate
from .specialmath import RngStream, spd_factorize

__all__ = [
    "GibbsConfig",
    "GibbsRun",
    "gibbs_run",
    "gibbs_scan",
    "summarize",
    "summary_csv",
    "parameter_names",
]


@dataclass(frozen=True)
class GibbsConfig:
    """Chain settings. Retained draw count is (n_iter - burn_in) // thin."""

    n_iter: int = 5000
    burn_in: int = 1000
    thin: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.n_iter < 1 or self.thin < 1 or self.burn_in < 0:
            raise DomainError("n_iter >= 1, thin >= 1, burn_in >= 0 required")
        if self.burn_in >= self.n_iter:
            raise DomainError("burn_in must be smaller than n_iter")
        if self.n_retained < 1:
            raise DomainError("configuration retains no draws")

    @property
    def n_retained(self) -> int:
        return (self.n_iter - self.burn_in) // self.thin


@dataclass(frozen=True)
class GibbsRun:
    """Retained posterior draws, one row per kept iteration."""

    beta_draws: np.ndarray  # (R, C, D)
    delta_draws: np.ndarray  # (R, D)
    sigma_draws: np.ndarray  # (R,)
    s_draws: np.ndarray  # (R,)
    w_draws: np.ndarray  # (R, D)

    @property
    def n_retained(self) -> int:
        return self.sigma_draws.shape[0]


def _positive_gamma(rng: RngStream, shape, rate):
    """Gamma draw with floating-point underflow to exact zero redrawn.

    Zeros are a float artifact of tiny shapes (a measure-zero event in exact
    arithmetic) and would violate the positivity invariant of precision draws.
    """
    x = rng.gamma(shape, rate)
    for _ in range(100):
        bad = np.asarray(x) == 0.0
        if not np.any(bad):
            break
        redraw = rng.gamma(shape, rate)
        x = np.where(bad, redraw, x) if np.ndim(x) else float(redraw)
    return x


def gibbs_scan(Xs, ys, xtx, beta, delta, sigma, s, w, hyper: Hyperparameters, rng: RngStream):
    """One full sweep of the conditionals in the order beta, Delta, sigma, s, w.

    Xs/ys are the per-group designs and responses, xtx the cached X'X blocks.
    Returns the new (beta, delta, sigma, s, w); beta is a fresh (C, D) array.
    """
    C = len(Xs)
    D = beta.shape[1]
    eye = np.eye(D)
    N = sum(len(y) for y in ys)

    # beta_i | rest ~ N(Lam^-1 (sigma X'y + s Delta), Lam^-1)
    beta = beta.copy()
    for i in range(C):
        lam = sigma * xtx[i] + s * eye
        factor = spd_factorize(lam)
        mean = factor.solve(sigma * (Xs[i].T @ ys[i]) + s * delta)
        z = rng.normal(size=D)
        beta[i] = mean + np.linalg.solve(factor.lower_triangular.T, z)

    # Delta | rest: diagonal precision C s + w_d
    prec = C * s + w
    mean = (s * beta.sum(axis=0) + w * hyper.mu0) / prec
    delta = mean + rng.normal(size=D) / np.sqrt(prec)

    # sigma | rest
    resid = 0.0
    for i in range(C):
        r = ys[i] - Xs[i] @ beta[i]
        resid += float(r @ r)
    sigma = float(_positive_gamma(rng, hyper.a0 + 0.5 * N, hyper.b0 + 0.5 * resid))

    # s | rest
    dev = beta - delta
    s = float(
        _positive_gamma(
            rng, hyper.c0 + 0.5 * C * D, hyper.d0 + 0.5 * float(np.sum(dev * dev))
        )
    )

    # w_d | rest: parent of Delta only
    dd = delta - hyper.mu0
    w = np.asarray(_positive_gamma(rng, hyper.e0 + 0.5, hyper.f0 + 0.5 * dd**2))

    return beta, delta, sigma, s, w


def gibbs_run(dataset: GroupedDataset, hyper: Hyperparameters, cfg: GibbsConfig) -> GibbsRun:
    """Cycle the full conditionals and retain post-burn-in, thinned draws."""
    validate(dataset)
    C = dataset.n_groups
    D = dataset.n_features
    rng = RngStream(cfg.seed)

    Xs = [g.design for g in dataset.groups]
    ys = [g.response for g in dataset.groups]
    xtx = [X.T @ X for X in Xs]

    # deterministic start: prior means for the precisions, prior mean for Delta
    sigma = hyper.a0 / hyper.b0
    s = hyper.c0 / hyper.d0
    w = np.full(D, hyper.e0 / hyper.f0)
    delta = hyper.mu0.copy()
    beta = np.zeros((C, D))

    R = cfg.n_retained
    beta_out = np.empty((R, C, D))
    delta_out = np.empty((R, D))
    sigma_out = np.empty(R)
    s_out = np.empty(R)
    w_out = np.empty((R, D))

    kept = 0
    for it in range(cfg.n_iter):
        beta, delta, sigma, s, w = gibbs_scan(
            Xs, ys, xtx, beta, delta, sigma, s, w, hyper, rng
        )
        if it >= cfg.burn_in and (it - cfg.burn_in) % cfg.thin == 0 and kept < R:
            beta_out[kept] = beta
            delta_out[kept] = delta
            sigma_out[kept] = sigma
            s_out[kept] = s
            w_out[kept] = w
            kept += 1

    return GibbsRun(
        beta_draws=beta_out,
        delta_draws=delta_out,
        sigma_draws=sigma_out,
        s_draws=s_out,
        w_draws=w_out,
    )


def parameter_names(C: int, D: int) -> list[str]:
    """Canonical parameter order: beta row-major, delta, sigma, s, w."""
    names = [f"beta[{i}][{d}]" for i in range(C) for d in range(D)]
    names += [f"delta[{d}]" for d in range(D)]
    names += ["sigma", "s"]
    names += [f"w[{d}]" for d in range(D)]
    return names


def _stacked(run: GibbsRun) -> np.ndarray:
    R, C, D = run.beta_draws.shape
    return np.column_stack(
        [
            run.beta_draws.reshape(R, C * D),
            run.delta_draws,
            run.sigma_draws,
            run.s_draws,
            run.w_draws,
        ]
    )


def summarize(run: GibbsRun, level: float = 0.95) -> list[tuple[str, float, float, float]]:
    """Empirical mean and equal-tailed interval for every parameter.

    Returns (name, mean, lower, upper) rows in canonical parameter order.
    """
    if not 0.0 < level < 1.0:
        raise DomainError(f"level must lie in (0, 1), got {level}")
    if run.n_retained < 100:
        raise InsufficientDraws(f"{run.n_retained} retained draws, need >= 100")
    R, C, D = run.beta_draws.shape
    draws = _stacked(run)
    lo, hi = np.quantile(draws, [(1.0 - level) / 2.0, (1.0 + level) / 2.0], axis=0)
    means = draws.mean(axis=0)
    return [
        (name, float(m), float(a), float(b))
        for name, m, a, b in zip(parameter_names(C, D), means, lo, hi)
    ]


def summary_csv(rows: list[tuple[str, float, float, float]]) -> str:
    lines = ["parameter,mean,lower,upper"]
    for name, mean, lower, upper in rows:
        lines.append(f"{name},{mean!r},{lower!r},{upper!r}")
    return "\n".join(lines) + "\n"
