"""Core data types: grouped datasets, prior constants, variational posteriors.

All types are immutable value objects. Arrays are copied on construction,
converted to float64 and marked read-only, so instances can be shared across
threads without synchronization.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionMismatch, DomainError, EmptyDataset, NonFinite

__all__ = [
    "Group",
    "GroupedDataset",
    "Hyperparameters",
    "VariationalPosterior",
    "validate",
    "default_hyperparameters",
    "hyperparameters_to_json",
    "hyperparameters_from_json",
    "posterior_to_json",
    "posterior_from_json",
]


def _frozen(a, dtype=np.float64) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Group:
    """One unit of the hierarchy: a design matrix, its responses, a label."""

    design: np.ndarray  # (M, D)
    response: np.ndarray  # (M,)
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "design", _frozen(np.atleast_2d(self.design)))
        object.__setattr__(self, "response", _frozen(np.atleast_1d(self.response)))

    @property
    def n_obs(self) -> int:
        return self.design.shape[0]


@dataclass(frozen=True)
class GroupedDataset:
    """Per-group design matrices and responses plus feature and group labels."""

    groups: tuple[Group, ...]
    feature_names: tuple[str, ...]
    group_labels: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(self.groups))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        labels = tuple(self.group_labels) or tuple(g.label for g in self.groups)
        object.__setattr__(self, "group_labels", labels)

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    @property
    def n_obs(self) -> int:
        return sum(g.n_obs for g in self.groups)

    def permuted(self, order) -> "GroupedDataset":
        """Dataset with groups reordered by the given index sequence."""
        order = list(order)
        return GroupedDataset(
            groups=tuple(self.groups[i] for i in order),
            feature_names=self.feature_names,
            group_labels=tuple(self.group_labels[i] for i in order),
        )


def validate(dataset: GroupedDataset) -> None:
    """Raise unless every dataset invariant holds.

    Raises EmptyDataset when there are no groups, DimensionMismatch for any
    shape inconsistency, NonFinite for NaN/Inf entries.
    """
    if dataset.n_groups == 0:
        raise EmptyDataset("dataset has no groups")
    D = dataset.n_features
    if len(dataset.group_labels) != dataset.n_groups:
        raise DimensionMismatch(
            f"{len(dataset.group_labels)} group labels for {dataset.n_groups} groups"
        )
    for i, g in enumerate(dataset.groups):
        if g.design.ndim != 2 or g.design.shape[1] != D:
            raise DimensionMismatch(
                f"group {i}: design has shape {g.design.shape}, expected (*, {D})"
            )
        if g.response.shape != (g.design.shape[0],):
            raise DimensionMismatch(
                f"group {i}: {g.design.shape[0]} design rows but "
                f"{g.response.shape[0]} responses"
            )
        if not (np.isfinite(g.design).all() and np.isfinite(g.response).all()):
            raise NonFinite(f"group {i} contains NaN or Inf entries")


@dataclass(frozen=True)
class Hyperparameters:
    """Gamma prior constants, population prior mean, and convergence controls.

    a0/b0 govern the noise precision, c0/d0 the group-coupling precision,
    e0/f0 the per-dimension ARD precisions. mu0 is the population prior mean
    (zero by default). epsilon is the ELBO plateau tolerance.
    """

    a0: float
    b0: float
    c0: float
    d0: float
    e0: float
    f0: float
    mu0: np.ndarray
    epsilon: float = 1e-6
    max_iter: int = 500

    def __post_init__(self):
        for name in ("a0", "b0", "c0", "d0", "e0", "f0"):
            v = float(getattr(self, name))
            if not (v > 0 and np.isfinite(v)):
                raise DomainError(f"{name} must be strictly positive, got {v}")
            object.__setattr__(self, name, v)
        if not self.epsilon > 0:
            raise DomainError(f"epsilon must be positive, got {self.epsilon}")
        if int(self.max_iter) < 1:
            raise DomainError(f"max_iter must be >= 1, got {self.max_iter}")
        object.__setattr__(self, "max_iter", int(self.max_iter))
        object.__setattr__(self, "mu0", _frozen(np.atleast_1d(self.mu0)))

    def with_mu0(self, mu0) -> "Hyperparameters":
        return replace(self, mu0=np.asarray(mu0, dtype=np.float64))


def default_hyperparameters(D: int) -> Hyperparameters:
    """Uninformative defaults: all Gamma constants 1e-2, zero prior mean."""
    if int(D) < 1:
        raise DomainError(f"feature dimension must be >= 1, got {D}")
    c = 1e-2
    return Hyperparameters(
        a0=c, b0=c, c0=c, d0=c, e0=c, f0=c,
        mu0=np.zeros(int(D)), epsilon=1e-6, max_iter=500,
    )


@dataclass(frozen=True)
class VariationalPosterior:
    """All variational factor parameters plus the ELBO trace.

    Per-group Gaussians (beta_mean/beta_cov), population Gaussian
    (delta_mean/delta_cov, diagonal by construction), and the three Gamma
    factors for the noise precision (a_n, b_n), the group-coupling precision
    (c_n, d_n), and the ARD precisions (e_n, f_n).
    """

    beta_mean: tuple[np.ndarray, ...]  # C vectors of length D
    beta_cov: tuple[np.ndarray, ...]  # C SPD matrices (D, D)
    delta_mean: np.ndarray  # (D,)
    delta_cov: np.ndarray  # (D, D)
    a_n: float
    b_n: float
    c_n: float
    d_n: float
    e_n: float
    f_n: np.ndarray  # (D,)
    elbo_trace: tuple[float, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "beta_mean", tuple(_frozen(m) for m in self.beta_mean))
        object.__setattr__(self, "beta_cov", tuple(_frozen(S) for S in self.beta_cov))
        object.__setattr__(self, "delta_mean", _frozen(self.delta_mean))
        object.__setattr__(self, "delta_cov", _frozen(self.delta_cov))
        object.__setattr__(self, "f_n", _frozen(self.f_n))
        object.__setattr__(self, "elbo_trace", tuple(float(v) for v in self.elbo_trace))
        for name in ("a_n", "b_n", "c_n", "d_n", "e_n"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def n_groups(self) -> int:
        return len(self.beta_mean)

    @property
    def n_features(self) -> int:
        return self.delta_mean.shape[0]


# ---------------------------------------------------------------------------
# JSON serialization. Field names match the type definitions exactly;
# matrices are row-major nested lists. Floats survive the round trip at full
# binary precision (repr-based JSON encoding is exact for float64).

def _hyper_to_dict(h: Hyperparameters) -> dict:
    return {
        "a0": h.a0, "b0": h.b0, "c0": h.c0, "d0": h.d0, "e0": h.e0, "f0": h.f0,
        "mu0": h.mu0.tolist(), "epsilon": h.epsilon, "max_iter": h.max_iter,
    }


def hyperparameters_to_json(h: Hyperparameters) -> str:
    return json.dumps(_hyper_to_dict(h))


def hyperparameters_from_json(s: str) -> Hyperparameters:
    d = json.loads(s)
    return Hyperparameters(
        a0=d["a0"], b0=d["b0"], c0=d["c0"], d0=d["d0"], e0=d["e0"], f0=d["f0"],
        mu0=np.asarray(d["mu0"], dtype=np.float64),
        epsilon=d.get("epsilon", 1e-6), max_iter=d.get("max_iter", 500),
    )


def _posterior_to_dict(p: VariationalPosterior) -> dict:
    return {
        "beta_mean": [m.tolist() for m in p.beta_mean],
        "beta_cov": [S.tolist() for S in p.beta_cov],
        "delta_mean": p.delta_mean.tolist(),
        "delta_cov": p.delta_cov.tolist(),
        "a_n": p.a_n, "b_n": p.b_n, "c_n": p.c_n, "d_n": p.d_n,
        "e_n": p.e_n, "f_n": p.f_n.tolist(),
        "elbo_trace": list(p.elbo_trace),
    }


def posterior_to_json(p: VariationalPosterior) -> str:
    return json.dumps(_posterior_to_dict(p))


def _posterior_from_dict(d: dict) -> VariationalPosterior:
    return VariationalPosterior(
        beta_mean=tuple(np.asarray(m, dtype=np.float64) for m in d["beta_mean"]),
        beta_cov=tuple(np.asarray(S, dtype=np.float64) for S in d["beta_cov"]),
        delta_mean=np.asarray(d["delta_mean"], dtype=np.float64),
        delta_cov=np.asarray(d["delta_cov"], dtype=np.float64),
        a_n=d["a_n"], b_n=d["b_n"], c_n=d["c_n"], d_n=d["d_n"],
        e_n=d["e_n"], f_n=np.asarray(d["f_n"], dtype=np.float64),
        elbo_trace=tuple(d.get("elbo_trace", ())),
    )


def posterior_from_json(s: str) -> VariationalPosterior:
    return _posterior_from_dict(json.loads(s))
