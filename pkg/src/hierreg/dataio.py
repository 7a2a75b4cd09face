"""CSV ingestion, dataset construction, and the cross-validation harness.

The student-evaluation file maps to a grouped dataset keyed by the class
column: the target is the perceived difficulty, features are nb.repeat,
attendance and the 28 questionnaire items, and the instructor column is
dropped. Cross-validation splits rows, trains on the complement, rounds
predictions to whole scale points before scoring.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .baselines import ols_fit, ridge_fit
from .errors import (
    DomainError,
    MissingColumn,
    ParseError,
    RaggedRows,
)
from .model import Group, GroupedDataset, Hyperparameters
from .predictive import predict_known_group, predict_new_group
from .specialmath import RngStream

__all__ = [
    "TabularFile",
    "CvReport",
    "load_csv",
    "build_grouped_dataset",
    "build_turkiye_dataset",
    "write_dataset_csv",
    "kfold_split",
    "rounded_mse",
    "run_cv",
    "cv_table_csv",
    "TURKIYE_FEATURES",
    "RIDGE_LAMBDA_GRID",
]

TURKIYE_REQUIRED = ("instr", "class", "nb.repeat", "attendance", "difficulty") + tuple(
    f"Q{i}" for i in range(1, 29)
)
TURKIYE_FEATURES = ("nb.repeat", "attendance") + tuple(f"Q{i}" for i in range(1, 29))
TURKIYE_GROUP_COUNT = 13

# 13 log-spaced points covering 1e-3 .. 1e3
RIDGE_LAMBDA_GRID = tuple(10.0 ** k for k in np.linspace(-3, 3, 13))


@dataclass(frozen=True)
class TabularFile:
    """A rectangular all-numeric table with named columns."""

    header: tuple[str, ...]
    rows: np.ndarray  # (n_rows, n_cols) float64

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]

    def column(self, name: str) -> np.ndarray:
        if name not in self.header:
            raise MissingColumn(f"column {name!r} not in {self.header}")
        return self.rows[:, self.header.index(name)]


def load_csv(path, delimiter: str = ",") -> TabularFile:
    """Parse a delimited numeric file; the first row is the header.

    Raises OSError for unreadable paths, ParseError for an empty file or a
    non-numeric cell (reporting data row number and column name), and
    RaggedRows when record lengths differ from the header.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        records = [row for row in reader if row]
    if not records:
        raise ParseError(f"{path}: empty file")
    header = tuple(name.strip() for name in records[0])
    data = np.empty((len(records) - 1, len(header)))
    for r, rec in enumerate(records[1:], start=1):
        if len(rec) != len(header):
            raise RaggedRows(
                f"{path}: row {r} has {len(rec)} cells, header has {len(header)}"
            )
        for c, cell in enumerate(rec):
            try:
                data[r - 1, c] = float(cell)
            except ValueError:
                raise ParseError(
                    f"{path}: row {r}, column {header[c]!r}: "
                    f"cannot parse {cell!r} as a number"
                ) from None
    return TabularFile(header=header, rows=data)


def _group_label(key: float) -> str:
    return str(int(key)) if float(key).is_integer() else str(key)


def build_grouped_dataset(
    table: TabularFile,
    group_col: str,
    target_col: str,
    feature_cols=None,
    label_prefix: str = "",
):
    """Split a flat table into per-group design/response blocks.

    Groups are ordered by ascending group key. Returns the grouped dataset
    plus flat design/response arrays concatenated in that same group order
    (the canonical row order used by the CV harness).
    """
    if feature_cols is None:
        feature_cols = [c for c in table.header if c not in (group_col, target_col)]
    feature_cols = list(feature_cols)
    for name in [group_col, target_col, *feature_cols]:
        if name not in table.header:
            raise MissingColumn(f"column {name!r} not in {table.header}")

    keys = table.column(group_col)
    y = table.column(target_col)
    X = np.column_stack([table.column(c) for c in feature_cols])

    groups = []
    labels = []
    for key in sorted(set(keys.tolist())):
        mask = keys == key
        label = label_prefix + _group_label(key)
        groups.append(Group(design=X[mask], response=y[mask], label=label))
        labels.append(label)
    grouped = GroupedDataset(
        groups=tuple(groups),
        feature_names=tuple(feature_cols),
        group_labels=tuple(labels),
    )
    flat_X = np.concatenate([g.design for g in grouped.groups], axis=0)
    flat_y = np.concatenate([g.response for g in grouped.groups])
    return grouped, flat_X, flat_y


def build_turkiye_dataset(table: TabularFile):
    """Map the student-evaluation schema onto a grouped dataset.

    Target is the difficulty column; features are nb.repeat, attendance and
    Q1..Q28 (D = 30); groups are the course classes and the instructor
    column is dropped. Warns when the class count is not the expected 13.
    """
    for name in TURKIYE_REQUIRED:
        if name not in table.header:
            raise MissingColumn(f"column {name!r} not in {table.header}")
    grouped, flat_X, flat_y = build_grouped_dataset(
        table,
        group_col="class",
        target_col="difficulty",
        feature_cols=list(TURKIYE_FEATURES),
        label_prefix="class ",
    )
    if grouped.n_groups != TURKIYE_GROUP_COUNT:
        warnings.warn(
            f"expected {TURKIYE_GROUP_COUNT} classes, found {grouped.n_groups}",
            stacklevel=2,
        )
    return grouped, flat_X, flat_y


def write_dataset_csv(grouped: GroupedDataset, path, group_col: str = "class", target_col: str = "difficulty") -> None:
    """Flatten a grouped dataset back to a delimited file (canonical order)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([group_col, target_col, *grouped.feature_names])
        for key, g in enumerate(grouped.groups):
            for row, resp in zip(g.design, g.response):
                writer.writerow([key, repr(float(resp)), *[repr(float(v)) for v in row]])


def kfold_split(N: int, K: int, seed: int) -> list[np.ndarray]:
    """Uniformly shuffled partition of range(N) into K folds, sizes within 1."""
    if K < 2:
        raise DomainError(f"need K >= 2 folds, got {K}")
    if N < K:
        raise DomainError(f"cannot split {N} rows into {K} folds")
    perm = RngStream(seed).permutation(int(N))
    return [np.sort(fold) for fold in np.array_split(perm, int(K))]


def rounded_mse(pred, truth) -> float:
    """Mean squared error after rounding predictions to the nearest integer.

    Ties round away from zero; predictions are not clamped to the scale.
    """
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise DomainError(f"length mismatch: {pred.shape} vs {truth.shape}")
    rounded = np.copysign(np.floor(np.abs(pred) + 0.5), pred)
    return float(np.mean((rounded - truth) ** 2))


@dataclass(frozen=True)
class CvReport:
    """Per-fold and mean rounded MSE for one model."""

    model_name: str
    fold_mses: tuple[float, ...]
    mean_mse: float
    seed: int

    def to_dict(self) -> dict:
        return {
            "model_name": self.model_name,
            "fold_mses": list(self.fold_mses),
            "mean_mse": self.mean_mse,
            "seed": self.seed,
        }


def _flatten(grouped: GroupedDataset):
    """Canonical flat arrays plus each row's group index."""
    X = np.concatenate([g.design for g in grouped.groups], axis=0)
    y = np.concatenate([g.response for g in grouped.groups])
    gidx = np.concatenate(
        [np.full(g.n_obs, i, dtype=np.int64) for i, g in enumerate(grouped.groups)]
    )
    return X, y, gidx


def _select_ridge_lambda(X, y, lambdas, seed) -> float:
    """Inner 5-fold grid search, scored by plain (unrounded) MSE."""
    folds = kfold_split(X.shape[0], 5, seed)
    best_lam, best_mse = None, np.inf
    for lam in lambdas:
        total, count = 0.0, 0
        for fold in folds:
            mask = np.ones(X.shape[0], dtype=bool)
            mask[fold] = False
            coef = ridge_fit(X[mask], y[mask], lam)
            resid = y[fold] - X[fold] @ coef
            total += float(resid @ resid)
            count += fold.size
        mse = total / count
        if mse < best_mse:
            best_lam, best_mse = lam, mse
    return best_lam


def _fit_standardizer(X):
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return mean, std


def _vb_fold_predictions(grouped, train_mask, X_test, test_gidx, hyper, standardizer):
    """Fit on the training rows and predict each held-out row.

    Rows whose class appears in training use that class's posterior; rows of
    a class entirely absent from training fall back to the population-level
    prediction.
    """
    from .cavi import fit as cavi_fit

    X, y, gidx = _flatten(grouped)
    if standardizer is not None:
        mean, std = standardizer
        X = (X - mean) / std
        X_test = (X_test - mean) / std
    groups = []
    train_index_of_group = {}
    for i, g in enumerate(grouped.groups):
        mask = train_mask & (gidx == i)
        if not mask.any():
            continue
        train_index_of_group[i] = len(groups)
        groups.append(Group(design=X[mask], response=y[mask], label=g.label))
    train_set = GroupedDataset(
        groups=tuple(groups), feature_names=grouped.feature_names
    )
    if hyper is None:
        from .model import default_hyperparameters

        hyper = default_hyperparameters(train_set.n_features)
    report = cavi_fit(train_set, hyper)
    post = report.posterior

    preds = np.empty(X_test.shape[0])
    for r in range(X_test.shape[0]):
        gi = int(test_gidx[r])
        if gi in train_index_of_group:
            preds[r] = predict_known_group(
                X_test[r], train_index_of_group[gi], post
            ).location
        else:
            preds[r] = predict_new_group(X_test[r], post).location
    return preds


def run_cv(
    grouped: GroupedDataset,
    model: str,
    K: int = 10,
    seed: int = 0,
    hyper: Hyperparameters | None = None,
    include_intercept: bool = False,
    standardize: bool = False,
    ridge_lambdas=RIDGE_LAMBDA_GRID,
) -> CvReport:
    """K-fold cross-validation of one model, scored by rounded MSE.

    model is one of 'vb', 'ols', 'ridge'. Rows are split uniformly; each
    fold is predicted by a model trained on the complement. The report is
    reproducible given (dataset, model, K, seed, hyper).
    """
    if model not in ("vb", "ols", "ridge"):
        raise DomainError(f"unknown model {model!r}; expected vb, ols or ridge")
    X, y, gidx = _flatten(grouped)
    N = X.shape[0]
    folds = kfold_split(N, K, seed)

    fold_mses = []
    for k, fold in enumerate(folds):
        train_mask = np.ones(N, dtype=bool)
        train_mask[fold] = False
        try:
            X_tr, y_tr = X[train_mask], y[train_mask]
            X_te, y_te = X[fold], y[fold]
            standardizer = _fit_standardizer(X_tr) if standardize else None
            if model == "vb":
                preds = _vb_fold_predictions(
                    grouped, train_mask, X_te, gidx[fold], hyper, standardizer
                )
            else:
                if standardizer is not None:
                    mean, std = standardizer
                    X_tr = (X_tr - mean) / std
                    X_te = (X_te - mean) / std
                if model == "ols":
                    preds = ols_fit(X_tr, y_tr, include_intercept).predict(X_te)
                else:
                    lam = _select_ridge_lambda(
                        X_tr, y_tr, ridge_lambdas, seed=RngStream(seed).spawn(k).seed
                    )
                    preds = X_te @ ridge_fit(X_tr, y_tr, lam)
        except Exception as exc:
            exc.args = (f"fold {k}: {exc}",)
            raise
        fold_mses.append(rounded_mse(preds, y_te))

    return CvReport(
        model_name=model,
        fold_mses=tuple(fold_mses),
        mean_mse=float(np.mean(fold_mses)),
        seed=int(seed),
    )


def cv_table_csv(reports: list[CvReport]) -> str:
    """Single-row CSV: one mean-MSE column per model."""
    header = ",".join(r.model_name for r in reports)
    values = ",".join(repr(r.mean_mse) for r in reports)
    return f"{header}\n{values}\n"
