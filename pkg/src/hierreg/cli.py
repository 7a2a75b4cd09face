"""Command-line entry point.

Subcommands: fit, compare-gibbs, cv, rank, predict. Every command that
consumes randomness takes an explicit --seed, so outputs are byte-identical
across runs. Exit codes: 0 success, 1 usage or IO problems, 2 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np
import scipy.stats

from . import dataio
from .cavi import FitReport, fit
from .errors import (
    DimensionMismatch,
    DomainError,
    EmptyDataset,
    HierregError,
    InsufficientDraws,
    MissingColumn,
    NonFinite,
    NotPositiveDefinite,
    ParseError,
    RaggedRows,
    RankDeficient,
)
from .gibbs import GibbsConfig, gibbs_run, parameter_names, summarize
from .model import Hyperparameters, default_hyperparameters, hyperparameters_from_json
from .predictive import (
    predict_known_group,
    predict_new_group,
    predictive_interval,
)
from .ranking import rank_features, rank_groups, ranking_csv

USAGE_EXIT = 1
NUMERICAL_EXIT = 2

_NUMERICAL_ERRORS = (NotPositiveDefinite, RankDeficient, NonFinite, InsufficientDraws)
_INPUT_ERRORS = (
    OSError,
    ParseError,
    RaggedRows,
    MissingColumn,
    EmptyDataset,
    DimensionMismatch,
    DomainError,
    json.JSONDecodeError,
    KeyError,
)


class _Parser(argparse.ArgumentParser):
    """argparse variant that exits 1 (not 2) on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(USAGE_EXIT)


def _build_parser() -> _Parser:
    parser = _Parser(prog="hierreg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add_data_flags(p):
        p.add_argument("--data", required=True, help="CSV file with one row per observation")
        p.add_argument("--group-col", default="class", help="grouping column (default: class)")
        p.add_argument("--target-col", default="difficulty", help="response column (default: difficulty)")

    p_fit = sub.add_parser("fit", help="run variational inference, write a fit JSON")
    add_data_flags(p_fit)
    p_fit.add_argument("--hyper", help="hyperparameter JSON (inline or a file path)")
    p_fit.add_argument("--epsilon", type=float, help="ELBO plateau tolerance")
    p_fit.add_argument("--max-iter", type=int, help="sweep limit")
    p_fit.add_argument("--out", required=True, help="output JSON path")

    p_cmp = sub.add_parser(
        "compare-gibbs", help="fit VB and run the Gibbs sampler on the same data"
    )
    add_data_flags(p_cmp)
    p_cmp.add_argument("--seed", type=int, default=0)
    p_cmp.add_argument("--n-iter", type=int, default=5000)
    p_cmp.add_argument("--burn-in", type=int, default=1000)
    p_cmp.add_argument("--thin", type=int, default=1)
    p_cmp.add_argument("--level", type=float, default=0.95)
    p_cmp.add_argument("--out", required=True, help="output CSV path")

    p_cv = sub.add_parser("cv", help="cross-validated rounded MSE per model")
    add_data_flags(p_cv)
    p_cv.add_argument("--models", default="vb,ols,ridge", help="comma list of vb,ols,ridge")
    p_cv.add_argument("--folds", type=int, default=10)
    p_cv.add_argument("--seed", type=int, default=0)
    p_cv.add_argument("--intercept", action="store_true", help="add an intercept to the OLS baseline")
    p_cv.add_argument("--standardize", action="store_true", help="z-score features on training folds")
    p_cv.add_argument("--out", required=True, help="output JSON path (CSV written alongside)")

    p_rank = sub.add_parser("rank", help="feature and group rankings from a fit JSON")
    p_rank.add_argument("--model", required=True, help="fit JSON produced by the fit command")
    p_rank.add_argument("--out", required=True, help="output prefix or .csv path")

    p_pred = sub.add_parser("predict", help="Student-t prediction for one covariate vector")
    p_pred.add_argument("--model", required=True, help="fit JSON produced by the fit command")
    p_pred.add_argument("--x", required=True, help="comma-separated feature values")
    p_pred.add_argument("--group", help="group label; population-level prediction if omitted")
    p_pred.add_argument("--level", type=float, default=0.95)

    return parser


def _load_grouped(args):
    table = dataio.load_csv(args.data)
    is_turkiye = all(c in table.header for c in dataio.TURKIYE_REQUIRED)
    if is_turkiye and args.group_col == "class" and args.target_col == "difficulty":
        grouped, _, _ = dataio.build_turkiye_dataset(table)
    else:
        grouped, _, _ = dataio.build_grouped_dataset(
            table, group_col=args.group_col, target_col=args.target_col
        )
    return grouped


def _resolve_hyper(args, D: int) -> Hyperparameters:
    if getattr(args, "hyper", None):
        text = args.hyper
        if os.path.exists(text):
            with open(text) as fh:
                text = fh.read()
        hyper = hyperparameters_from_json(text)
    else:
        hyper = default_hyperparameters(D)
    if getattr(args, "epsilon", None) is not None:
        hyper = Hyperparameters(
            a0=hyper.a0, b0=hyper.b0, c0=hyper.c0, d0=hyper.d0, e0=hyper.e0,
            f0=hyper.f0, mu0=hyper.mu0, epsilon=args.epsilon, max_iter=hyper.max_iter,
        )
    if getattr(args, "max_iter", None) is not None:
        hyper = Hyperparameters(
            a0=hyper.a0, b0=hyper.b0, c0=hyper.c0, d0=hyper.d0, e0=hyper.e0,
            f0=hyper.f0, mu0=hyper.mu0, epsilon=hyper.epsilon, max_iter=args.max_iter,
        )
    return hyper


def _cmd_fit(args) -> int:
    grouped = _load_grouped(args)
    hyper = _resolve_hyper(args, grouped.n_features)
    report = fit(grouped, hyper)
    with open(args.out, "w") as fh:
        fh.write(report.to_json())
    print(
        f"iterations={report.iterations} converged={report.converged} "
        f"final_elbo={report.final_elbo!r}"
    )
    return 0


def _vb_intervals(post, level: float):
    """Gaussian/Gamma marginal means and equal-tailed intervals of the
    variational factors, in canonical parameter order."""
    z = scipy.stats.norm.ppf((1.0 + level) / 2.0)
    lo_q, hi_q = (1.0 - level) / 2.0, (1.0 + level) / 2.0
    rows = []
    for m, S in zip(post.beta_mean, post.beta_cov):
        sd = np.sqrt(np.diag(S))
        for d in range(post.n_features):
            rows.append((m[d], m[d] - z * sd[d], m[d] + z * sd[d]))
    sd = np.sqrt(np.diag(post.delta_cov))
    for d in range(post.n_features):
        m = post.delta_mean[d]
        rows.append((m, m - z * sd[d], m + z * sd[d]))
    for shape, rate in ((post.a_n, post.b_n), (post.c_n, post.d_n)):
        dist = scipy.stats.gamma(shape, scale=1.0 / rate)
        rows.append((shape / rate, dist.ppf(lo_q), dist.ppf(hi_q)))
    for d in range(post.n_features):
        dist = scipy.stats.gamma(post.e_n, scale=1.0 / post.f_n[d])
        rows.append((post.e_n / post.f_n[d], dist.ppf(lo_q), dist.ppf(hi_q)))
    return [(float(a), float(b), float(c)) for a, b, c in rows]


def _cmd_compare_gibbs(args) -> int:
    grouped = _load_grouped(args)
    hyper = default_hyperparameters(grouped.n_features)

    t0 = time.perf_counter()
    report = fit(grouped, hyper)
    vb_seconds = time.perf_counter() - t0

    cfg = GibbsConfig(n_iter=args.n_iter, burn_in=args.burn_in, thin=args.thin, seed=args.seed)
    t0 = time.perf_counter()
    run = gibbs_run(grouped, hyper, cfg)
    gibbs_seconds = time.perf_counter() - t0

    gibbs_rows = summarize(run, args.level)
    vb_rows = _vb_intervals(report.posterior, args.level)
    names = parameter_names(grouped.n_groups, grouped.n_features)
    lines = ["parameter,vb_mean,vb_lower,vb_upper,gibbs_mean,gibbs_lower,gibbs_upper"]
    for name, (vm, vl, vu), (_, gm, gl, gu) in zip(names, vb_rows, gibbs_rows):
        lines.append(f"{name},{vm!r},{vl!r},{vu!r},{gm!r},{gl!r},{gu!r}")
    with open(args.out, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print(
        f"vb_seconds={vb_seconds:.3f} gibbs_seconds={gibbs_seconds:.3f} "
        f"(informational, not a pass/fail target)",
        file=sys.stderr,
    )
    return 0


def _cmd_cv(args) -> int:
    models = [m.strip() for m in args.models.split(",") if m.strip()]
    if not models:
        raise DomainError("no models requested")
    for m in models:
        if m not in ("vb", "ols", "ridge"):
            raise DomainError(f"unknown model {m!r}; expected vb, ols or ridge")
    if args.folds < 2:
        raise DomainError(f"need --folds >= 2, got {args.folds}")
    grouped = _load_grouped(args)
    reports = [
        dataio.run_cv(
            grouped,
            model=m,
            K=args.folds,
            seed=args.seed,
            include_intercept=args.intercept,
            standardize=args.standardize,
        )
        for m in models
    ]
    with open(args.out, "w") as fh:
        json.dump({r.model_name: r.to_dict() for r in reports}, fh)
    csv_path = _with_suffix(args.out, ".csv")
    with open(csv_path, "w") as fh:
        fh.write(dataio.cv_table_csv(reports))
    for r in reports:
        print(f"{r.model_name}: mean rounded MSE {r.mean_mse!r}")
    return 0


def _with_suffix(path: str, suffix: str) -> str:
    base, ext = os.path.splitext(path)
    return base + suffix if ext else path + suffix


def _load_fit_json(path: str) -> FitReport:
    with open(path) as fh:
        report = FitReport.from_json(fh.read())
    if not report.feature_names or not report.group_labels:
        raise ParseError(f"{path}: fit JSON lacks feature or group labels")
    return report


def _cmd_rank(args) -> int:
    report = _load_fit_json(args.model)
    base, _ = os.path.splitext(args.out)
    features = rank_features(report.posterior, report.feature_names)
    groups = rank_groups(report.posterior, report.group_labels)
    with open(base + ".features.csv", "w") as fh:
        fh.write(ranking_csv(features))
    with open(base + ".groups.csv", "w") as fh:
        fh.write(ranking_csv(groups))
    print(f"wrote {base}.features.csv and {base}.groups.csv")
    return 0


def _cmd_predict(args) -> int:
    report = _load_fit_json(args.model)
    post = report.posterior
    x = np.array([float(v) for v in args.x.split(",")])
    if x.shape != (post.n_features,):
        raise DimensionMismatch(
            f"--x has {x.shape[0]} values, expected D={post.n_features}"
        )
    if args.group is None:
        pred = predict_new_group(x, post)
        label = "NEW"
    else:
        if args.group not in report.group_labels:
            print(
                f"unknown group {args.group!r}; valid labels: "
                + ", ".join(report.group_labels),
                file=sys.stderr,
            )
            return NUMERICAL_EXIT
        idx = report.group_labels.index(args.group)
        pred = predict_known_group(x, idx, post)
        label = args.group
    lower, upper = predictive_interval(pred, args.level)
    print("group_label,location,scale,dof,lower,upper")
    print(f"{label},{pred.location!r},{pred.scale!r},{pred.dof!r},{lower!r},{upper!r}")
    return 0


_COMMANDS = {
    "fit": _cmd_fit,
    "compare-gibbs": _cmd_compare_gibbs,
    "cv": _cmd_cv,
    "rank": _cmd_rank,
    "predict": _cmd_predict,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except _NUMERICAL_ERRORS as exc:
        print(f"hierreg {args.command}: numerical failure: {exc}", file=sys.stderr)
        return NUMERICAL_EXIT
    except _INPUT_ERRORS as exc:
        print(f"hierreg {args.command}: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except HierregError as exc:
        print(f"hierreg {args.command}: {exc}", file=sys.stderr)
        return NUMERICAL_EXIT


if __name__ == "__main__":
    raise SystemExit(main())
