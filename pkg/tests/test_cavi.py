import math
from dataclasses import replace

import numpy as np
import pytest
from scipy.optimize import minimize

import hierreg as hr
from hierreg.cavi import (
    compute_elbo,
    fit,
    initial_state,
    sweep,
    update_beta,
    update_delta,
    update_s,
    update_sigma,
    update_w,
)
from hierreg.model import Group, GroupedDataset, VariationalPosterior

from conftest import small_dataset


def _state_after_sweeps(dataset, hyper, n=3):
    state = initial_state(dataset, hyper)
    for _ in range(n):
        state = sweep(dataset, state, hyper)
    return state


def _with_beta(state, i, mean=None, cov=None):
    bm = list(state.beta_mean)
    bc = list(state.beta_cov)
    if mean is not None:
        bm[i] = mean
    if cov is not None:
        bc[i] = cov
    return replace(state, beta_mean=tuple(bm), beta_cov=tuple(bc))


class TestUpdateBeta:
    def test_empty_group_returns_prior(self):
        ds = small_dataset(C=2, D=3, M=4)
        hyper = hr.default_hyperparameters(3)
        state = _state_after_sweeps(ds, hyper)
        empty = Group(design=np.zeros((0, 3)), response=np.zeros(0), label="empty")
        mean, cov = update_beta(empty, state)
        np.testing.assert_allclose(mean, state.delta_mean, rtol=1e-12)
        np.testing.assert_allclose(
            cov, (state.d_n / state.c_n) * np.eye(3), rtol=1e-12
        )

    def test_hand_value_d1(self):
        # X=[1], y=[2], E[sigma]=E[s]=1, Delta=0: precision 2, mean 1, cov 0.5
        g = Group(design=np.array([[1.0]]), response=np.array([2.0]), label="g")
        state = VariationalPosterior(
            beta_mean=(np.zeros(1),), beta_cov=(np.eye(1),),
            delta_mean=np.zeros(1), delta_cov=np.eye(1),
            a_n=1.0, b_n=1.0, c_n=1.0, d_n=1.0, e_n=1.0, f_n=np.ones(1),
        )
        mean, cov = update_beta(g, state)
        assert mean[0] == pytest.approx(1.0, abs=1e-14)
        assert cov[0, 0] == pytest.approx(0.5, abs=1e-14)

    def test_matches_numerical_argmax(self):
        # independent oracle: maximize the beta-dependent expected log-joint
        rng = np.random.Generator(np.random.PCG64(12))
        X = rng.standard_normal((20, 2))
        y = rng.standard_normal(20)
        g = Group(design=X, response=y, label="g")
        ds = GroupedDataset(groups=(g,), feature_names=("a", "b"))
        hyper = hr.default_hyperparameters(2)
        state = _state_after_sweeps(ds, hyper)
        e_sigma = state.a_n / state.b_n
        e_s = state.c_n / state.d_n

        def neg_objective(beta):
            r = y - X @ beta
            dev = beta - state.delta_mean
            return 0.5 * e_sigma * (r @ r) + 0.5 * e_s * (dev @ dev)

        res = minimize(neg_objective, np.zeros(2), method="BFGS", options={"gtol": 1e-12})
        mean, _ = update_beta(g, state)
        np.testing.assert_allclose(mean, res.x, atol=1e-6)


class TestUpdateDelta:
    def test_no_groups_returns_prior(self):
        hyper = hr.default_hyperparameters(2)
        state = initial_state(small_dataset(C=1, D=2), hyper)
        mean, cov = update_delta(state, hyper, C=0)
        np.testing.assert_allclose(mean, hyper.mu0, atol=1e-15)
        np.testing.assert_allclose(
            np.diag(cov), state.f_n / state.e_n, rtol=1e-12
        )

    def test_hand_value(self):
        # C=2, beta={1,3}, E[s]=E[w]=1, mu0=0: lambda=3, mean=4/3
        hyper = hr.default_hyperparameters(1)
        state = VariationalPosterior(
            beta_mean=(np.array([1.0]), np.array([3.0])),
            beta_cov=(np.eye(1), np.eye(1)),
            delta_mean=np.zeros(1), delta_cov=np.eye(1),
            a_n=1.0, b_n=1.0, c_n=1.0, d_n=1.0, e_n=1.0, f_n=np.ones(1),
        )
        mean, cov = update_delta(state, hyper, C=2)
        assert mean[0] == pytest.approx(4.0 / 3.0, rel=1e-14)
        assert cov[0, 0] == pytest.approx(1.0 / 3.0, rel=1e-14)

    def test_shrinks_toward_zero(self):
        # with mu0 = 0 the posterior mean never exceeds the group average
        ds = small_dataset(C=4, D=3, M=10, seed=5)
        hyper = hr.default_hyperparameters(3)
        state = _state_after_sweeps(ds, hyper)
        mean, _ = update_delta(state, hyper, C=4)
        avg = np.mean(state.beta_mean, axis=0)
        assert np.all(np.abs(mean) <= np.abs(avg) + 1e-12)

    def test_covariance_is_diagonal(self):
        ds = small_dataset(C=3, D=4, M=6, seed=1)
        hyper = hr.default_hyperparameters(4)
        state = _state_after_sweeps(ds, hyper)
        _, cov = update_delta(state, hyper, C=3)
        off = cov - np.diag(np.diag(cov))
        assert np.max(np.abs(off)) == 0.0


class TestUpdateSigma:
    def test_exact_fit_limit(self):
        X = np.array([[1.0], [2.0]])
        beta = np.array([0.5])
        g = Group(design=X, response=X @ beta, label="g")
        ds = GroupedDataset(groups=(g,), feature_names=("a",))
        hyper = hr.default_hyperparameters(1)
        state = VariationalPosterior(
            beta_mean=(beta,), beta_cov=(np.zeros((1, 1)),),
            delta_mean=np.zeros(1), delta_cov=np.eye(1),
            a_n=1.0, b_n=1.0, c_n=1.0, d_n=1.0, e_n=1.0, f_n=np.ones(1),
        )
        a_n, b_n = update_sigma(ds, state, hyper)
        assert a_n == pytest.approx(hyper.a0 + 1.0)
        assert b_n == pytest.approx(hyper.b0)

    def test_hand_value(self):
        # X=[1,1], y=[1,-1], beta=0, Cov=0, a0=b0=0.01: a_n=1.01, b_n=1.01
        g = Group(design=np.ones((2, 1)), response=np.array([1.0, -1.0]), label="g")
        ds = GroupedDataset(groups=(g,), feature_names=("a",))
        hyper = hr.default_hyperparameters(1)
        state = VariationalPosterior(
            beta_mean=(np.zeros(1),), beta_cov=(np.zeros((1, 1)),),
            delta_mean=np.zeros(1), delta_cov=np.eye(1),
            a_n=1.0, b_n=1.0, c_n=1.0, d_n=1.0, e_n=1.0, f_n=np.ones(1),
        )
        a_n, b_n = update_sigma(ds, state, hyper)
        assert a_n == pytest.approx(1.01, abs=1e-14)
        assert b_n == pytest.approx(1.01, abs=1e-14)

    def test_monte_carlo_oracle(self):
        # b_n - b0 equals E_q[sum of squared residuals]/2 under q(beta)
        ds = small_dataset(C=2, D=2, M=6, seed=3)
        hyper = hr.default_hyperparameters(2)
        state = _state_after_sweeps(ds, hyper)
        _, b_n = update_sigma(ds, state, hyper)

        rng = np.random.Generator(np.random.PCG64(99))
        n = 1_000_000
        total = np.zeros(n)
        for g, m, S in zip(ds.groups, state.beta_mean, state.beta_cov):
            L = np.linalg.cholesky(S)
            draws = m + rng.standard_normal((n, 2)) @ L.T
            resid = g.response[None, :] - draws @ g.design.T
            total += np.sum(resid**2, axis=1)
        est = 0.5 * total.mean()
        se = 0.5 * total.std() / math.sqrt(n)
        assert abs((b_n - hyper.b0) - est) <= 3 * se


class TestUpdateS:
    def test_degenerate_limit(self):
        hyper = hr.default_hyperparameters(2)
        delta = np.array([0.3, -0.7])
        state = VariationalPosterior(
            beta_mean=(delta, delta), beta_cov=(np.zeros((2, 2)),) * 2,
            delta_mean=delta, delta_cov=np.zeros((2, 2)),
            a_n=1.0, b_n=1.0, c_n=1.0, d_n=1.0, e_n=1.0, f_n=np.ones(2),
        )
        c_n, d_n = update_s(state, hyper, C=2, D=2)
        assert c_n == pytest.approx(hyper.c0 + 2.0)
        assert d_n == pytest.approx(hyper.d0, abs=1e-15)

    def test_hand_value(self):
        # C=2, D=1, beta={1,3}, Delta=2, Cov(Delta)=0.1, Cov(beta)=0.2 each
        hyper = hr.default_hyperparameters(1)
        state = VariationalPosterior(
            beta_mean=(np.array([1.0]), np.array([3.0])),
            beta_cov=(np.array([[0.2]]), np.array([[0.2]])),
            delta_mean=np.array([2.0]), delta_cov=np.array([[0.1]]),
            a_n=1.0, b_n=1.0, c_n=1.0, d_n=1.0, e_n=1.0, f_n=np.ones(1),
        )
        c_n, d_n = update_s(state, hyper, C=2, D=1)
        assert c_n == pytest.approx(hyper.c0 + 1.0)
        assert d_n == pytest.approx(1.31, abs=1e-12)

    def test_monte_carlo_oracle(self):
        # d_n - d0 equals E[sum_i ||beta_i - Delta||^2]/2 over q(beta) q(Delta)
        ds = small_dataset(C=3, D=2, M=5, seed=8)
        hyper = hr.default_hyperparameters(2)
        state = _state_after_sweeps(ds, hyper)
        _, d_n = update_s(state, hyper, C=3, D=2)

        rng = np.random.Generator(np.random.PCG64(123))
        n = 1_000_000
        Ld = np.linalg.cholesky(state.delta_cov)
        delta = state.delta_mean + rng.standard_normal((n, 2)) @ Ld.T
        total = np.zeros(n)
        for m, S in zip(state.beta_mean, state.beta_cov):
            L = np.linalg.cholesky(S)
            draws = m + rng.standard_normal((n, 2)) @ L.T
            total += np.sum((draws - delta) ** 2, axis=1)
        est = 0.5 * total.mean()
        se = 0.5 * total.std() / math.sqrt(n)
        assert abs((d_n - hyper.d0) - est) <= 3 * se


class TestUpdateW:
    def test_degenerate_limit(self):
        hyper = hr.default_hyperparameters(2)
        state = VariationalPosterior(
            beta_mean=(np.zeros(2),), beta_cov=(np.eye(2),),
            delta_mean=np.zeros(2), delta_cov=np.zeros((2, 2)),
            a_n=1.0, b_n=1.0, c_n=1.0, d_n=1.0, e_n=1.0, f_n=np.ones(2),
        )
        e_n, f_n = update_w(state, hyper)
        assert e_n == pytest.approx(hyper.e0 + 0.5)
        np.testing.assert_allclose(f_n, hyper.f0, atol=1e-15)

    def test_hand_value(self):
        # Delta=(1,2), diag Cov=(0.5,0.5), f0=0.01: f_n=(0.76,2.26), e_n=0.51
        hyper = hr.default_hyperparameters(2)
        state = VariationalPosterior(
            beta_mean=(np.zeros(2),), beta_cov=(np.eye(2),),
            delta_mean=np.array([1.0, 2.0]), delta_cov=np.diag([0.5, 0.5]),
            a_n=1.0, b_n=1.0, c_n=1.0, d_n=1.0, e_n=1.0, f_n=np.ones(2),
        )
        e_n, f_n = update_w(state, hyper)
        assert e_n == pytest.approx(0.51, abs=1e-15)
        np.testing.assert_allclose(f_n, [0.76, 2.26], atol=1e-12)

    def test_ard_shrinkage_ordering(self):
        # growing |Delta_d| grows f_d and shrinks the expected relevance
        hyper = hr.default_hyperparameters(2)
        base = VariationalPosterior(
            beta_mean=(np.zeros(2),), beta_cov=(np.eye(2),),
            delta_mean=np.array([0.5, 0.5]), delta_cov=np.diag([0.2, 0.2]),
            a_n=1.0, b_n=1.0, c_n=1.0, d_n=1.0, e_n=1.0, f_n=np.ones(2),
        )
        e0, f0 = update_w(base, hyper)
        bumped = replace(base, delta_mean=np.array([2.5, 0.5]))
        e1, f1 = update_w(bumped, hyper)
        assert f1[0] > f0[0] and f1[1] == f0[1]
        assert e1 / f1[0] < e0 / f0[0]


class TestComputeElbo:
    def test_non_decreasing_across_sweeps(self):
        ds = small_dataset(C=4, D=3, M=12, seed=2)
        hyper = hr.default_hyperparameters(3)
        report = fit(ds, hyper)
        trace = np.asarray(report.posterior.elbo_trace)
        assert np.all(np.diff(trace) >= -1e-8)

    def test_sensitive_to_response_scale(self):
        ds = small_dataset(C=2, D=2, M=5, seed=4)
        hyper = hr.default_hyperparameters(2)
        state = _state_after_sweeps(ds, hyper)
        doubled = GroupedDataset(
            groups=tuple(
                Group(design=g.design, response=2.0 * g.response, label=g.label)
                for g in ds.groups
            ),
            feature_names=ds.feature_names,
        )
        a = compute_elbo(ds, state, hyper)
        b = compute_elbo(doubled, state, hyper)
        assert a != b

    def test_invariant_to_group_permutation(self):
        ds = small_dataset(C=4, D=2, M=6, seed=11)
        hyper = hr.default_hyperparameters(2)
        state = _state_after_sweeps(ds, hyper)
        order = [2, 0, 3, 1]
        ds_p = ds.permuted(order)
        state_p = replace(
            state,
            beta_mean=tuple(state.beta_mean[i] for i in order),
            beta_cov=tuple(state.beta_cov[i] for i in order),
        )
        a = compute_elbo(ds, state, hyper)
        b = compute_elbo(ds_p, state_p, hyper)
        assert b == pytest.approx(a, abs=1e-10)


class TestFit:
    def test_duplicate_groups_agree(self):
        rng = np.random.Generator(np.random.PCG64(31))
        X = rng.standard_normal((15, 2))
        y = rng.standard_normal(15)
        ds = GroupedDataset(
            groups=(
                Group(design=X, response=y, label="a"),
                Group(design=X, response=y, label="b"),
            ),
            feature_names=("x0", "x1"),
        )
        post = fit(ds).posterior
        np.testing.assert_allclose(post.beta_mean[0], post.beta_mean[1], atol=1e-8)

    def test_infinite_epsilon_stops_after_one_sweep(self):
        ds = small_dataset()
        hyper = replace_epsilon(hr.default_hyperparameters(3), math.inf)
        report = fit(ds, hyper)
        assert report.iterations == 1
        assert report.converged

    def test_converged_implies_plateau(self):
        ds = small_dataset(C=3, D=2, M=10, seed=6)
        hyper = hr.default_hyperparameters(2)
        report = fit(ds, hyper)
        assert report.converged
        trace = report.posterior.elbo_trace
        assert abs(trace[-1] - trace[-2]) < hyper.epsilon
        assert report.final_elbo == trace[-1]

    def test_max_iter_reported_not_raised(self):
        ds = small_dataset(C=3, D=2, M=10, seed=6)
        hyper = replace_max_iter(hr.default_hyperparameters(2), 2)
        report = fit(ds, hyper)
        assert not report.converged
        assert report.iterations == 2

    def test_single_updates_are_idempotent(self):
        ds = small_dataset(C=3, D=2, M=8, seed=9)
        hyper = hr.default_hyperparameters(2)
        state = _state_after_sweeps(ds, hyper, n=2)

        m1, S1 = update_beta(ds.groups[0], state)
        state2 = _with_beta(state, 0, m1, S1)
        m2, S2 = update_beta(ds.groups[0], state2)
        np.testing.assert_allclose(m1, m2, atol=1e-12)
        np.testing.assert_allclose(S1, S2, atol=1e-12)

        d1 = update_delta(state, hyper, C=3)
        state2 = replace(state, delta_mean=d1[0], delta_cov=d1[1])
        d2 = update_delta(state2, hyper, C=3)
        np.testing.assert_allclose(d1[0], d2[0], atol=1e-12)

        ab1 = update_sigma(ds, state, hyper)
        state2 = replace(state, a_n=ab1[0], b_n=ab1[1])
        ab2 = update_sigma(ds, state2, hyper)
        assert ab1 == ab2

        cd1 = update_s(state, hyper, C=3, D=2)
        state2 = replace(state, c_n=cd1[0], d_n=cd1[1])
        cd2 = update_s(state2, hyper, C=3, D=2)
        assert cd1 == cd2

        ef1 = update_w(state, hyper)
        state2 = replace(state, e_n=ef1[0], f_n=ef1[1])
        ef2 = update_w(state2, hyper)
        assert ef1[0] == ef2[0]
        np.testing.assert_array_equal(ef1[1], ef2[1])

    def test_group_permutation_equivariance(self):
        ds = small_dataset(C=5, D=3, M=9, seed=13)
        hyper = hr.default_hyperparameters(3)
        order = [4, 2, 0, 1, 3]
        a = fit(ds, hyper).posterior
        b = fit(ds.permuted(order), hyper).posterior
        for new_pos, old_pos in enumerate(order):
            np.testing.assert_allclose(
                b.beta_mean[new_pos], a.beta_mean[old_pos], rtol=1e-10, atol=1e-12
            )
        np.testing.assert_allclose(b.delta_mean, a.delta_mean, rtol=1e-10, atol=1e-12)
        for name in ("a_n", "b_n", "c_n", "d_n", "e_n"):
            assert getattr(b, name) == pytest.approx(getattr(a, name), rel=1e-10)
        np.testing.assert_allclose(b.f_n, a.f_n, rtol=1e-10)

    def test_strong_prior_on_s_recovers_per_group_ols(self):
        # huge d0 forces E[s] toward 0, decoupling the groups
        ds, _ = hr.synthetic_dataset(C=3, M=30, D=2, seed=17, sigma=4.0, s=1.0)
        ols = [
            np.linalg.lstsq(g.design, g.response, rcond=None)[0] for g in ds.groups
        ]
        errs = []
        for d0 in (1e2, 1e4, 1e6, 1e8):
            hyper = hr.Hyperparameters(
                a0=1e-2, b0=1e-2, c0=1e-2, d0=d0, e0=1e-2, f0=1e-2, mu0=np.zeros(2)
            )
            post = fit(ds, hyper).posterior
            errs.append(
                max(
                    float(np.linalg.norm(post.beta_mean[i] - ols[i]))
                    for i in range(3)
                )
            )
        assert all(e2 <= e1 + 1e-12 for e1, e2 in zip(errs, errs[1:]))
        assert errs[-1] < 1e-3

    def test_elbo_trace_is_stored_on_posterior(self):
        ds = small_dataset()
        report = fit(ds)
        assert len(report.posterior.elbo_trace) == report.iterations + 1

    def test_fit_report_json_round_trip(self):
        ds = small_dataset()
        report = fit(ds)
        again = hr.FitReport.from_json(report.to_json())
        assert again.iterations == report.iterations
        assert again.converged == report.converged
        assert again.final_elbo == report.final_elbo
        assert again.feature_names == report.feature_names
        np.testing.assert_array_equal(
            again.posterior.delta_mean, report.posterior.delta_mean
        )


def replace_epsilon(hyper, eps):
    return hr.Hyperparameters(
        a0=hyper.a0, b0=hyper.b0, c0=hyper.c0, d0=hyper.d0, e0=hyper.e0,
        f0=hyper.f0, mu0=hyper.mu0, epsilon=eps, max_iter=hyper.max_iter,
    )


def replace_max_iter(hyper, n):
    return hr.Hyperparameters(
        a0=hyper.a0, b0=hyper.b0, c0=hyper.c0, d0=hyper.d0, e0=hyper.e0,
        f0=hyper.f0, mu0=hyper.mu0, epsilon=hyper.epsilon, max_iter=n,
    )
