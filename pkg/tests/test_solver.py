import time

import numpy as np
import pytest

import oracles
from asgl_qr.data import Dataset, GroupStructure
from asgl_qr.qr_core import PenaltySpec, objective
from asgl_qr.solver import (SolverOptions, fit, fit_path, kkt_residual, kkt_residual_box,
                            lambda_max, spectral_norm_sq)
from conftest import make_data

CASES = ("lasso", "weighted_lasso", "group_lasso", "sgl", "asgl", "al_sgl", "unpenalized",
         "lasso_intercept")


def _instance(rng, case):
    n = int(rng.integers(10, 51))
    p = int(rng.integers(2, 21))
    X = rng.standard_normal((n, p))
    beta = np.where(rng.uniform(size=p) < 0.4, rng.normal(0, 2, p), 0.0)
    y = X @ beta + rng.standard_t(3, n)
    if case == "lasso_intercept":
        y = y + 3.0
    d = Dataset(X, y)
    groups = GroupStructure.from_labels(rng.integers(0, max(1, p // 2), p))
    tau = float(rng.choice([0.25, 0.5, 0.75, rng.uniform(0.1, 0.9)]))
    w, v = np.ones(p), np.ones(groups.K)
    alpha = {"lasso": 1.0, "weighted_lasso": 1.0, "group_lasso": 0.0, "unpenalized": 1.0,
             "lasso_intercept": 1.0}.get(case, float(rng.uniform(0.05, 0.95)))
    if case in ("weighted_lasso", "asgl", "al_sgl"):
        w = rng.uniform(0.2, 5, p)
    if case == "asgl":
        v = rng.uniform(0.2, 5, groups.K)
    frac = float(rng.choice([0.05, 0.2, 0.5, 0.9]))
    lam = 0.0 if case == "unpenalized" else frac * lambda_max(d, tau, groups, alpha, w, v)
    return d, tau, PenaltySpec(lam, alpha, w, v, groups), case == "lasso_intercept"


def solver_suite(seed=0, count=100):
    """Fit ``count`` random instances cycling through every penalty special case.

    Returns one record per instance with the KKT residual and, for pure
    l1 penalties, the gap to the linear-programming optimum.
    """
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        case = CASES[i % len(CASES)]
        d, tau, spec, icpt = _instance(rng, case)
        t0 = time.perf_counter()
        res = fit(d, tau, spec, intercept=icpt)
        rec = {"case": case, "kkt": res.kkt_residual, "converged": res.converged,
               "seconds": time.perf_counter() - t0, "lp_gap": None, "method": res.method}
        if spec.alpha == 1.0:
            X = np.column_stack([np.ones(d.n), d.X]) if icpt else d.X
            l1 = spec.l1_thresholds()
            if icpt:
                l1 = np.concatenate([[0.0], l1])
            ref, _ = oracles.lp_weighted_l1_qr(X, d.y, tau, l1)
            rec["lp_gap"] = res.objective - ref
        out.append(rec)
    return out


@pytest.fixture(scope="module")
def suite():
    t0 = time.perf_counter()
    recs = solver_suite()
    return recs, time.perf_counter() - t0


def test_suite_kkt(suite):
    recs, _ = suite
    bad = [r for r in recs if not (r["converged"] and r["kkt"] <= 1e-5)]
    assert not bad


def test_suite_lp_reference(suite):
    recs, elapsed = suite
    # the comparison is only meaningful if the iterative solver produced every fit
    assert all(r["method"] == "admm" for r in recs)
    gaps = [r["lp_gap"] for r in recs if r["lp_gap"] is not None]
    assert len(gaps) >= 40
    assert max(abs(g) for g in gaps) <= 1e-4
    assert elapsed < 300


def test_interpolation_example():
    d = Dataset(np.array([[1.0], [2.0]]), np.array([1.0, 2.0]))
    res = fit(d, 0.5, PenaltySpec.lasso(0.0, GroupStructure.single(1)))
    assert res.beta_hat[0] == pytest.approx(1.0, abs=1e-8)
    assert res.objective == pytest.approx(0.0, abs=1e-8)


@pytest.mark.parametrize("alpha", [1.0, 0.6, 0.0])
def test_lambda_max_gives_zero(alpha):
    d = make_data(seed=2)
    g = GroupStructure.contiguous([2, 2, 2])
    lm = lambda_max(d, 0.5, g, alpha)
    spec = PenaltySpec.sgl(lm, alpha, g)
    assert kkt_residual(np.zeros(6), d, 0.5, spec) <= 1e-9
    res = fit(d, 0.5, spec)
    assert np.all(res.beta_hat == 0)
    # just below lambda_max zero is no longer optimal
    assert kkt_residual(np.zeros(6), d, 0.5, spec.with_lambda(0.95 * lm)) > 1e-6


def test_lambda_max_alpha_one_closed_form():
    d = make_data(seed=4)
    g = GroupStructure.single(6)
    w = np.linspace(0.5, 2, 6)
    tau = 0.3
    # subgradient of the risk at zero: -(1/n) X^T psi with ties (y == 0) free
    psi = np.where(d.y > 0, tau, tau - 1)
    expected = np.max(np.abs(d.X.T @ psi / d.n) / w)
    assert lambda_max(d, tau, g, 1.0, w) == pytest.approx(expected, rel=1e-12)


def test_lp_fixed_instance():
    rng = np.random.default_rng(11)
    X = rng.standard_normal((20, 2))
    y = X @ np.array([1.0, -0.5]) + rng.standard_normal(20)
    d = Dataset(X, y)
    spec = PenaltySpec.lasso(0.05, GroupStructure.contiguous([1, 1]))
    res = fit(d, 0.5, spec)
    ref, _ = oracles.lp_weighted_l1_qr(X, y, 0.5, spec.l1_thresholds())
    assert abs(res.objective - ref) <= 1e-4


def test_kkt_residual_examples():
    d = make_data(seed=6)
    g = GroupStructure.single(6)
    spec = PenaltySpec.lasso(1e6, g)
    assert kkt_residual(np.zeros(6), d, 0.5, spec) == 0.0
    res = fit(d, 0.5, PenaltySpec.lasso(0.05, g))
    assert res.converged and kkt_residual(res.beta_hat, d, 0.5, PenaltySpec.lasso(0.05, g)) <= 1e-5
    # the box screen never exceeds the exact residual
    b = np.linspace(-1, 1, 6)
    assert kkt_residual_box(b, d, 0.5, spec) <= kkt_residual(b, d, 0.5, spec) + 1e-12


def test_objective_not_above_zero_vector():
    rng = np.random.default_rng(7)
    for _ in range(10):
        d, tau, spec, _ = _instance(rng, "asgl")
        res = fit(d, tau, spec)
        assert res.objective <= objective(np.zeros(d.p), d, tau, spec) + 1e-12


def test_group_term_weight_zero_matches_lasso():
    rng = np.random.default_rng(8)
    for _ in range(10):
        d = make_data(n=30, p=8, seed=int(rng.integers(1 << 30)))
        g = GroupStructure.contiguous([3, 3, 2])
        lam = 0.3 * lambda_max(d, 0.5, g, 1.0)
        a = fit(d, 0.5, PenaltySpec.lasso(lam, g))
        # same l1 level, group term switched off through v = 0
        b = fit(d, 0.5, PenaltySpec(lam / 0.5, 0.5, np.ones(8), np.zeros(3), g))
        assert abs(a.objective - b.objective) <= 1e-8


def test_unpenalized_residual_signs():
    rng = np.random.default_rng(9)
    for tau in (0.2, 0.5, 0.8):
        d = make_data(n=60, p=4, seed=int(rng.integers(1 << 30)))
        # the balance property comes from the intercept's optimality condition
        res = fit(d, tau, PenaltySpec.lasso(0.0, GroupStructure.single(4)), intercept=True)
        r = d.y - res.predict(d.X)
        zero = np.abs(r) <= 1e-7
        assert zero.sum() <= d.p + 1
        neg = np.mean(r < -1e-7)
        nonpos = np.mean(r <= 1e-7)
        slack = (d.p + 1) / d.n
        assert neg <= tau + slack and tau <= nonpos + slack


def test_intercept_fit():
    d = make_data(n=50, p=3, seed=10)
    shifted = Dataset(d.X, d.y + 5.0)
    spec = PenaltySpec.lasso(0.01, GroupStructure.single(3))
    res = fit(shifted, 0.5, spec, intercept=True)
    assert res.converged
    assert res.intercept == pytest.approx(5.0, abs=1.0)
    np.testing.assert_allclose(res.predict(shifted.X), shifted.X @ res.beta_hat + res.intercept)


def test_warm_start_iterations():
    ratios = []
    for seed in range(5):
        d = make_data(n=40, p=12, seed=100 + seed)
        g = GroupStructure.contiguous([4, 4, 4])
        base = PenaltySpec.sgl(1.0, 0.5, g)
        lm = lambda_max(d, 0.5, g, 0.5)
        lams = lm * np.geomspace(0.9, 0.05, 8)
        warm = fit_path(d, 0.5, base, lams)
        cold = [fit(d, 0.5, base.with_lambda(l)) for l in lams]
        assert all(r.converged for r in warm)
        ratios.append(sum(r.iterations for r in warm) / max(1, sum(r.iterations for r in cold)))
    assert max(ratios) <= 2.0


def test_beta0_length_checked():
    d = make_data()
    with pytest.raises(ValueError):
        fit(d, 0.5, PenaltySpec.lasso(0.1, GroupStructure.single(6)),
            SolverOptions(beta0=np.zeros(5)))


def test_options_validated():
    with pytest.raises(ValueError):
        SolverOptions(tol_kkt=0)
    with pytest.raises(ValueError):
        SolverOptions(max_iter=0)


def test_spectral_norm():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((30, 7))
    assert spectral_norm_sq(X) == pytest.approx(np.linalg.norm(X, 2) ** 2, rel=1e-6)


def test_lp_fallback_for_pure_l1():
    rng = np.random.default_rng(12)
    X = rng.standard_normal((40, 15))
    y = X[:, 0] + rng.standard_t(3, 40)
    d = Dataset(X, y)
    spec = PenaltySpec.lasso(0.0, GroupStructure.single(15))
    res = fit(d, 0.4, spec, SolverOptions(max_iter=3, check_every=1))
    assert res.converged and res.method == "lp"
    assert kkt_residual(res.beta_hat, d, 0.4, spec) <= 1e-5
    ref, _ = oracles.lp_weighted_l1_qr(X, y, 0.4, np.zeros(15))
    assert abs(res.objective - ref) <= 1e-8
    # with a group term there is no fallback and the cap is reported
    res2 = fit(d, 0.4, PenaltySpec.sgl(0.01, 0.5, GroupStructure.single(15)),
               SolverOptions(max_iter=3, check_every=1))
    assert not res2.converged and res2.method == "admm"
