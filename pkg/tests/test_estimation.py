import json
import math

import numpy as np
import pytest

from ewcef import estimands as E
from ewcef import estimation as Q
from ewcef.errors import DomainError
from ewcef.frames import make_frame
from ewcef.simulation import SimConfig, centering, make_rng, sample_many, simulate_dgp, spawn_seeds
from conftest import ALL_FRAMES
from oracles import richardson_gradient


def omega_of(hyper):
    parts = [hyper.eh1, [hyper.alpha, hyper.lam]]
    if hyper.phi is not None:
        parts.append(hyper.phi)
    return np.concatenate([np.ravel(p) for p in parts])


def hyper_of(frame, omega):
    k = frame.dim
    phi = omega[k + 2 :] if frame.phi_names else None
    return E.Hyper(omega[:k], omega[k], omega[k + 1], phi=phi)


def test_loglik_examples():
    f = make_frame("gaussian_known_sd", sigma=1.0)
    ql = Q.quasi_loglik(f, np.array([0.0]), E.Hyper([0.0], 0.5, 0.5))
    assert ql.increments[0] == 0.0
    p = make_frame("poisson")
    ql = Q.quasi_loglik(p, np.array([2.0]), E.Hyper([1.0], 0.5, 0.5))
    assert ql.increments[0] == pytest.approx(-1.0, abs=1e-15)
    assert ql.theta_pred[0, 0] == pytest.approx(0.0, abs=1e-15)


def test_cumulative_is_exact_running_sum(rng):
    f = make_frame("beta")
    y = rng.beta(2, 5, 100)
    ql = Q.quasi_loglik(f, y, E.Hyper(f.grad(np.array([2.0, 5.0])), 0.7, 0.9))
    assert np.array_equal(ql.cumulative, np.cumsum(ql.increments))
    assert ql.total == ql.cumulative[-1]
    sk = Q.quasi_loglik(f, y, E.Hyper(f.grad(np.array([2.0, 5.0])), 0.7, 0.9), skip=5)
    assert np.all(sk.increments[:5] == 0) and np.array_equal(sk.increments[5:], ql.increments[5:])


def test_drift_examples():
    p = make_frame("poisson")
    assert Q.drift_increment(p, [0.3], [0.3]) == 0.0
    assert Q.drift_increment(p, [1.0], [0.0]) == pytest.approx(2 - math.e, abs=1e-15)
    with pytest.raises(DomainError):
        Q.drift_increment(make_frame("exponential"), [1.0], [-1.0])


@pytest.mark.parametrize("name,kw", ALL_FRAMES, ids=[a for a, _ in ALL_FRAMES])
def test_drift_quadratic_approximation(name, kw, rng):
    f = make_frame(name, **kw)
    th = centering(f)
    d = rng.normal(size=f.dim)
    d /= np.linalg.norm(d)
    errs = []
    for eps in (1e-2, 5e-3):
        c = Q.drift_increment(f, th + eps * d, th)
        quad = -0.5 * eps**2 * d @ f.hess(th) @ d
        errs.append(abs(c - quad))
    # cubic remainder: halving delta divides the error by about eight
    assert errs[1] <= errs[0] / 5 or errs[0] < 1e-15


@pytest.mark.parametrize("name,kw", ALL_FRAMES, ids=[a for a, _ in ALL_FRAMES])
def test_drift_supermartingale(name, kw):
    f = make_frame(name, **kw)
    eh = f.grad(centering(f))
    sim = simulate_dgp(SimConfig(f, E.Hyper(eh, 0.8, 0.9), 300, seed=3))
    other = E.predict_path(f, sim.hvals, E.Hyper(eh, 0.5, 0.7)).theta
    c = Q.drift_increment(f, other, sim.theta_pred)
    assert np.all(c <= 1e-12)
    assert np.all(np.diff(np.cumsum(c)) <= 1e-12)


def test_score_zero_when_data_equal_anchor():
    f = make_frame("poisson")
    y = np.full(30, 2.0)
    s = Q.score(f, y, E.Hyper([2.0], 0.4, 0.7))
    assert np.max(np.abs(s)) < 1e-12


@pytest.mark.parametrize("name,kw", ALL_FRAMES, ids=[a for a, _ in ALL_FRAMES])
def test_score_matches_finite_differences(name, kw):
    f = make_frame(name, **kw)
    eh = f.grad(centering(f))
    phi = f.phi if f.phi_names else None
    sim = simulate_dgp(SimConfig(f, E.Hyper(eh, 0.7, 0.8), 80, seed=17))
    rng = np.random.default_rng(5)
    for _ in range(3):
        hy = E.Hyper(eh, rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), phi=phi)
        w = omega_of(hy)
        exact = Q.score(f, sim.y, hy)
        fd = richardson_gradient(lambda v: Q.quasi_loglik(f, sim.y, hyper_of(f, v)).total, w, rel=1e-4)
        scale = max(1.0, np.max(np.abs(exact)))
        np.testing.assert_allclose(exact, fd, rtol=0, atol=1e-6 * scale)


def test_score_martingale_monte_carlo():
    f = make_frame("poisson")
    hy = E.Hyper([1.5], 0.7, 0.8)
    S = np.array([Q.score(f, simulate_dgp(SimConfig(f, hy, 60, s)).y, hy) for s in spawn_seeds(77, 500)])
    se = S.std(axis=0, ddof=1) / math.sqrt(len(S))
    assert np.all(np.abs(S.mean(axis=0)) <= 4 * se)


def test_score_needs_interior():
    f = make_frame("poisson")
    with pytest.raises(DomainError):
        Q.score(f, np.ones(5), E.Hyper([1.0], 1.0, 0.5))


def test_param_labels():
    assert Q.param_labels(make_frame("gaussian_known_sd", sigma=2.0)) == ["eh1_1", "alpha", "lambda", "sigma"]
    assert Q.param_labels(make_frame("beta")) == ["eh1_1", "eh1_2", "alpha", "lambda"]


def test_lrv_iid():
    g = make_rng(1).normal(size=100_000)
    T = len(g)
    v = T * Q.long_run_variance(g)[0, 0]
    assert v == pytest.approx(T * g.var(), rel=0.05)


def test_lrv_constant_and_psd(rng):
    assert np.all(Q.long_run_variance(np.full((50, 2), 3.0)) == 0)
    g = rng.normal(size=(200, 3)) @ rng.normal(size=(3, 3))
    assert np.min(np.linalg.eigvalsh(Q.long_run_variance(g, 7))) >= -1e-12


def test_lrv_ma1():
    e = make_rng(2).normal(size=100_001)
    th = 0.6
    x = e[1:] + th * e[:-1]
    v = Q.long_run_variance(x, 60)[0, 0]
    assert v == pytest.approx((1 + th) ** 2, rel=0.1)


def test_lrv_short_series():
    assert Q.default_bandwidth(10_000) == 11
    with pytest.raises(DomainError):
        Q.long_run_variance(np.ones(5), 4)


def test_numerical_hessian_quadratic():
    A = np.array([[2.0, 0.5], [0.5, 1.0]])
    H = Q.numerical_hessian(lambda w: A @ w, np.array([0.3, -0.2]))
    np.testing.assert_allclose(H, A, atol=1e-9)


@pytest.fixture(scope="module")
def gaussian_fit():
    f = make_frame("gaussian_known_sd", sigma=1.0)
    sim = simulate_dgp(SimConfig(f, E.Hyper([0.0], 0.95, 0.65, phi=[1.0]), 10_000, seed=2024))
    return f, sim.y, Q.fit_mle(f, sim.y)


def test_mle_recovers_truth(gaussian_fit):
    f, y, fit = gaussian_fit
    assert abs(fit.omega_hat.alpha - 0.95) <= 0.05
    assert abs(fit.omega_hat.lam - 0.65) <= 0.05
    assert fit.converged and not fit.boundary_pinned


def test_mle_first_order_condition(gaussian_fit):
    f, y, fit = gaussian_fit
    g = Q.score(f, y, fit.omega_hat)
    assert np.max(np.abs(g)) <= 1e-5 * (1 + abs(fit.loglik))
    assert fit.loglik == pytest.approx(Q.quasi_loglik(f, y, fit.omega_hat).total, rel=1e-12)


def test_mle_covariance(gaussian_fit):
    f, y, fit = gaussian_fit
    np.testing.assert_array_equal(fit.cov, fit.cov.T)
    assert np.all(np.diag(fit.cov) > 0)
    assert fit.hessian_asymmetry <= 1e-4
    d = json.loads(fit.to_json())
    assert d["method"] == "mle" and d["cov"]["labels"] == ["eh1_1", "alpha", "lambda", "sigma"]
    assert d["half_life"] == pytest.approx(math.log(0.5) / math.log(fit.omega_hat.lam))


def test_two_step_anchor_is_sample_mean(rng):
    f = make_frame("beta")
    y = rng.beta(2, 5, 400)
    fit = Q.fit_two_step(f, y)
    np.testing.assert_array_equal(fit.omega_hat.eh1, f.h(y).sum(axis=0) / 400)
    assert fit.cov.shape == (4, 4)
    np.testing.assert_array_equal(fit.cov, fit.cov.T)


def test_two_step_recovery_poisson():
    f = make_frame("poisson")
    sim = simulate_dgp(SimConfig(f, E.Hyper([3.0], 0.9, 0.7), 5000, seed=8))
    fit = Q.fit_two_step(f, sim.y)
    assert abs(fit.omega_hat.alpha - 0.9) < 0.06 and abs(fit.omega_hat.lam - 0.7) < 0.06
    assert fit.converged and np.all(fit.se > 0)


def test_iid_data_flags_weak_identification():
    f = make_frame("gaussian_known_sd", sigma=1.0)
    y = make_rng(3).normal(size=2000)
    fit = Q.fit_mle(f, y)
    lam_se = fit.se[2]
    assert fit.boundary_pinned or fit.flat_ridge or lam_se > 0.1 or fit.omega_hat.alpha < 0.1


def test_fit_needs_ten_points():
    with pytest.raises(DomainError):
        Q.fit_mle(make_frame("poisson"), np.ones(9))


def test_half_life_report():
    assert math.log(0.5) / math.log(0.65) == pytest.approx(E.half_life(0.65))
    assert round(E.half_life(0.65), 1) == 1.6


def test_grid_surface_shape_and_region():
    f = make_frame("poisson")
    sim = simulate_dgp(SimConfig(f, E.Hyper([2.0], 0.9, 0.7), 300, seed=4))
    ax = Q.grid_axis(6)
    np.testing.assert_allclose(ax, [1 / 12, 3 / 12, 5 / 12, 7 / 12, 9 / 12, 11 / 12])
    s = Q.loglik_grid(f, sim.y, E.Hyper([2.0], 0.5, 0.5), ax, Q.grid_axis(5))
    assert s.loglik.shape == (6, 5) and s.rows().shape == (30, 4)
    assert s.in_ci99[np.unravel_index(np.argmax(s.loglik), s.loglik.shape)]
    assert s.level == pytest.approx(s.l_max - 0.5 * 9.2103403719761836, rel=1e-12)
    a, lam = s.rows()[7, :2]
    assert s.rows()[7, 2] == pytest.approx(Q.quasi_loglik(f, sim.y, E.Hyper([2.0], a, lam)).total, rel=1e-13)


def test_profile_interval_contains_truth():
    f = make_frame("poisson")
    sim = simulate_dgp(SimConfig(f, E.Hyper([2.0], 0.9, 0.7), 2000, seed=6))
    lo, hi, prof, grid = Q.profile_interval(f, sim.y, E.Hyper([2.0], 0.5, 0.5))
    assert lo < 0.7 < hi and hi - lo < 0.3
    assert len(prof) == len(grid) == 50
