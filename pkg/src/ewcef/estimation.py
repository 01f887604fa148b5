"""Quasi-likelihood estimation of the hyperparameters.

The parameter vector is ``omega = (E[h(Y_1)], alpha, lambda, phi)``. The
working log-likelihood follows the prediction decomposition

    l_T = sum_t  h_t(y_t)' theta_{t|t-1} - n_t psi(theta_{t|t-1})

with the exponentially weighted one-step predictor ``theta_{t|t-1}``. Terms of
``log b(y)`` are dropped unless they depend on the static parameters ``phi``.

The score is exact: derivatives of the predictor's numerator and normaliser
are propagated through the same linear recursions that build the predictor.
"""
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize, stats
from scipy.signal import lfilter
from scipy.special import expit, logit

from .errors import ConvergenceError, DomainError
from .estimands import Hyper, half_life, invert_path

__all__ = [
    "QuasiLik",
    "FitOptions",
    "FitResult",
    "GridSurface",
    "param_labels",
    "statistics",
    "quasi_loglik",
    "drift_increment",
    "score",
    "fit_mle",
    "fit_two_step",
    "long_run_variance",
    "default_bandwidth",
    "numerical_hessian",
    "loglik_grid",
    "profile_interval",
]

DEFAULT_STARTS = ((0.3, 0.5), (0.7, 0.9), (0.9, 0.6))
CHI2_99_2 = stats.chi2.ppf(0.99, 2)
CHI2_99_1 = stats.chi2.ppf(0.99, 1)


def statistics(frame, y, n_seq=None):
    """``h(y_t)`` for a whole series, shape (T, k)."""
    y = np.asarray(y, dtype=float)
    T = len(y)
    n = np.ones(T) if n_seq is None else np.asarray(n_seq, dtype=float)
    hv = frame.h(y, n)
    return hv.reshape(T, frame.dim)


def param_labels(frame, k=None):
    k = frame.dim if k is None else k
    return [f"eh1_{i + 1}" for i in range(k)] + ["alpha", "lambda"] + list(frame.phi_names)


def _effective(frame, hyper):
    return frame if hyper.phi is None else frame.with_phi(hyper.phi)


def _lag(a):
    out = np.zeros_like(a)
    out[1:] = a[:-1]
    return out


def _ewma(a, lam):
    return lfilter([1.0], [1.0, -lam], a, axis=0)


@dataclass
class _Path:
    theta: np.ndarray
    mbar: np.ndarray
    n_norm: np.ndarray
    N: np.ndarray
    N_lag: np.ndarray
    H_lag: np.ndarray
    anchors_sum: np.ndarray


def _predictor(frame, hv, n, hyper, warm=None):
    T = len(hv)
    a, lam = hyper.alpha, hyper.lam
    N = _ewma(n, lam)
    H = _ewma(hv, lam)
    X = _ewma(hyper.anchors(T), lam)
    N_lag, H_lag = _lag(N), _lag(H)
    m = (1 - a) * X + a * lam * H_lag
    nn = (1 - a) * N + a * lam * N_lag
    if np.any(nn <= 0):
        raise DomainError("one-step predictor undefined (alpha = 1 at t = 1)")
    mbar = m / nn[:, None]
    theta = invert_path(frame, mbar, warm=warm)
    return _Path(theta, mbar, nn, N, N_lag, H_lag, X)


@dataclass
class QuasiLik:
    """Per-period increments and the running total ``l_t``."""

    increments: np.ndarray
    cumulative: np.ndarray
    theta_pred: Optional[np.ndarray] = None

    @property
    def total(self):
        return float(self.cumulative[-1])


def _increments(frame, hv, n, theta):
    return (
        np.sum(hv * theta, axis=-1)
        - n * frame.psi(theta)
        + frame.log_base_phi(hv, n)
    )


def _prepare(frame, y, hyper):
    frame = _effective(frame, hyper)
    hv = statistics(frame, y, hyper.n_seq)
    n = hyper.scales(len(hv))
    return frame, hv, n


def _loglik_stats(frame, hv, n, hyper, skip=0, warm=None):
    path = _predictor(frame, hv, n, hyper, warm)
    inc = _increments(frame, hv, n, path.theta)
    if skip:
        inc[:skip] = 0.0
    return inc, path


def quasi_loglik(frame, y, hyper, skip=0):
    """Working log-likelihood of the observations ``y`` at ``hyper``.

    ``skip`` drops the first increments (default keeps all of them).
    """
    frame, hv, n = _prepare(frame, y, hyper)
    inc, path = _loglik_stats(frame, hv, n, hyper, skip)
    return QuasiLik(inc, np.cumsum(inc), path.theta)


def drift_increment(frame, theta_tilde, theta_star):
    """``psi'(theta*)'(theta~ - theta*) - [psi(theta~) - psi(theta*)]``, never positive."""
    tt = np.atleast_1d(np.asarray(theta_tilde, dtype=float))
    ts = np.atleast_1d(np.asarray(theta_star, dtype=float))
    if not (np.all(frame.natural_ok(tt)) and np.all(frame.natural_ok(ts))):
        raise DomainError("drift_increment needs both arguments in the natural domain")
    return np.sum(frame.grad(ts) * (tt - ts), axis=-1) - (frame.psi(tt) - frame.psi(ts))


def _score_stats(frame, hv, n, hyper, skip=0):
    """Per-period score contributions, shape (T, k + 2 + len(phi))."""
    if hyper.eh1.ndim != 1:
        raise DomainError("the score needs a single anchor vector")
    a, lam = hyper.alpha, hyper.lam
    if not (0 < a < 1 and 0 < lam < 1):
        raise DomainError("the score needs alpha and lambda strictly inside (0, 1)")
    e = hyper.eh1
    p = _predictor(frame, hv, n, hyper)
    T, k = hv.shape
    nn, N, N_lag, H_lag = p.n_norm, p.N, p.N_lag, p.H_lag
    # lambda derivatives of the one-sided sums: D_t = lam D_{t-1} + S_{t-1}
    DN = _ewma(N_lag, lam)
    DH = _ewma(H_lag, lam)
    DN_lag, DH_lag = _lag(DN), _lag(DH)
    mbar = p.mbar
    dm_a = -N[:, None] * e + lam * H_lag
    dn_a = -N + lam * N_lag
    dm_l = (1 - a) * DN[:, None] * e + a * (H_lag + lam * DH_lag)
    dn_l = (1 - a) * DN + a * (N_lag + lam * DN_lag)
    dmbar_a = (dm_a - mbar * dn_a[:, None]) / nn[:, None]
    dmbar_l = (dm_l - mbar * dn_l[:, None]) / nn[:, None]
    dmbar_e = (1 - a) * N / nn
    resid = hv - n[:, None] * frame.grad(p.theta)
    try:
        u = frame.newton_step(p.theta, resid)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError("singular predictive variance along the path") from exc
    if not np.all(np.isfinite(u)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(u), axis=-1))[0]) + 1
        raise ConvergenceError(f"singular predictive variance at t = {bad}")
    parts = [
        dmbar_e[:, None] * u,
        np.sum(dmbar_a * u, axis=-1)[:, None],
        np.sum(dmbar_l * u, axis=-1)[:, None],
        frame.phi_score(hv, p.mbar, n),
    ]
    out = np.concatenate(parts, axis=1)
    if skip:
        out[:skip] = 0.0
    return out


def score(frame, y, hyper, per_t=False, skip=0):
    """Exact gradient of :func:`quasi_loglik` in the order of :func:`param_labels`."""
    frame, hv, n = _prepare(frame, y, hyper)
    s = _score_stats(frame, hv, n, hyper, skip)
    return s if per_t else s.sum(axis=0)


# -- long run variance -------------------------------------------------------------------


def default_bandwidth(T):
    return int(math.floor(4 * (T / 100.0) ** (2.0 / 9.0)))


def long_run_variance(series, bandwidth=None):
    """Bartlett kernel (Newey-West) long-run variance of a demeaned series.

    Returns the per-period matrix ``Gamma_0 + sum_j (1 - j/(L+1)) (Gamma_j +
    Gamma_j')``; multiply by T for the variance of the sum.
    """
    g = np.asarray(series, dtype=float)
    if g.ndim == 1:
        g = g[:, None]
    T = len(g)
    L = default_bandwidth(T) if bandwidth is None else int(bandwidth)
    if L < 0 or T < max(2, 2 * L):
        raise DomainError(f"series of length {T} too short for bandwidth {L}")
    g = g - g.mean(axis=0)
    omega = g.T @ g / T
    for j in range(1, L + 1):
        gam = g[j:].T @ g[:-j] / T
        omega += (1 - j / (L + 1)) * (gam + gam.T)
    return omega


# -- fitting ---------------------------------------------------------------------------------


@dataclass
class FitOptions:
    starts: tuple = DEFAULT_STARTS
    xatol: float = 1e-9
    fatol: float = 1e-10
    maxiter: Optional[int] = None
    polish: bool = True
    skip: int = 0
    bandwidth: Optional[int] = None


@dataclass
class FitResult:
    omega_hat: Hyper
    cov: np.ndarray
    loglik: float
    score_norm: float
    iterations: int
    method: str
    labels: list
    converged: bool = True
    boundary_pinned: bool = False
    flat_ridge: bool = False
    hessian_asymmetry: float = 0.0
    message: str = ""
    nfev: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def omega(self):
        parts = [self.omega_hat.eh1, [self.omega_hat.alpha, self.omega_hat.lam]]
        if self.omega_hat.phi is not None:
            parts.append(self.omega_hat.phi)
        return np.concatenate([np.ravel(p) for p in parts])

    @property
    def se(self):
        return np.sqrt(np.clip(np.diag(self.cov), 0, None))

    @property
    def half_life(self):
        return half_life(self.omega_hat.lam)

    def to_dict(self):
        def num(v):
            v = float(v)
            return v if math.isfinite(v) else repr(v)

        return {
            "method": self.method,
            "omega_hat": {k: num(v) for k, v in zip(self.labels, self.omega)},
            "alpha_hat": num(self.omega_hat.alpha),
            "lambda_hat": num(self.omega_hat.lam),
            "half_life": num(self.half_life) if 0 < self.omega_hat.lam < 1 else None,
            "se": {k: num(v) for k, v in zip(self.labels, self.se)},
            "cov": {"labels": list(self.labels), "rows": [[num(v) for v in r] for r in self.cov]},
            "loglik": num(self.loglik),
            "iterations": int(self.iterations),
            "nfev": int(self.nfev),
            "diagnostics": {
                "converged": bool(self.converged),
                "score_norm": num(self.score_norm),
                "boundary_pinned": bool(self.boundary_pinned),
                "flat_ridge": bool(self.flat_ridge),
                "hessian_asymmetry": num(self.hessian_asymmetry),
                "message": self.message,
            },
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), indent=kw.pop("indent", 2), **kw)


class _Problem:
    """Everything the optimiser needs: fixed statistics and the parameter layout."""

    def __init__(self, frame, y, n_seq, skip):
        self.base = frame
        self.hv = statistics(frame, y, n_seq)
        self.T, self.k = self.hv.shape
        self.n = np.ones(self.T) if n_seq is None else np.asarray(n_seq, dtype=float)
        self.n_seq = n_seq
        self.skip = skip
        self.p_phi = len(frame.phi_names)
        self.labels = param_labels(frame, self.k)
        self.dim = self.k + 2 + self.p_phi
        self._warm = None

    def hyper(self, omega):
        k = self.k
        phi = omega[k + 2 :] if self.p_phi else None
        return Hyper(omega[:k], omega[k], omega[k + 1], n_seq=self.n_seq, phi=phi)

    def frame(self, hyper):
        return _effective(self.base, hyper)

    def valid(self, omega):
        k = self.k
        if not np.all(np.isfinite(omega)):
            return False
        if not (0 < omega[k] < 1 and 0 < omega[k + 1] < 1):
            return False
        if self.p_phi and np.any(omega[k + 2 :] <= 0):
            return False
        return bool(self.base.mean_ok(omega[:k]))

    def loglik(self, omega):
        hy = self.hyper(omega)
        inc, path = _loglik_stats(self.frame(hy), self.hv, self.n, hy, self.skip, self._warm)
        if not self.base.has_closed_form:
            # successive optimiser points are close; reuse the path as a start
            self._warm = path.theta
        return float(inc.sum())

    def scores(self, omega):
        hy = self.hyper(omega)
        return _score_stats(self.frame(hy), self.hv, self.n, hy, self.skip)

    def grad(self, omega):
        return self.scores(omega).sum(axis=0)

    # transformed coordinates for the free parameters: logit for alpha and
    # lambda, log for phi, identity for the anchor
    def to_free(self, omega, free):
        z = omega.copy()
        k = self.k
        z[k : k + 2] = logit(omega[k : k + 2])
        if self.p_phi:
            z[k + 2 :] = np.log(omega[k + 2 :])
        return z[free]

    def from_free(self, z, free, fixed):
        omega = fixed.copy()
        full = self.to_free(fixed, np.arange(self.dim))
        full[free] = z
        k = self.k
        omega[:k] = full[:k]
        omega[k : k + 2] = expit(full[k : k + 2])
        if self.p_phi:
            omega[k + 2 :] = np.exp(full[k + 2 :])
        return omega


def numerical_hessian(grad, omega, rows=None, valid=None):
    """Central differences of ``grad`` with step 1e-5 (1 + |omega_i|).

    ``valid(omega)`` lets the step shrink near the edge of the parameter
    space. Returns the raw (unsymmetrised) matrix ``d grad_rows / d omega``.
    """
    omega = np.asarray(omega, dtype=float)
    cols = []
    for i in range(len(omega)):
        step = 1e-5 * (1 + abs(omega[i]))
        if valid is not None:
            for _ in range(60):
                up, dn = omega.copy(), omega.copy()
                up[i] += step
                dn[i] -= step
                if valid(up) and valid(dn):
                    break
                step *= 0.5
        up, dn = omega.copy(), omega.copy()
        up[i] += step
        dn[i] -= step
        cols.append((grad(up) - grad(dn)) / (2 * step))
    H = np.array(cols).T
    return H if rows is None else H[rows]


def _asymmetry(H):
    scale = max(np.max(np.abs(H)), 1e-300)
    return float(np.max(np.abs(H - H.T)) / scale)


def _optimise(prob, omega0, free, opts):
    """Nelder-Mead from the deterministic (alpha, lambda) starts, best of all runs."""
    k = prob.k
    best = None
    nit = nfev = 0

    def objective(z):
        omega = prob.from_free(z, free, omega0)
        if not prob.valid(omega):
            return np.inf
        try:
            val = -prob.loglik(omega)
        except (DomainError, ConvergenceError, FloatingPointError):
            return np.inf
        return val if np.isfinite(val) else np.inf

    maxiter = opts.maxiter or 1000 * len(free)
    for a0, l0 in opts.starts:
        start = omega0.copy()
        start[k], start[k + 1] = a0, l0
        z0 = prob.to_free(start, free)
        if not np.isfinite(objective(z0)):
            continue
        res = optimize.minimize(
            objective,
            z0,
            method="Nelder-Mead",
            options={"xatol": opts.xatol, "fatol": opts.fatol, "maxiter": maxiter, "maxfev": 2 * maxiter},
        )
        nit += res.nit
        nfev += res.nfev
        if best is None or res.fun < best.fun:
            best = res
    if best is None or not np.isfinite(best.fun):
        raise ConvergenceError("no start gave a finite quasi-likelihood", nit, np.inf)
    return prob.from_free(best.x, free, omega0), best, nit, nfev


def _polish(prob, omega, free, steps=5):
    """Newton steps on the free block with the exact score and a numerical Hessian."""
    ll = prob.loglik(omega)
    for _ in range(steps):
        g = prob.grad(omega)[free]
        H = numerical_hessian(lambda w: prob.grad(w)[free], omega, valid=prob.valid)[:, free]
        H = 0.5 * (H + H.T)
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            break
        moved = False
        scale = 1.0
        for _ in range(8):
            cand = omega.copy()
            cand[free] -= scale * step
            if prob.valid(cand):
                try:
                    lc = prob.loglik(cand)
                except (DomainError, ConvergenceError):
                    lc = -np.inf
                if lc >= ll:
                    omega, ll, moved = cand, lc, True
                    break
            scale *= 0.5
        if not moved:
            break
    return omega, ll


def _flags(prob, omega, cov, H_free, free):
    k = prob.k
    a, lam = omega[k], omega[k + 1]
    pinned = not (1e-3 < a < 1 - 1e-3 and 1e-3 < lam < 1 - 1e-3)
    se = np.sqrt(np.abs(np.diag(cov)))
    ridge = not np.all(np.isfinite(cov)) or se[k] > 0.25 or se[k + 1] > 0.25
    try:
        ridge = ridge or np.max(np.linalg.eigvalsh(H_free)) >= 0
    except np.linalg.LinAlgError:
        ridge = True
    return pinned, bool(ridge)


def _fit(frame, y, init, n_seq, opts, method):
    opts = opts or FitOptions()
    prob = _Problem(frame, y, n_seq, opts.skip)
    if prob.T < 10:
        raise DomainError("estimation needs at least 10 observations")
    k = prob.k
    omega0 = np.empty(prob.dim)
    if method == "two_step":
        # step 1: method of moments for the anchor
        omega0[:k] = prob.hv.sum(axis=0) / prob.n.sum()
        free = np.arange(k, prob.dim)
    else:
        omega0[:k] = prob.hv.sum(axis=0) / prob.n.sum() if init is None else init.eh1
        free = np.arange(prob.dim)
    if not prob.base.mean_ok(omega0[:k]):
        omega0[:k] = prob.base.project(omega0[:k], 1e-6)
    omega0[k : k + 2] = 0.5
    if prob.p_phi:
        phi0 = prob.base.phi if (init is None or init.phi is None) else init.phi
        omega0[k + 2 :] = phi0

    omega, best, nit, nfev = _optimise(prob, omega0, free, opts)
    if opts.polish:
        omega, ll = _polish(prob, omega, free)
    else:
        ll = prob.loglik(omega)

    S = prob.scores(omega)
    g = S.sum(axis=0)
    score_norm = float(np.max(np.abs(g[free])))
    H = numerical_hessian(prob.grad, omega, valid=prob.valid)
    H_free = H[np.ix_(free, free)]
    asym = _asymmetry(H_free)
    if method == "mle":
        Hs = 0.5 * (H + H.T)
        Hinv = np.linalg.pinv(Hs)
        cov = Hinv @ (S.T @ S) @ Hinv
    else:
        # stacked moments: anchor moment h_t - n_t E[h], then the free scores
        G = np.concatenate([prob.hv - prob.n[:, None] * omega[:k], S[:, free]], axis=1)
        J = np.zeros((prob.dim, prob.dim))
        J[:k, :k] = -np.eye(k) * prob.n.sum()
        Hrows = H[free]
        Hrows[:, free] = 0.5 * (H_free + H_free.T)
        J[k:] = Hrows
        V = prob.T * long_run_variance(G, opts.bandwidth)
        Jinv = np.linalg.pinv(J)
        cov = Jinv @ V @ Jinv.T
    cov = 0.5 * (cov + cov.T)
    pinned, ridge = _flags(prob, omega, cov, 0.5 * (H_free + H_free.T), free)
    converged = bool(score_norm <= 1e-5 * (1 + abs(ll)))
    msg = "" if converged else f"score norm {score_norm:.3g} above tolerance; best point reported"
    return FitResult(
        omega_hat=prob.hyper(omega),
        cov=cov,
        loglik=ll,
        score_norm=score_norm,
        iterations=int(nit),
        method=method,
        labels=prob.labels,
        converged=converged,
        boundary_pinned=pinned,
        flat_ridge=ridge,
        hessian_asymmetry=asym,
        message=msg,
        nfev=int(nfev),
    )


def fit_mle(frame, y, init=None, n_seq=None, opts=None):
    """Maximise the quasi-likelihood over all of omega.

    The covariance is the sandwich ``H^{-1} (sum s_t s_t') H^{-1}``.
    """
    return _fit(frame, y, init, n_seq, opts, "mle")


def fit_two_step(frame, y, init=None, n_seq=None, opts=None):
    """Sample mean of h for the anchor, then maximise over (alpha, lambda, phi).

    ``init`` only supplies a start for phi. The covariance is the method of
    moments sandwich ``J^{-1} V J^{-T}``, V being T times the long-run variance
    of the stacked moment increments.
    """
    return _fit(frame, y, init, n_seq, opts, "two_step")


# -- likelihood surface ------------------------------------------------------------------


@dataclass
class GridSurface:
    alphas: np.ndarray
    lambdas: np.ndarray
    loglik: np.ndarray  # (len(alphas), len(lambdas))
    level: float
    l_max: float

    @property
    def in_ci99(self):
        return self.loglik >= self.level

    def rows(self):
        """(alpha, lambda, loglik, in_ci99) with alpha varying slowest."""
        A, L = np.meshgrid(self.alphas, self.lambdas, indexing="ij")
        return np.column_stack([A.ravel(), L.ravel(), self.loglik.ravel(), self.in_ci99.ravel()])


def grid_axis(count):
    """Cell midpoints of (0, 1)."""
    return (np.arange(count) + 0.5) / count


def loglik_grid(frame, y, hyper, alphas, lambdas, l_max=None, skip=0):
    """Quasi log-likelihood over an (alpha, lambda) grid at fixed anchor and phi.

    Cells with ``l >= l_max - chi2_{0.99}(2) / 2`` form the 99% region; ``l_max``
    defaults to the grid maximum (pass the fitted value when available).
    """
    frame_eff, hv, n = _prepare(frame, y, hyper)
    alphas = np.asarray(alphas, dtype=float)
    lambdas = np.asarray(lambdas, dtype=float)
    out = np.empty((len(alphas), len(lambdas)))
    for i, a in enumerate(alphas):
        for j, lam in enumerate(lambdas):
            hy = hyper.replace(alpha=a, lam=lam)
            try:
                inc, _ = _loglik_stats(frame_eff, hv, n, hy, skip)
                out[i, j] = inc.sum()
            except (DomainError, ConvergenceError):
                out[i, j] = -np.inf
    top = np.max(out) if l_max is None else max(l_max, np.max(out))
    return GridSurface(alphas, lambdas, out, top - 0.5 * CHI2_99_2, top)


def profile_interval(frame, y, hyper, param="lambda", level=0.99, grid=None, skip=0):
    """Profile-likelihood interval for alpha or lambda at fixed anchor and phi.

    The other of the two is maximised out at every grid point. Returns
    ``(low, high, profile_values, grid)``; edges are linearly interpolated
    between grid points.
    """
    if param not in ("alpha", "lambda"):
        raise DomainError("param must be 'alpha' or 'lambda'")
    frame_eff, hv, n = _prepare(frame, y, hyper)
    grid = np.linspace(0.01, 0.99, 50) if grid is None else np.asarray(grid, dtype=float)

    def ll(a, lam):
        try:
            inc, _ = _loglik_stats(frame_eff, hv, n, hyper.replace(alpha=a, lam=lam), skip)
            return float(inc.sum())
        except (DomainError, ConvergenceError):
            return -np.inf

    prof = np.empty(len(grid))
    for i, v in enumerate(grid):
        if param == "lambda":
            f = lambda z: -ll(expit(z), v)
        else:
            f = lambda z: -ll(v, expit(z))
        res = optimize.minimize_scalar(f, bounds=(-9.0, 9.0), method="bounded", options={"xatol": 1e-6})
        prof[i] = -res.fun
    top = np.max(prof)
    cut = top - 0.5 * stats.chi2.ppf(level, 1)
    inside = np.flatnonzero(prof >= cut)
    lo_i, hi_i = inside[0], inside[-1]

    def edge(i, j):
        # crossing of the cut between grid[i] (inside) and grid[j] (outside)
        if j < 0 or j >= len(grid):
            return grid[i]
        w = (prof[i] - cut) / (prof[i] - prof[j])
        return grid[i] + w * (grid[j] - grid[i])

    return edge(lo_i, lo_i - 1), edge(hi_i, hi_i + 1), prof, grid
