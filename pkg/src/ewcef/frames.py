"""Canonical exponential family frames.

A frame is the working density ``exp{theta' h(y) - psi(theta)} / b(y)``; ``b``
is never evaluated. Every frame method is vectorised over leading axes: a
natural parameter array has shape ``(..., k)``, ``psi`` returns ``(...)``,
``grad`` returns ``(..., k)`` and ``hess`` returns ``(..., k, k)``.

The ten families are

=====================  ===============  ==========================
name                   h(y)             constants
=====================  ===============  ==========================
bernoulli              y
gaussian_known_sd      y                sigma
poisson                y
exponential            y
gaussian_zero_mean     y^2
pareto                 log y            m (lower bound)
beta                   log y, log(1-y)
dirichlet              log y_1..log y_d d
gaussian               y, y^2
von_mises              sin y, cos y
=====================  ===============  ==========================

Note on the Dirichlet gradient: the last component is
``digamma(theta_d) - digamma(theta_1 + ... + theta_d)``, the same pattern as the
others. A printed form ``digamma(theta_d) - digamma(theta_1 + theta_d)`` that
circulates for this family is a typo.

The ``gaussian_known_sd`` frame uses the natural parameter ``theta = mean /
sigma^2`` so that ``psi'' = sigma^2`` is the variance of ``y``.
"""
import math

import numpy as np
from scipy import special as sc

from . import special
from .errors import ConvergenceError, DomainError

__all__ = [
    "Frame",
    "make_frame",
    "FAMILIES",
    "h",
    "psi",
    "psi_prime",
    "psi_hess",
    "inverse_link",
    "newton_inverse",
    "mean_domain_project",
    "pareto_mean",
]

SIMPLEX_TOL = 1e-9


def _vec(a, k):
    a = np.asarray(a, dtype=float)
    if a.ndim == 0:
        a = a[None]
    if a.shape[-1] != k:
        raise DomainError(f"expected trailing dimension {k}, got shape {a.shape}")
    return a


class Frame:
    """Base class; subclasses fill in the family specific pieces."""

    name = None
    dim = 1
    obs_ndim = 0
    phi_names = ()
    has_closed_form = True

    # -- identity -----------------------------------------------------------
    def constants(self):
        return {}

    def _key(self):
        return (self.name,) + tuple(sorted(self.constants().items()))

    def __eq__(self, other):
        return isinstance(other, Frame) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.constants().items())
        return f"{type(self).__name__}({args})"

    # -- static parameters ---------------------------------------------------
    @property
    def phi(self):
        return np.array([self.constants()[n] for n in self.phi_names], dtype=float)

    def with_phi(self, phi):
        if not self.phi_names:
            if phi is not None and np.size(phi):
                raise DomainError(f"{self.name} has no static parameters")
            return self
        consts = self.constants()
        for name, value in zip(self.phi_names, np.atleast_1d(phi)):
            consts[name] = float(value)
        return type(self)(**consts)

    def log_base_phi(self, hvals, n):
        """Part of ``-log b(y)`` that depends on static parameters."""
        return np.zeros(np.shape(hvals)[:-1])

    def phi_score(self, hvals, mbar, n):
        """d(increment)/d(phi) holding the unit mean ``mbar`` fixed."""
        return np.zeros(np.shape(hvals)[:-1] + (len(self.phi_names),))

    # -- observations ----------------------------------------------------------
    def check_support(self, y, n):
        return np.all(np.isfinite(y))

    def _h(self, y):
        return np.asarray(y, dtype=float)[..., None]

    def h(self, y, n=1.0):
        y = np.asarray(y, dtype=float)
        n = np.asarray(n, dtype=float)
        if self.obs_ndim == 0 and n.ndim:
            n = n.reshape(n.shape + (1,) * (y.ndim - n.ndim))
        if not self.check_support(y, n):
            raise DomainError(f"observation outside the support of the {self.name} frame")
        return self._h(y)

    # -- domains ----------------------------------------------------------------
    def natural_ok(self, theta):
        return np.all(np.isfinite(theta), axis=-1)

    def mean_ok(self, mu):
        return np.all(np.isfinite(mu), axis=-1)

    def project(self, mu, eps):
        return np.array(mu, dtype=float)

    # -- cumulant function --------------------------------------------------------
    def psi(self, theta):
        raise NotImplementedError

    def grad(self, theta):
        raise NotImplementedError

    def hess(self, theta):
        g = self._hess_diag(theta)
        return g[..., None]

    def closed_inverse(self, mu):
        raise NotImplementedError

    def newton_step(self, theta, resid):
        """Solve ``psi''(theta) step = resid`` row-wise."""
        return np.linalg.solve(self.hess(theta), resid[..., None])[..., 0]

    def default_start(self, mu):
        return np.ones_like(mu)

    def moment_start(self, mu):
        """Cheap approximate inverse used to warm start Newton iterations."""
        return self.default_start(mu)

    # -- simulation -----------------------------------------------------------------
    def sample(self, theta, rng):
        raise NotImplementedError

    def summary(self, theta):
        """Plot-ready functionals of the natural parameter, keyed by column name."""
        return {"cond_mean": self.grad(theta)[..., 0]}


class Bernoulli(Frame):
    name = "bernoulli"

    def check_support(self, y, n):
        return np.all(np.isfinite(y)) and np.all((y >= 0) & (y <= n))

    def mean_ok(self, mu):
        return (mu[..., 0] > 0) & (mu[..., 0] < 1)

    def project(self, mu, eps):
        return np.clip(mu, eps, 1 - eps)

    def psi(self, theta):
        return np.logaddexp(0.0, theta[..., 0])

    def grad(self, theta):
        return sc.expit(theta)

    def _hess_diag(self, theta):
        p = sc.expit(theta[..., 0])
        return (p * (1 - p))[..., None]

    def closed_inverse(self, mu):
        return sc.logit(mu)

    def sample(self, theta, rng):
        return float(rng.random() < sc.expit(theta[0]))


class GaussianKnownSD(Frame):
    name = "gaussian_known_sd"
    phi_names = ("sigma",)

    def __init__(self, sigma=1.0):
        if not sigma > 0:
            raise DomainError("sigma must be positive")
        self.sigma = float(sigma)

    def constants(self):
        return {"sigma": self.sigma}

    def log_base_phi(self, hvals, n):
        return -math.log(self.sigma) - hvals[..., 0] ** 2 / (2 * n * self.sigma**2)

    def phi_score(self, hvals, mbar, n):
        s = self.sigma
        resid = hvals[..., 0] - n * mbar[..., 0]
        return (resid**2 / (n * s**3) - 1 / s)[..., None]

    def psi(self, theta):
        return 0.5 * self.sigma**2 * theta[..., 0] ** 2

    def grad(self, theta):
        return self.sigma**2 * np.asarray(theta, dtype=float)

    def _hess_diag(self, theta):
        return np.full(np.shape(theta), self.sigma**2)

    def closed_inverse(self, mu):
        return np.asarray(mu, dtype=float) / self.sigma**2

    def sample(self, theta, rng):
        return float(rng.normal(self.sigma**2 * theta[0], self.sigma))


class Poisson(Frame):
    name = "poisson"

    def check_support(self, y, n):
        return np.all(np.isfinite(y)) and np.all(y >= 0)

    def mean_ok(self, mu):
        return mu[..., 0] > 0

    def project(self, mu, eps):
        return np.maximum(mu, eps)

    def psi(self, theta):
        return np.exp(theta[..., 0])

    def grad(self, theta):
        return np.exp(theta)

    def _hess_diag(self, theta):
        return np.exp(theta)

    def closed_inverse(self, mu):
        return np.log(mu)

    def sample(self, theta, rng):
        return float(rng.poisson(math.exp(theta[0])))


class _NegativeScalar(Frame):
    """Shared pieces of the families with natural domain theta < 0."""

    def natural_ok(self, theta):
        return theta[..., 0] < 0

    def mean_ok(self, mu):
        return mu[..., 0] > 0

    def project(self, mu, eps):
        return np.maximum(mu, eps)


class Exponential(_NegativeScalar):
    name = "exponential"

    def check_support(self, y, n):
        return np.all(np.isfinite(y)) and np.all(y > 0)

    def psi(self, theta):
        return -np.log(-theta[..., 0])

    def grad(self, theta):
        return -1.0 / np.asarray(theta, dtype=float)

    def _hess_diag(self, theta):
        return 1.0 / np.asarray(theta, dtype=float) ** 2

    def closed_inverse(self, mu):
        return -1.0 / np.asarray(mu, dtype=float)

    def sample(self, theta, rng):
        return float(rng.exponential(-1.0 / theta[0]))


class GaussianZeroMean(_NegativeScalar):
    name = "gaussian_zero_mean"

    def _h(self, y):
        return np.asarray(y, dtype=float)[..., None] ** 2

    def psi(self, theta):
        return -0.5 * np.log(-2 * theta[..., 0])

    def grad(self, theta):
        return -0.5 / np.asarray(theta, dtype=float)

    def _hess_diag(self, theta):
        return 0.5 / np.asarray(theta, dtype=float) ** 2

    def closed_inverse(self, mu):
        return -0.5 / np.asarray(mu, dtype=float)

    def sample(self, theta, rng):
        return float(rng.normal(0.0, math.sqrt(-0.5 / theta[0])))

    def summary(self, theta):
        var = self.grad(theta)[..., 0]
        return {"cond_var": var, "cond_sd": np.sqrt(var)}


def pareto_mean(theta, m=1.0):
    """Mean of the Pareto frame: ``m theta / (theta + 1)`` if theta < -1, else inf."""
    theta = np.asarray(theta, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(theta < -1, m * theta / (theta + 1), np.inf)


class Pareto(_NegativeScalar):
    name = "pareto"

    def __init__(self, m=1.0):
        if not m > 0:
            raise DomainError("Pareto lower bound m must be positive")
        self.m = float(m)
        self.log_m = math.log(self.m)

    def constants(self):
        return {"m": self.m}

    def check_support(self, y, n):
        return np.all(np.isfinite(y)) and np.all(y >= self.m)

    def _h(self, y):
        return np.log(np.asarray(y, dtype=float))[..., None]

    def mean_ok(self, mu):
        return mu[..., 0] > self.log_m

    def project(self, mu, eps):
        return np.maximum(mu, self.log_m + eps)

    def psi(self, theta):
        t = theta[..., 0]
        return -np.log(-t) + t * self.log_m

    def grad(self, theta):
        return -1.0 / np.asarray(theta, dtype=float) + self.log_m

    def _hess_diag(self, theta):
        return 1.0 / np.asarray(theta, dtype=float) ** 2

    def closed_inverse(self, mu):
        return -1.0 / (np.asarray(mu, dtype=float) - self.log_m)

    def sample(self, theta, rng):
        return float(self.m * (1.0 - rng.random()) ** (1.0 / theta[0]))

    def summary(self, theta):
        return {"cond_mean": pareto_mean(theta[..., 0], self.m)}


class Dirichlet(Frame):
    """Dirichlet frame on the simplex; ``Beta`` is the d = 2 case on (0, 1)."""

    name = "dirichlet"
    obs_ndim = 1
    has_closed_form = False

    def __init__(self, d=3):
        d = int(d)
        if d < 2:
            raise DomainError("Dirichlet needs d >= 2")
        self.d = d
        self.dim = d

    def constants(self):
        return {"d": self.d}

    def check_support(self, y, n):
        if y.shape[-1:] != (self.d,):
            return False
        return (
            np.all(np.isfinite(y))
            and np.all(y > 0)
            and np.all(np.abs(y.sum(axis=-1) - 1) <= SIMPLEX_TOL)
        )

    def _h(self, y):
        return np.log(y)

    def natural_ok(self, theta):
        return np.all(theta > 0, axis=-1)

    def mean_ok(self, mu):
        return np.all(mu < 0, axis=-1) & (np.sum(np.exp(mu), axis=-1) < 1)

    def project(self, mu, eps):
        mu = np.array(mu, dtype=float)
        total = np.sum(np.exp(mu), axis=-1, keepdims=True)
        limit = 1 - eps
        shift = np.where(total > limit, np.log(limit / total), 0.0)
        return mu + shift

    def psi(self, theta):
        return special.log_beta(theta)

    def grad(self, theta):
        return sc.psi(theta) - sc.psi(np.sum(theta, axis=-1, keepdims=True))

    def hess(self, theta):
        tri = special.trigamma_unchecked(theta)
        tot = special.trigamma_unchecked(np.sum(theta, axis=-1))
        out = -np.broadcast_to(tot[..., None, None], theta.shape + (self.dim,)).copy()
        idx = np.arange(self.dim)
        out[..., idx, idx] += tri
        return out

    def newton_step(self, theta, resid):
        # psi'' = diag(trigamma(theta)) - trigamma(sum) 11': Sherman-Morrison
        dinv = 1.0 / special.trigamma_unchecked(theta)
        c = special.trigamma_unchecked(np.sum(theta, axis=-1))[..., None]
        a = dinv * resid
        denom = 1.0 - c * np.sum(dinv, axis=-1, keepdims=True)
        return a + dinv * (c * np.sum(a, axis=-1, keepdims=True) / denom)

    def moment_start(self, mu):
        # digamma(x) ~ log(x - 1/2) turns psi'(theta) = mu into a linear system
        p = np.exp(mu)
        sp = np.sum(p, axis=-1, keepdims=True)
        total = (self.dim - sp) / (2 * (1 - sp))
        return 0.5 + p * (total - 0.5)

    def sample(self, theta, rng):
        y = rng.dirichlet(theta)
        if np.any(y <= 0):
            y = np.maximum(y, np.finfo(float).tiny)
            y /= y.sum()
        return y

    def summary(self, theta):
        ratio = theta / np.sum(theta, axis=-1, keepdims=True)
        return {f"ratio_{i + 1}": ratio[..., i] for i in range(self.dim)}


class Beta(Dirichlet):
    name = "beta"
    obs_ndim = 0

    def __init__(self):
        super().__init__(d=2)

    def constants(self):
        return {}

    def check_support(self, y, n):
        return np.all(np.isfinite(y)) and np.all((y > 0) & (y < 1))

    def _h(self, y):
        y = np.asarray(y, dtype=float)
        return np.stack([np.log(y), np.log1p(-y)], axis=-1)

    def sample(self, theta, rng):
        y = rng.beta(theta[0], theta[1])
        return float(min(max(y, np.finfo(float).tiny), 1 - np.finfo(float).epsneg))

    def summary(self, theta):
        return {"cond_mean": theta[..., 0] / (theta[..., 0] + theta[..., 1])}


class Gaussian(Frame):
    name = "gaussian"
    dim = 2

    def _h(self, y):
        y = np.asarray(y, dtype=float)
        return np.stack([y, y * y], axis=-1)

    def natural_ok(self, theta):
        return np.isfinite(theta[..., 0]) & (theta[..., 1] < 0)

    def mean_ok(self, mu):
        return np.isfinite(mu[..., 0]) & (mu[..., 1] - mu[..., 0] ** 2 > 0)

    def project(self, mu, eps):
        mu = np.array(mu, dtype=float)
        mu[..., 1] = np.maximum(mu[..., 1], mu[..., 0] ** 2 + eps)
        return mu

    def psi(self, theta):
        t1, t2 = theta[..., 0], theta[..., 1]
        return -(t1**2) / (4 * t2) - 0.5 * np.log(-2 * t2)

    def grad(self, theta):
        t1, t2 = theta[..., 0], theta[..., 1]
        return np.stack([-t1 / (2 * t2), t1**2 / (4 * t2**2) - 1 / (2 * t2)], axis=-1)

    def hess(self, theta):
        t1, t2 = theta[..., 0], theta[..., 1]
        a = -1 / (2 * t2)
        b = t1 / (2 * t2**2)
        c = -(t1**2) / (2 * t2**3) + 1 / (2 * t2**2)
        return np.stack([np.stack([a, b], -1), np.stack([b, c], -1)], -2)

    def closed_inverse(self, mu):
        mu = np.asarray(mu, dtype=float)
        var = mu[..., 1] - mu[..., 0] ** 2
        return np.stack([mu[..., 0] / var, -0.5 / var], axis=-1)

    def sample(self, theta, rng):
        mean = -theta[0] / (2 * theta[1])
        return float(rng.normal(mean, math.sqrt(-0.5 / theta[1])))

    def summary(self, theta):
        t1, t2 = theta[..., 0], theta[..., 1]
        return {"cond_mean": -t1 / (2 * t2), "cond_sd": np.sqrt(-0.5 / t2)}


class VonMises(Frame):
    name = "von_mises"
    dim = 2
    has_closed_form = False
    _SERIES_R = 1e-2

    def _h(self, y):
        y = np.asarray(y, dtype=float)
        return np.stack([np.sin(y), np.cos(y)], axis=-1)

    def mean_ok(self, mu):
        return np.hypot(mu[..., 0], mu[..., 1]) < 1

    def project(self, mu, eps):
        mu = np.array(mu, dtype=float)
        r = np.hypot(mu[..., 0], mu[..., 1])[..., None]
        limit = 1 - eps
        return np.where(r > limit, mu * (limit / np.where(r > 0, r, 1.0)), mu)

    def _radial(self, theta):
        """Return r, A(r)/r and (A'(r) - A(r)/r)/r^2 with A = I1/I0."""
        r = np.hypot(theta[..., 0], theta[..., 1])
        small = r < self._SERIES_R
        rs = np.where(small, 1.0, r)
        a = special.bessel_ratio(rs)
        a_over_r = np.where(small, 0.5 - r**2 / 16 + r**4 / 96, a / rs)
        g_direct = (1 - 2 * a / rs - a * a) / rs**2
        g = np.where(small, -1 / 8 + r**2 / 24 - 11 * r**4 / 1024, g_direct)
        return r, a_over_r, g

    def psi(self, theta):
        r = np.hypot(theta[..., 0], theta[..., 1])
        return np.log(special.bessel_i_scaled(0, r)) + r

    def grad(self, theta):
        _, a_over_r, _ = self._radial(theta)
        return a_over_r[..., None] * theta

    def hess(self, theta):
        _, a_over_r, g = self._radial(theta)
        outer = theta[..., :, None] * theta[..., None, :]
        eye = np.eye(2)
        return a_over_r[..., None, None] * eye + g[..., None, None] * outer

    def default_start(self, mu):
        return np.full_like(mu, 1e-3)

    def moment_start(self, mu):
        rbar = np.minimum(np.hypot(mu[..., 0], mu[..., 1]), 1 - 1e-12)
        kappa = rbar * (2 - rbar**2) / (1 - rbar**2)
        scale = np.where(rbar > 0, kappa / np.where(rbar > 0, rbar, 1.0), 2.0)
        return mu * scale[..., None]

    def sample(self, theta, rng):
        kappa = math.hypot(theta[0], theta[1])
        y = rng.vonmises(math.atan2(theta[0], theta[1]), kappa)
        return float(y % (2 * math.pi))

    def summary(self, theta):
        direction = np.mod(np.arctan2(theta[..., 0], theta[..., 1]), 2 * np.pi)
        return {
            "mean_direction": direction,
            "concentration": np.hypot(theta[..., 0], theta[..., 1]),
        }


FAMILIES = {
    "bernoulli": Bernoulli,
    "gaussian_known_sd": GaussianKnownSD,
    "poisson": Poisson,
    "exponential": Exponential,
    "gaussian_zero_mean": GaussianZeroMean,
    "pareto": Pareto,
    "beta": Beta,
    "dirichlet": Dirichlet,
    "gaussian": Gaussian,
    "von_mises": VonMises,
}

_CONSTANTS = {"gaussian_known_sd": ("sigma",), "pareto": ("m",), "dirichlet": ("d",)}


def make_frame(name, **constants):
    """Build a frame from its textual family name, e.g. ``make_frame("pareto", m=1)``.

    Constants that the family does not take are ignored when ``None`` and
    rejected otherwise.
    """
    key = name.strip().lower().replace("-", "_")
    if key not in FAMILIES:
        raise DomainError(f"unknown frame {name!r}; choose from {sorted(FAMILIES)}")
    allowed = _CONSTANTS.get(key, ())
    given = {k: v for k, v in constants.items() if v is not None}
    extra = set(given) - set(allowed)
    if extra:
        raise DomainError(f"frame {key} does not take {sorted(extra)}")
    return FAMILIES[key](**given)


# -- module level operations -----------------------------------------------------


def h(frame, y, n=1.0):
    """Sufficient statistic of one observation (or an array of them)."""
    return frame.h(y, n)


def _theta(frame, theta):
    theta = _vec(theta, frame.dim)
    if not np.all(frame.natural_ok(theta)):
        raise DomainError(f"theta outside the natural domain of {frame.name}")
    return theta


def psi(frame, theta):
    return frame.psi(_theta(frame, theta))


def psi_prime(frame, theta):
    return frame.grad(_theta(frame, theta))


def psi_hess(frame, theta):
    return frame.hess(_theta(frame, theta))


def mean_domain_project(frame, mu, eps=1e-8):
    """Move ``mu`` to at least ``eps`` inside the mean domain; identity inside."""
    mu = _vec(mu, frame.dim)
    out = frame.project(mu, eps)
    return out


def _newton_row(frame, mu, theta, tol, max_iter, max_halvings):
    # single row version of the loop below, free of the batch bookkeeping
    fine = 4e-15 * (1 + np.max(np.abs(mu)))
    resid = frame.grad(theta) - mu
    res = np.max(np.abs(resid))
    it = 0
    while res > fine and it < max_iter:
        step = frame.newton_step(theta[None], resid[None])[0]
        scale, moved = 1.0, False
        for _ in range((max_halvings if res > tol else 0) + 1):
            cand = theta - scale * step
            if frame.natural_ok(cand):
                rc = frame.grad(cand) - mu
                rn = np.max(np.abs(rc))
                if rn < res:
                    theta, resid, res, moved = cand, rc, rn, True
                    break
            scale *= 0.5
        if not moved:
            break
        it += 1
    return theta, it, res


def newton_inverse(frame, mu, start=None, tol=1e-10, max_iter=200, max_halvings=30):
    """Solve ``psi'(theta) = mu`` row-wise by safeguarded Newton-Raphson.

    ``mu`` has shape ``(N, k)``. A step is halved while the candidate leaves the
    natural domain or fails to reduce the residual. Rows stop once the
    residual reaches rounding level or a full step no longer helps after the
    tolerance is met. Returns ``(theta, iterations, residual)``.
    """
    mu = np.asarray(mu, dtype=float)
    theta = np.array(
        np.broadcast_to(frame.default_start(mu) if start is None else start, mu.shape),
        dtype=float,
    )
    if not np.all(frame.natural_ok(theta)):
        raise DomainError("Newton start outside the natural domain")
    if len(mu) == 1:
        th, it, r = _newton_row(frame, mu[0], theta[0], tol, max_iter, max_halvings)
        theta, iters, res = th[None], np.array([it]), np.array([r])
        if r > tol:
            raise ConvergenceError(
                f"{frame.name} link inversion did not converge: residual {r:.3g} "
                f"after {it} iterations",
                iterations=it,
                residual=float(r),
            )
        return theta, iters, res
    fine = 4e-15 * (1 + np.max(np.abs(mu), axis=-1))
    resid = frame.grad(theta) - mu
    res = np.max(np.abs(resid), axis=-1)
    iters = np.zeros(len(mu), dtype=int)
    active = res > fine
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        step = frame.newton_step(theta[idx], resid[idx])
        pending = np.ones(idx.size, dtype=bool)
        # after the tolerance is met only a full step is tried
        pending_halvings = np.where(res[idx] <= tol, 0, max_halvings)
        scale = 1.0
        for attempt in range(max_halvings + 1):
            sub = np.flatnonzero(pending & (attempt <= pending_halvings))
            if sub.size == 0:
                break
            rows = idx[sub]
            cand = theta[rows] - scale * step[sub]
            ok = frame.natural_ok(cand)
            if np.any(ok):
                good = sub[ok]
                rc = frame.grad(cand[ok]) - mu[idx[good]]
                rn = np.max(np.abs(rc), axis=-1)
                better = rn < res[idx[good]]
                take = good[better]
                if take.size:
                    r_rows = idx[take]
                    theta[r_rows] = cand[ok][better]
                    resid[r_rows] = rc[better]
                    res[r_rows] = rn[better]
                    iters[r_rows] += 1
                    pending[take] = False
            scale *= 0.5
        # rows with no acceptable step have stalled
        active[idx[pending]] = False
        active &= res > fine
    bad = res > tol
    if np.any(bad):
        worst = int(np.argmax(res))
        raise ConvergenceError(
            f"{frame.name} link inversion did not converge: residual {res[worst]:.3g} "
            f"after {iters[worst]} iterations",
            iterations=int(iters[worst]),
            residual=float(res[worst]),
        )
    return theta, iters, res


def inverse_link(frame, mu, start=None, tol=1e-10, return_info=False):
    """theta with ``psi'(theta) = mu``.

    Closed forms are used where they exist; the beta, Dirichlet and von Mises
    frames use :func:`newton_inverse` started from ``start`` (all ones for
    beta/Dirichlet, (1e-3, 1e-3) for von Mises when not given).
    """
    mu = _vec(mu, frame.dim)
    single = mu.ndim == 1
    mu2 = mu.reshape(-1, frame.dim)
    if not np.all(frame.mean_ok(mu2)):
        raise DomainError(f"mean outside the mean domain of {frame.name}")
    if frame.has_closed_form:
        theta = frame.closed_inverse(mu2)
        iters = np.zeros(len(mu2), dtype=int)
        res = np.max(np.abs(frame.grad(theta) - mu2), axis=-1)
    else:
        st = None if start is None else np.broadcast_to(start, mu.shape).reshape(-1, frame.dim)
        theta, iters, res = newton_inverse(frame, mu2, st, tol=tol)
    theta = theta.reshape(mu.shape)
    if return_info:
        return theta, {"iterations": iters, "residual": res}
    return theta
