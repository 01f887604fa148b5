"""Model based data generating process and per-family samplers.

Each path owns one ``numpy.random.Generator`` (PCG64). Replicate paths get
independent streams from :func:`spawn_seeds`, which splits a root seed with
``numpy.random.SeedSequence``.
"""
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .estimands import PROJECT_EPS, Hyper
from .frames import inverse_link

__all__ = [
    "make_rng",
    "spawn_seeds",
    "sample",
    "sample_many",
    "centering",
    "SimConfig",
    "SimResult",
    "simulate_dgp",
]

# Anchors used for the simulation figures: E[h(Y_1)] for the stable DGPs.
HOUSEHOLD_CENTER = np.array([-1.76, -1.41, -1.78, -1.77, -2.73, -2.23, -3.53])


def centering(frame):
    """Default natural parameter theta_0 for a frame (its simulation centre)."""
    table = {
        "bernoulli": [0.0],
        "gaussian_known_sd": [0.0],
        "poisson": [0.0],
        "exponential": [-1.0],
        "gaussian_zero_mean": [-0.5],
        "pareto": [-3.0],
        "beta": [2.0, 5.0],
        "gaussian": [0.0, -0.5],
        "von_mises": [0.0, -2.0],
    }
    if frame.name == "dirichlet":
        if frame.dim == 7:
            return inverse_link(frame, HOUSEHOLD_CENTER)
        return np.ones(frame.dim)
    return np.array(table[frame.name], dtype=float)


def make_rng(seed):
    return np.random.Generator(np.random.PCG64(seed))


def spawn_seeds(seed, count):
    """``count`` independent 64-bit seeds derived from ``seed``."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]


def sample(frame, theta, rng):
    """One draw from the frame at natural parameter ``theta``."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.shape != (frame.dim,) or not frame.natural_ok(theta):
        raise DomainError(f"theta {theta} outside the natural domain of {frame.name}")
    return frame.sample(theta, rng)


def sample_many(frame, theta, size, rng):
    """``size`` i.i.d. draws at a fixed ``theta``, stacked on the first axis."""
    return np.array([sample(frame, theta, rng) for _ in range(size)])


@dataclass
class SimConfig:
    frame: object
    hyper: Hyper
    T: int
    seed: int = 0
    burn_in: int = 4

    def __post_init__(self):
        if int(self.T) < 1:
            raise DomainError("T must be at least 1")
        if self.burn_in < 0:
            raise DomainError("burn_in must be nonnegative")
        self.T = int(self.T)


@dataclass
class SimResult:
    """Observations and one-step predictors for t = 1..T.

    Every row is kept; ``burn_in`` only tells plotting code where to start.
    """

    y: np.ndarray
    hvals: np.ndarray
    theta_pred: np.ndarray
    mu_pred: np.ndarray
    mbar_pred: np.ndarray
    burn_in: int = 4

    def __len__(self):
        return len(self.y)


def simulate_dgp(cfg):
    """Alternate predict, draw and update for t = 1..T.

    ``theta_{t|t-1}`` is the exponentially weighted one-step predictor built
    from the simulated past, with ``theta_{1|0} = psi'^{-1}(E[h(Y_1)])``.
    The per-period scale is fixed at n_t = 1.
    """
    frame, hyper, T = cfg.frame, cfg.hyper, cfg.T
    if hyper.n_seq is not None and not np.all(hyper.n_seq == 1):
        raise DomainError("the simulation DGP uses n_t = 1")
    if hyper.eh1.ndim != 1 or hyper.eh1.shape[0] != frame.dim:
        raise DomainError("anchor must be a single vector of the frame dimension")
    rng = make_rng(cfg.seed)
    a, lam = hyper.alpha, hyper.lam
    e = hyper.eh1
    k = frame.dim
    ys, hv = [], np.empty((T, k))
    theta = np.empty((T, k))
    mbar = np.empty((T, k))
    n_lam, x_lam, h_lam = 0.0, np.zeros(k), np.zeros(k)
    prev = None
    for i in range(T):
        # one-step predictor from sums at t-1 plus the anchor at t
        x_t = e + lam * x_lam
        n_t = 1.0 + lam * n_lam
        m = (1 - a) * x_t + a * lam * h_lam
        nn = (1 - a) * n_t + a * lam * n_lam
        mb = m / nn if nn > 0 else e
        mbar[i] = mb
        th = inverse_link(frame, frame.project(mb, PROJECT_EPS), start=prev)
        theta[i] = th
        prev = th
        y = sample(frame, th, rng)
        ys.append(y)
        hv[i] = frame.h(y)
        n_lam, x_lam, h_lam = n_t, x_t, hv[i] + lam * h_lam
    y = np.array(ys)
    return SimResult(
        y=y,
        hvals=hv,
        theta_pred=theta,
        mu_pred=frame.grad(theta),
        mbar_pred=mbar,
        burn_in=cfg.burn_in,
    )
