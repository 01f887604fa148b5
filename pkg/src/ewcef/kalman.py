"""Gaussian local level model and its link to the EWMA.

    y_t = mu_t + eps_t,   mu_{t+1} = mu_t + eta_t,   eta_t ~ N(0, q sigma_eps^2)

With the observation variance scaled to one the Kalman recursions are
``K_t = P_t / (P_t + 1)`` and ``P_{t+1} = K_t + q``. A diffuse start
(``P_1 = inf``) gives ``K_1 = 1``. In steady state ``K^2 + q K - q = 0`` and the
one-step predictor is an EWMA with discount ``lambda = 1 - K``.
"""
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = [
    "DEFAULT_Q_GRID",
    "LocalLevelConfig",
    "kalman_gains",
    "steady_state_gain",
    "steady_state_lambda",
    "gain_weight_product",
    "kalman_predict",
    "product_table",
]

DEFAULT_Q_GRID = (0.001, 0.1, 0.3, 1.0, 2.0, 10.0)


@dataclass
class LocalLevelConfig:
    q: float
    T: int
    P1: float = math.inf

    def __post_init__(self):
        if not self.q >= 0:
            raise DomainError("q must be nonnegative")
        if not self.P1 >= 0:
            raise DomainError("P1 must be nonnegative (inf for a diffuse start)")
        if int(self.T) < 1:
            raise DomainError("T must be at least 1")
        self.T = int(self.T)


def kalman_gains(cfg):
    """Gains ``K_t`` and variances ``P_t`` for t = 1..T (``P_1`` may be inf)."""
    K = np.empty(cfg.T)
    P = np.empty(cfg.T)
    p = cfg.P1
    for i in range(cfg.T):
        P[i] = p
        K[i] = 1.0 if math.isinf(p) else p / (p + 1.0)
        p = K[i] + cfg.q
    return K, P


def steady_state_gain(q):
    """Positive root of ``K^2 + q K - q = 0``."""
    if q < 0:
        raise DomainError("q must be nonnegative")
    # 2q / (q + sqrt(q^2 + 4q)) avoids cancellation for small q
    return 0.0 if q == 0 else 2.0 * q / (q + math.sqrt(q * q + 4.0 * q))


def steady_state_lambda(q):
    """EWMA discount matching the steady-state Kalman gain, ``1 - K``."""
    if q < 0:
        raise DomainError("q must be nonnegative")
    # (2 + q - sqrt((2+q)^2 - 4)) / 2 written without the cancellation
    return 2.0 / (2.0 + q + math.sqrt(q * (q + 4.0)))


def gain_weight_product(q, T, P1=math.inf):
    """``K_t n_{lambda,t}`` for t = 1..T with ``n_{lambda,t} = (1 - lambda^t)/(1 - lambda)``.

    Returns ``(K, n_lambda, product)``.
    """
    K, _ = kalman_gains(LocalLevelConfig(q, T, P1))
    lam = steady_state_lambda(q)
    t = np.arange(1, T + 1)
    if q == 0:
        n = t.astype(float)
    else:
        n = -np.expm1(t * math.log(lam)) / (1.0 - lam)
    return K, n, K * n


def kalman_predict(y, q, P1=math.inf, a1=0.0):
    """One-step predictions ``a_{t+1|t}`` for t = 1..T; returns ``(a_next, K)``."""
    y = np.asarray(y, dtype=float)
    K, _ = kalman_gains(LocalLevelConfig(q, len(y), P1))
    a = float(a1)
    out = np.empty(len(y))
    for i, yt in enumerate(y):
        a = a + K[i] * (yt - a)
        out[i] = a
    return out, K


def product_table(qs=DEFAULT_Q_GRID, T=50):
    """Rows (q, t, K_t, n_lambda_t, product) for the gain/weight comparison."""
    rows = []
    t = np.arange(1, T + 1, dtype=float)
    for q in qs:
        K, n, prod = gain_weight_product(q, T)
        rows.append(np.column_stack([np.full(T, q), t, K, n, prod]))
    return np.vstack(rows)
