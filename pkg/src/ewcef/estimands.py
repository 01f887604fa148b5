"""Exponentially weighted filter, predictor and smoother.

For a frame ``CEF(theta, h_t, n_t psi)`` the weighted objectives are maximised
in closed form: the filter, predictor and smoother are ``psi'^{-1}`` of a convex
combination ``mbar`` of anchor values ``E[h_j(Y_j)]`` and statistics
``h_j(y_j)``. The ingredients are the one-sided exponentially weighted sums

    n_t = n_t + lam n_{t-1},   x_t = e_t + lam x_{t-1},   h_t = h(y_t) + lam h_{t-1}

(all starting at zero) and their two-sided counterparts obtained in a single
backward sweep. ``e_t`` is the time-t anchor; a single anchor vector ``eh1``
means ``e_t = n_t * eh1``.

When the cumulant functions differ over time in more than a scale factor, the
estimating equations are solved by Newton-Raphson instead
(:func:`filter_newton_general` and friends).
"""
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np
from scipy.signal import lfilter

from .errors import ConvergenceError, DegeneratePredictorError, DomainError
from .frames import inverse_link

__all__ = [
    "Hyper",
    "WeightedSums",
    "SumsPath",
    "TwoSidedSums",
    "EstimandPoint",
    "EstimandPath",
    "SteadyState",
    "forward_update",
    "forward_pass",
    "backward_pass",
    "filter_point",
    "predict_point",
    "smooth_point",
    "filter_path",
    "predict_path",
    "smooth_path",
    "filter_newton_general",
    "predictor_newton_general",
    "smoother_newton_general",
    "one_step_recursion",
    "steady_state_coeffs",
    "half_life",
]

PROJECT_EPS = 1e-8
TRUNCATE = 1e-12


@dataclass
class Hyper:
    """Hyperparameters of the weighted estimands.

    ``eh1`` is the anchor ``E[h(Y_1)]`` in per-unit form, shape ``(k,)``, or a
    full anchor sequence ``E[h_t(Y_t)]`` of shape ``(T, k)``. ``n_seq`` holds the
    scale factors ``n_t`` (all ones when omitted) and ``phi`` any static
    density parameters of the frame.
    """

    eh1: np.ndarray
    alpha: float
    lam: float
    n_seq: Optional[np.ndarray] = None
    phi: Optional[np.ndarray] = None

    def __post_init__(self):
        self.eh1 = np.atleast_1d(np.asarray(self.eh1, dtype=float))
        self.alpha = float(self.alpha)
        self.lam = float(self.lam)
        if not 0.0 <= self.alpha <= 1.0:
            raise DomainError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not 0.0 <= self.lam <= 1.0:
            raise DomainError(f"lambda must lie in [0, 1], got {self.lam}")
        if self.n_seq is not None:
            self.n_seq = np.asarray(self.n_seq, dtype=float)
            if np.any(self.n_seq <= 0) or not np.all(np.isfinite(self.n_seq)):
                raise DomainError("n_t must be positive and finite")
        if self.phi is not None:
            self.phi = np.atleast_1d(np.asarray(self.phi, dtype=float))

    @property
    def k(self):
        return self.eh1.shape[-1]

    def replace(self, **changes):
        return replace(self, **changes)

    def scales(self, T):
        if self.n_seq is None:
            return np.ones(T)
        if len(self.n_seq) != T:
            raise DomainError(f"n_seq has length {len(self.n_seq)}, data has {T}")
        return self.n_seq

    def anchors(self, T):
        if self.eh1.ndim == 2:
            if self.eh1.shape[0] != T:
                raise DomainError("anchor sequence length does not match the data")
            return self.eh1
        return self.scales(T)[:, None] * self.eh1


@dataclass
class WeightedSums:
    """One-sided weighted sums at time ``t`` (t = 0 is the zero state)."""

    t: int
    n_lam: float
    x_lam: np.ndarray
    h_lam: np.ndarray

    @classmethod
    def zero(cls, k):
        return cls(0, 0.0, np.zeros(k), np.zeros(k))


def forward_update(state, h_t, e_t, n_t, lam):
    """Advance the weighted sums from time ``t - 1`` to ``t``."""
    h_t = np.atleast_1d(np.asarray(h_t, dtype=float))
    e_t = np.atleast_1d(np.asarray(e_t, dtype=float))
    if h_t.shape != state.h_lam.shape or e_t.shape != state.x_lam.shape:
        raise DomainError("dimension mismatch in forward_update")
    return WeightedSums(
        state.t + 1,
        n_t + lam * state.n_lam,
        e_t + lam * state.x_lam,
        h_t + lam * state.h_lam,
    )


def _ewma_sum(values, lam):
    # z_t = v_t + lam z_{t-1}, z_0 = 0
    return lfilter([1.0], [1.0, -lam], values, axis=0)


@dataclass
class SumsPath:
    """Forward sums for t = 1..T stored as arrays; ``n`` (T,), ``x`` and ``h`` (T, k)."""

    n: np.ndarray
    x: np.ndarray
    h: np.ndarray

    def __len__(self):
        return len(self.n)

    def at(self, t):
        """Sums at time ``t`` (1-based); t <= 0 gives the zero state."""
        if t <= 0:
            return WeightedSums.zero(self.x.shape[1])
        i = t - 1
        return WeightedSums(t, float(self.n[i]), self.x[i].copy(), self.h[i].copy())


def forward_pass(hvals, anchors, n, lam):
    """All forward sums for statistics ``hvals`` (T, k) and anchors (T, k)."""
    hvals = np.asarray(hvals, dtype=float)
    anchors = np.asarray(anchors, dtype=float)
    n = np.asarray(n, dtype=float)
    if hvals.shape != anchors.shape or len(n) != len(hvals):
        raise DomainError("statistics, anchors and scales must align")
    return SumsPath(_ewma_sum(n, lam), _ewma_sum(anchors, lam), _ewma_sum(hvals, lam))


@dataclass
class TwoSidedSums:
    """Two-sided sums ``n_{t|T}``, ``x_{t|T}``, ``h_{t|T}`` for t = 1..T."""

    n: np.ndarray
    x: np.ndarray
    h: np.ndarray

    def __len__(self):
        return len(self.n)

    def at(self, t):
        i = t - 1
        return WeightedSums(t, float(self.n[i]), self.x[i].copy(), self.h[i].copy())


def _backward(z, lam):
    # z_{t|T} = z_t + lam (z_{t+1|T} - lam z_t) = (1 - lam^2) z_t + lam z_{t+1|T}
    u = (1.0 - lam * lam) * z
    u[-1] = z[-1]
    return lfilter([1.0], [1.0, -lam], u[::-1], axis=0)[::-1]


def backward_pass(forward, lam):
    """Two-sided sums from a completed forward pass, in one backward sweep.

    ``forward`` is a :class:`SumsPath` or a sequence of :class:`WeightedSums`
    for t = 1..T.
    """
    if not isinstance(forward, SumsPath):
        forward = list(forward)
        if not forward:
            raise DomainError("backward_pass needs at least one time point")
        forward = SumsPath(
            np.array([s.n_lam for s in forward]),
            np.array([s.x_lam for s in forward]),
            np.array([s.h_lam for s in forward]),
        )
    if len(forward) == 0:
        raise DomainError("backward_pass needs at least one time point")
    return TwoSidedSums(
        _backward(np.array(forward.n, dtype=float), lam),
        _backward(np.array(forward.x, dtype=float), lam),
        _backward(np.array(forward.h, dtype=float), lam),
    )


@dataclass
class EstimandPoint:
    """theta, mean ``n_t psi'(theta)`` and variance ``n_t psi''(theta)`` at one time."""

    theta: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    kind: str
    mbar: np.ndarray
    iterations: int = 0
    residual: float = 0.0


def _point(frame, mbar, n_t, kind, start=None):
    proj = frame.project(mbar, PROJECT_EPS)
    theta, info = inverse_link(frame, proj, start=start, return_info=True)
    return EstimandPoint(
        theta=theta,
        mu=n_t * frame.grad(theta),
        sigma=n_t * frame.hess(theta),
        kind=kind,
        mbar=np.asarray(mbar, dtype=float),
        iterations=int(info["iterations"][0]),
        residual=float(info["residual"][0]),
    )


def filter_point(frame, sums, hyper, n_t=1.0, start=None):
    """Filter at the time of ``sums``: ``psi'^{-1}(((1-a) x + a h) / n)``."""
    if not sums.n_lam > 0:
        raise DegeneratePredictorError("filter needs n_lam > 0")
    a = hyper.alpha
    m = (1 - a) * sums.x_lam + a * sums.h_lam
    return _point(frame, m / sums.n_lam, n_t, "filter", start)


def predict_point(frame, sums_t, sums_t_minus_s, s, hyper, n_t=1.0, start=None):
    """s-step predictor of time t from data up to ``t - s``.

    ``sums_t`` are the sums at t (only ``x`` and ``n`` are used) and
    ``sums_t_minus_s`` those at ``t - s`` (the zero state when t - s = 0).
    """
    if s < 1:
        raise DomainError("prediction horizon must be >= 1")
    a, lam = hyper.alpha, hyper.lam
    ls = lam**s
    m = (1 - a) * sums_t.x_lam + a * ls * sums_t_minus_s.h_lam
    nn = (1 - a) * sums_t.n_lam + a * ls * sums_t_minus_s.n_lam
    if not nn > 0:
        raise DegeneratePredictorError(
            "predictor normaliser is zero (alpha = 1 and no data before t - s)"
        )
    return _point(frame, m / nn, n_t, f"predictor({s})", start)


def smooth_point(frame, sums2s_t, hyper, n_t=1.0, start=None):
    """Smoother from one entry of :class:`TwoSidedSums`."""
    a = hyper.alpha
    m = (1 - a) * sums2s_t.x_lam + a * sums2s_t.h_lam
    return _point(frame, m / sums2s_t.n_lam, n_t, "smoother", start)


# -- whole paths -------------------------------------------------------------------


@dataclass
class EstimandPath:
    """Estimands for t = 1..T. ``degenerate`` marks rows that fell back to the anchor."""

    theta: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    mbar: np.ndarray
    kind: str
    degenerate: np.ndarray = field(default=None)

    def __len__(self):
        return len(self.theta)

    def point(self, t):
        i = t - 1
        return EstimandPoint(self.theta[i], self.mu[i], self.sigma[i], self.kind, self.mbar[i])


def invert_path(frame, mbar, start=None, warm=None):
    """Row-wise ``psi'^{-1}`` of projected unit means (T, k).

    Newton families start from ``start`` if given, else from the moment start
    or, row by row, from ``warm`` (e.g. a nearby earlier solution) whenever
    that has the smaller residual.
    """
    proj = frame.project(mbar, PROJECT_EPS)
    if start is None and not frame.has_closed_form:
        start = frame.moment_start(proj)
        if warm is not None and warm.shape == proj.shape and np.all(frame.natural_ok(warm)):
            r_m = np.max(np.abs(frame.grad(start) - proj), axis=-1)
            r_w = np.max(np.abs(frame.grad(warm) - proj), axis=-1)
            start = np.where((r_w < r_m)[:, None], warm, start)
    return inverse_link(frame, proj, start=start)


def _finish(frame, mbar, n, kind, degenerate=None, start=None):
    theta = invert_path(frame, mbar, start)
    n = np.asarray(n, dtype=float)
    return EstimandPath(
        theta=theta,
        mu=n[:, None] * frame.grad(theta),
        sigma=n[:, None, None] * frame.hess(theta),
        mbar=mbar,
        kind=kind,
        degenerate=np.zeros(len(mbar), dtype=bool) if degenerate is None else degenerate,
    )


def _inputs(hvals, hyper):
    hvals = np.atleast_2d(np.asarray(hvals, dtype=float))
    T = len(hvals)
    n = hyper.scales(T)
    e = hyper.anchors(T)
    if e.shape != hvals.shape:
        raise DomainError(f"anchor dimension {e.shape[-1]} does not match statistic {hvals.shape[-1]}")
    return hvals, e, n


def filter_mbar(sums, alpha):
    return ((1 - alpha) * sums.x + alpha * sums.h) / sums.n[:, None]


def predict_mbar(sums, anchors, n, alpha, lam, s=1):
    """Unit-mean predictor path ``m_{t|t-s} / n_{t|t-s}`` and its degenerate mask.

    Rows with a zero normaliser (alpha = 1, t <= s) fall back to the anchor
    ``e_t / n_t``.
    """
    T = len(sums)
    ls = lam**s
    h_lag = np.zeros_like(sums.h)
    n_lag = np.zeros(T)
    if s < T:
        h_lag[s:] = sums.h[:-s]
        n_lag[s:] = sums.n[:-s]
    m = (1 - alpha) * sums.x + alpha * ls * h_lag
    nn = (1 - alpha) * sums.n + alpha * ls * n_lag
    degenerate = ~(nn > 0)
    safe = np.where(degenerate, 1.0, nn)
    mbar = m / safe[:, None]
    if np.any(degenerate):
        unit = anchors / np.asarray(n, dtype=float)[:, None]
        mbar[degenerate] = unit[degenerate]
    return mbar, degenerate


def filter_path(frame, hvals, hyper):
    hvals, e, n = _inputs(hvals, hyper)
    sums = forward_pass(hvals, e, n, hyper.lam)
    return _finish(frame, filter_mbar(sums, hyper.alpha), n, "filter")


def predict_path(frame, hvals, hyper, s=1):
    if s < 1:
        raise DomainError("prediction horizon must be >= 1")
    hvals, e, n = _inputs(hvals, hyper)
    sums = forward_pass(hvals, e, n, hyper.lam)
    mbar, degenerate = predict_mbar(sums, e, n, hyper.alpha, hyper.lam, s)
    return _finish(frame, mbar, n, f"predictor({s})", degenerate)


def smooth_path(frame, hvals, hyper):
    hvals, e, n = _inputs(hvals, hyper)
    two = backward_pass(forward_pass(hvals, e, n, hyper.lam), hyper.lam)
    mbar = ((1 - hyper.alpha) * two.x + hyper.alpha * two.h) / two.n[:, None]
    return _finish(frame, mbar, n, "smoother")


def one_step_recursion(anchors, hvals, alpha, lam):
    """``m_{t|t-1} = (1-a) e_t + a lam h_{t-1} + lam m_{t-1|t-2}`` from m_{0|-1} = 0."""
    anchors = np.asarray(anchors, dtype=float)
    hvals = np.asarray(hvals, dtype=float)
    drive = (1 - alpha) * anchors
    drive[1:] += alpha * lam * hvals[:-1]
    return _ewma_sum(drive, lam)


# -- time varying cumulant functions (Newton route) ----------------------------------


def _as_frames(frames, T):
    if hasattr(frames, "grad"):
        return [frames] * T
    frames = list(frames)
    if len(frames) < T:
        raise DomainError(f"need {T} frames, got {len(frames)}")
    return frames


def _weighted_solve(groups, target, start, tol, max_iter=200, max_halvings=30):
    """Solve ``sum_g W_g psi_g'(theta) = target`` by damped Newton."""
    ref = groups[0][0]

    def resid(theta):
        out = -target.copy()
        for frame, w in groups:
            out += w * frame.grad(theta)
        return out

    def hess(theta):
        out = 0.0
        for frame, w in groups:
            out = out + w * frame.hess(theta)
        return out

    def ok(theta):
        return all(bool(f.natural_ok(theta)) for f, _ in groups)

    theta = np.array(start, dtype=float)
    if not ok(theta):
        raise DomainError("Newton start outside the natural domain")
    r = resid(theta)
    res = np.max(np.abs(r))
    fine = 4e-15 * (1 + np.max(np.abs(target)))
    it = 0
    while res > fine and it < max_iter:
        try:
            step = np.linalg.solve(hess(theta), r)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError("singular summed Hessian", it, res) from exc
        scale, moved = 1.0, False
        for _ in range((max_halvings if res > tol else 0) + 1):
            cand = theta - scale * step
            if ok(cand):
                rc = resid(cand)
                rn = np.max(np.abs(rc))
                if rn < res:
                    theta, r, res, moved = cand, rc, rn, True
                    break
            scale *= 0.5
        if not moved:
            break
        it += 1
    if res > tol:
        raise ConvergenceError(
            f"weighted Newton did not converge (residual {res:.3g})", it, res
        )
    return theta, it, res


def _general(frames, hvals, anchors, n, weights_data, weights_anchor, t, alpha, kind, start, tol):
    T = len(hvals)
    frames = _as_frames(frames, T)
    w_all = weights_anchor * (1 - alpha) + weights_data * alpha
    keep = np.flatnonzero(w_all >= TRUNCATE)
    lhs = (1 - alpha) * (weights_anchor[keep, None] * anchors[keep]).sum(0) + alpha * (
        weights_data[keep, None] * hvals[keep]
    ).sum(0)
    groups = {}
    for j in keep:
        groups[frames[j]] = groups.get(frames[j], 0.0) + w_all[j] * n[j]
    groups = list(groups.items())
    ft = frames[t - 1]
    total = sum(w for _, w in groups)
    raw = lhs / total
    # same projection as the closed-form route, applied to the weighted mean
    guess = ft.project(raw, PROJECT_EPS)
    lhs = guess * total
    if start is None:
        start = (
            ft.closed_inverse(guess[None])[0]
            if ft.has_closed_form
            else ft.moment_start(guess[None])[0]
        )
    theta, it, res = _weighted_solve(groups, lhs, start, tol)
    return EstimandPoint(
        theta=theta,
        mu=n[t - 1] * ft.grad(theta),
        sigma=n[t - 1] * ft.hess(theta),
        kind=kind,
        mbar=raw,
        iterations=it,
        residual=res,
    )


def _general_inputs(hvals, anchors, n_seq, t):
    hvals = np.atleast_2d(np.asarray(hvals, dtype=float))
    anchors = np.asarray(anchors, dtype=float)
    if anchors.ndim == 1:
        anchors = np.broadcast_to(anchors, hvals.shape)
    T = len(hvals)
    n = np.ones(T) if n_seq is None else np.asarray(n_seq, dtype=float)
    if not 1 <= t <= T:
        raise DomainError(f"t must lie in 1..{T}")
    return hvals, anchors, n, T


def filter_newton_general(frames, hvals, anchors, alpha, lam, t, n_seq=None, start=None, tol=1e-9):
    """Filter at time ``t`` when the cumulant function changes over time.

    ``frames`` is one frame or a sequence with one frame per time point; time j
    contributes ``n_j psi_j``. ``anchors`` are the per-time ``E[h_j(Y_j)]``.
    """
    hvals, anchors, n, T = _general_inputs(hvals, anchors, n_seq, t)
    j = np.arange(1, T + 1)
    w = np.where(j <= t, float(lam) ** np.clip(t - j, 0, None), 0.0)
    return _general(frames, hvals, anchors, n, w, w, t, alpha, "filter", start, tol)


def predictor_newton_general(frames, hvals, anchors, alpha, lam, t, s=1, n_seq=None, start=None, tol=1e-9):
    """s-step predictor at time ``t`` by Newton on the weighted estimating equation."""
    if s < 1:
        raise DomainError("prediction horizon must be >= 1")
    hvals, anchors, n, T = _general_inputs(hvals, anchors, n_seq, t)
    j = np.arange(1, T + 1)
    w_anchor = np.where(j <= t, float(lam) ** np.clip(t - j, 0, None), 0.0)
    w_data = np.where(j <= t - s, w_anchor, 0.0)
    if alpha == 1 and not np.any(w_data > 0):
        raise DegeneratePredictorError("no data weight for alpha = 1 and t <= s")
    return _general(frames, hvals, anchors, n, w_data, w_anchor, t, alpha, f"predictor({s})", start, tol)


def smoother_newton_general(frames, hvals, anchors, alpha, lam, t, n_seq=None, start=None, tol=1e-9):
    """Smoother at time ``t`` using all T observations."""
    hvals, anchors, n, T = _general_inputs(hvals, anchors, n_seq, t)
    j = np.arange(1, T + 1)
    w = float(lam) ** np.abs(t - j)
    return _general(frames, hvals, anchors, n, w, w, t, alpha, "smoother", start, tol)


# -- steady state ------------------------------------------------------------------------


class SteadyState(NamedTuple):
    anchor_w: float
    data_w: float
    ar_root: float
    ma_root: float


def steady_state_coeffs(lam, alpha=None):
    """Coefficients of the steady-state one-step predictor, stable frame, n_t = 1.

    ``mu_{t|t-1} = anchor_w E[h] + data_w h(Y_{t-1}) + lam mu_{t-1|t-2}``, so
    ``h(Y_t)`` is ARMA(1, 1) with autoregressive root ``lam / (1 - a (1 - lam))``
    and moving average root ``-lam``. Accepts ``(lam, alpha)`` or a :class:`Hyper`.
    """
    if isinstance(lam, Hyper):
        lam, alpha = lam.lam, lam.alpha
    if not (0 <= lam < 1 and 0 <= alpha < 1):
        raise DomainError("steady state needs lambda and alpha in [0, 1)")
    denom = 1 - alpha * (1 - lam)
    return SteadyState(
        anchor_w=(1 - alpha) * (1 - lam) / denom,
        data_w=alpha * lam * (1 - lam) / denom,
        ar_root=lam / denom,
        ma_root=-lam,
    )


def half_life(lam):
    """Number of periods for the weight ``lam^j`` to halve."""
    if not 0 < lam < 1:
        raise DomainError("half-life needs lambda in (0, 1)")
    return np.log(0.5) / np.log(lam)
