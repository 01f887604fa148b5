"""Command line front end: ``python -m ewcef {simulate,filter,fit,kalman}``.

Settings come from an optional flat ``key = value`` file (``--config``) and
flags; flags win. Output is plot-ready CSV/JSON written into ``--out``.

Exit codes: 0 success, 2 configuration error, 3 data or domain error,
4 numerical failure.
"""
import argparse
import os
import sys

import numpy as np

from . import estimands as est
from .errors import ConfigError, ConvergenceError, DataError, DegeneratePredictorError, DomainError
from .estimation import FitOptions, fit_mle, fit_two_step, grid_axis, loglik_grid, statistics
from .frames import make_frame
from .io import RunConfig, load_config, read_series, write_csv, write_json
from .kalman import product_table
from .simulation import SimConfig, centering, simulate_dgp

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
KALMAN_DEFAULT_T = 50


def _common(p):
    p.add_argument("--config", help="flat key = value settings file")
    p.add_argument("--frame", help="family name, e.g. poisson or dirichlet")
    p.add_argument("--sigma", help="known standard deviation (gaussian_known_sd)")
    p.add_argument("--m", help="Pareto lower bound")
    p.add_argument("--d", help="Dirichlet dimension (inferred from the input if omitted)")
    p.add_argument("--alpha", help="anchoring hyperparameter")
    p.add_argument("--lambda", dest="lam", help="discount hyperparameter")
    p.add_argument("--eh1", help="anchor E[h(Y_1)] as a comma list, or sample-mean")
    p.add_argument("--n-col", dest="n_col", help="name of the n_t column")
    p.add_argument("--seed", help="unsigned 64-bit seed")
    p.add_argument("--out", help="output directory")
    p.add_argument("--precision", help="significant digits in CSV output (default 17)")


def build_parser():
    parser = argparse.ArgumentParser(prog="ewcef", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate the model based DGP")
    _common(p)
    p.add_argument("--T", dest="T", help="series length")
    p.add_argument("--burn-in", dest="burn_in", help="rows to skip when plotting")

    p = sub.add_parser("filter", help="filter, predictor and smoother paths for a series")
    _common(p)
    p.add_argument("input", nargs="?", help="input CSV")
    p.add_argument("--horizon", help="prediction horizon s")

    p = sub.add_parser("fit", help="quasi-likelihood estimation of the hyperparameters")
    _common(p)
    p.add_argument("input", nargs="?", help="input CSV")
    p.add_argument("--method", help="mle or two-step")
    p.add_argument("--grid", help="(alpha, lambda) likelihood grid as RxC")
    p.add_argument("--skip", help="drop the first likelihood increments")

    p = sub.add_parser("kalman", help="Kalman gain times EWMA weight curves")
    _common(p)
    p.add_argument("--q", help="comma separated signal-to-noise ratios")
    p.add_argument("--T", dest="T", help="horizon")
    return parser


def _config(args):
    raw = load_config(args.config) if getattr(args, "config", None) else {}
    raw = {RunConfig.ALIASES.get(k, k): v for k, v in raw.items()}
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config") and v is not None}
    raw.update(flags)
    return RunConfig.from_mapping(raw), raw


def _frame(cfg, width=None):
    if cfg.frame is None:
        raise ConfigError("no frame given (--frame)")
    d = cfg.d
    if cfg.frame.strip().lower() == "dirichlet" and d is None:
        if width is None:
            raise ConfigError("the dirichlet frame needs --d")
        d = width
    try:
        return make_frame(cfg.frame, sigma=cfg.sigma, m=cfg.m, d=d)
    except DomainError as exc:
        raise ConfigError(str(exc)) from None


def _need(cfg, *names):
    missing = [n for n in names if getattr(cfg, n) is None]
    if missing:
        flags = ["--lambda" if n == "lam" else f"--{n}" for n in missing]
        raise ConfigError(f"missing required settings: {', '.join(flags)}")


def _obs_columns(frame, y):
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        return ["y"], [y]
    return [f"y_{i + 1}" for i in range(y.shape[1])], list(y.T)


def _vec_columns(prefix, arr):
    arr = np.asarray(arr, dtype=float)
    return [f"{prefix}_{i + 1}" for i in range(arr.shape[1])], list(arr.T)


def _summary_columns(frame, theta, prefix=""):
    header, cols = [], []
    for name, col in frame.summary(theta).items():
        header.append(f"{prefix}{name}")
        cols.append(col)
    return header, cols


def _path(cfg, name):
    return os.path.join(cfg.out, name)


def cmd_simulate(cfg):
    frame = _frame(cfg)
    _need(cfg, "alpha", "lam")
    eh1 = cfg.eh1_vector()
    if cfg.eh1 == "sample-mean":
        raise ConfigError("simulate needs a numeric eh1 (sample-mean has no data)")
    if eh1 is None:
        eh1 = frame.grad(centering(frame))
    if eh1.shape != (frame.dim,):
        raise ConfigError(f"eh1 needs {frame.dim} values")
    if not frame.mean_ok(eh1):
        raise DataError("eh1 lies outside the mean domain of the frame")
    sim = simulate_dgp(SimConfig(frame, est.Hyper(eh1, cfg.alpha, cfg.lam), cfg.T, cfg.seed, cfg.burn_in))
    t = np.arange(1, cfg.T + 1)
    h_y, c_y = _obs_columns(frame, sim.y)
    write_csv(_path(cfg, "series.csv"), ["t"] + h_y, [t] + c_y, cfg.precision)
    h1, c1 = _vec_columns("theta_pred", sim.theta_pred)
    h2, c2 = _vec_columns("mu_pred", sim.mu_pred)
    h3, c3 = _summary_columns(frame, sim.theta_pred)
    write_csv(
        _path(cfg, "predictor.csv"),
        ["t"] + h_y + h1 + h2 + h3 + ["plotted"],
        [t] + c_y + c1 + c2 + c3 + [t > cfg.burn_in],
        cfg.precision,
    )
    return EXIT_OK


def _load(cfg):
    if cfg.input is None:
        raise ConfigError("no input file given")
    try:
        probe = read_series(cfg.input, None, n_col=cfg.n_col)
    except OSError as exc:
        raise DataError(f"cannot read {cfg.input}: {exc}") from None
    width = probe.y.shape[1] if probe.y.ndim == 2 else 1
    frame = _frame(cfg, width)
    table = read_series(cfg.input, frame, n_col=cfg.n_col)
    return frame, table


def _anchor(cfg, frame, hv, n):
    eh1 = cfg.eh1_vector()
    if eh1 is None:
        nn = np.ones(len(hv)) if n is None else n
        return hv.sum(axis=0) / nn.sum()
    if eh1.shape != (frame.dim,):
        raise ConfigError(f"eh1 needs {frame.dim} values")
    return eh1


def _estimand_columns(frame, kind, path):
    header, cols = [], []
    for prefix, arr in (("theta", path.theta), ("mu", path.mu)):
        h, c = _vec_columns(f"{kind}_{prefix}", arr)
        header += h
        cols += c
    diag = np.diagonal(path.sigma, axis1=-2, axis2=-1)
    h, c = _vec_columns(f"{kind}_var", diag)
    header += h
    cols += c
    h, c = _summary_columns(frame, path.theta, f"{kind}_")
    header += h
    cols += c
    if frame.name == "dirichlet":
        ratio = path.theta / path.theta.sum(axis=1, keepdims=True)
        h, c = _vec_columns(f"{kind}_ratio", ratio)
        header += h
        cols += c
    return header, cols


def cmd_filter(cfg):
    _need(cfg, "alpha", "lam")
    frame, table = _load(cfg)
    hv = statistics(frame, table.y, table.n)
    hyper = est.Hyper(_anchor(cfg, frame, hv, table.n), cfg.alpha, cfg.lam, n_seq=table.n)
    paths = [
        ("filter", est.filter_path(frame, hv, hyper)),
        ("predictor", est.predict_path(frame, hv, hyper, cfg.horizon)),
        ("smoother", est.smooth_path(frame, hv, hyper)),
    ]
    T = len(hv)
    header, cols = ["t"], [np.arange(1, T + 1)]
    for kind, path in paths:
        h, c = _estimand_columns(frame, kind, path)
        header += h
        cols += c
    header.append("predictor_degenerate")
    cols.append(paths[1][1].degenerate)
    write_csv(_path(cfg, "estimates.csv"), header, cols, cfg.precision)
    return EXIT_OK


def cmd_fit(cfg):
    frame, table = _load(cfg)
    opts = FitOptions(skip=cfg.skip)
    init = None
    eh1 = cfg.eh1_vector()
    if eh1 is not None:
        init = est.Hyper(eh1, 0.5, 0.5, phi=frame.phi if frame.phi_names else None)
    fit = (fit_mle if cfg.method == "mle" else fit_two_step)(frame, table.y, init, table.n, opts)
    write_json(_path(cfg, "fit.json"), fit.to_dict())
    if cfg.grid is not None:
        r, c = cfg.grid_shape()
        surf = loglik_grid(frame, table.y, fit.omega_hat, grid_axis(r), grid_axis(c), l_max=fit.loglik, skip=cfg.skip)
        rows = surf.rows()
        write_csv(
            _path(cfg, "grid.csv"),
            ["alpha", "lambda", "loglik", "in_ci99"],
            [rows[:, 0], rows[:, 1], rows[:, 2], rows[:, 3].astype(bool)],
            cfg.precision,
        )
    if not fit.converged and not (fit.boundary_pinned or fit.flat_ridge):
        print(f"ewcef fit: {fit.message}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_kalman(cfg, raw):
    T = cfg.T if "T" in raw else KALMAN_DEFAULT_T
    table = product_table(cfg.q, T)
    write_csv(
        _path(cfg, "kalman.csv"),
        ["q", "t", "K_t", "n_lambda_t", "product"],
        [table[:, 0], table[:, 1].astype(int), table[:, 2], table[:, 3], table[:, 4]],
        cfg.precision,
    )
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg, raw = _config(args)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "filter":
            return cmd_filter(cfg)
        if args.command == "fit":
            return cmd_fit(cfg)
        return cmd_kalman(cfg, raw)
    except ConfigError as exc:
        print(f"ewcef: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, DegeneratePredictorError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"ewcef: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DomainError as exc:
        print(f"ewcef: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
