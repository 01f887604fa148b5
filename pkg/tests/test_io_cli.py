import json
import math

import numpy as np
import pytest

from ewcef import estimands as E
from ewcef.cli import main
from ewcef.errors import ConfigError, DataError
from ewcef.frames import make_frame
from ewcef.io import RunConfig, parse_config_text, read_series, write_csv


def read_csv(path):
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    return header, rows


def column(path, name):
    header, rows = read_csv(path)
    i = header.index(name)
    return np.array([float(r[i]) for r in rows])


# -- config ---------------------------------------------------------------------------


def test_parse_config_text():
    raw = parse_config_text("frame = poisson  # comment\n\nlambda = 0.9\nalpha=0.7\n")
    assert raw == {"frame": "poisson", "lambda": "0.9", "alpha": "0.7"}
    cfg = RunConfig.from_mapping(raw)
    assert cfg.lam == 0.9 and cfg.alpha == 0.7 and cfg.T == 2000


@pytest.mark.parametrize(
    "text",
    ["colour = red", "alpha 0.5", "alpha = 1.5", "grid = 5by5", "seed = -1", "method = bayes", "eh1 = a,b"],
)
def test_bad_config_rejected(text):
    with pytest.raises(ConfigError):
        RunConfig.from_mapping(parse_config_text(text))


# -- csv ------------------------------------------------------------------------------------


def test_write_csv_roundtrip_lossless(tmp_path, rng):
    x = rng.normal(size=20) * 10.0 ** rng.integers(-300, 300, 20)
    p = tmp_path / "a.csv"
    write_csv(p, ["t", "x", "flag"], [np.arange(20), x, x > 0])
    back = column(p, "x")
    assert back.tobytes() == x.tobytes()
    assert column(p, "flag").tolist() == [float(v) for v in (x > 0)]
    write_csv(p, ["v"], [np.array([np.inf, -np.inf, np.nan])])
    assert p.read_text().split() == ["v", "inf", "-inf", "nan"]
    assert not [f for f in tmp_path.iterdir() if f.name.startswith(".tmp")]


def test_read_series_scalar_and_n(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("t,y,n\n1,2,3\n2,0,1\n")
    tab = read_series(p, make_frame("poisson"), n_col="n")
    assert tab.y.tolist() == [2.0, 0.0] and tab.n.tolist() == [3.0, 1.0]


def test_read_series_simplex_renormalisation(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("y_1,y_2,y_3\n0.5,0.3,0.2000005\n0.4,0.6,0\n")
    tab = read_series(p, make_frame("dirichlet", d=3))
    np.testing.assert_allclose(tab.y.sum(axis=1), 1.0, atol=1e-9)
    assert tab.floored == 1 and tab.y[1, 2] > 0


def test_read_series_rejects_far_simplex_row(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("a,b\n0.5,0.5\n0.5,0.49\n")
    with pytest.raises(DataError, match="row 2"):
        read_series(p, make_frame("dirichlet", d=2))


def test_read_series_support_row_number(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("y\n0.2\n0.5\n1.5\n")
    with pytest.raises(DataError, match="row 3"):
        read_series(p, make_frame("beta"))
    p.write_text("y\n1\nx\n")
    with pytest.raises(DataError, match="row 2"):
        read_series(p)


# -- commands -----------------------------------------------------------------------------


def test_simulate_bernoulli(tmp_path):
    code = main(["simulate", "--frame", "bernoulli", "--alpha", "0.7", "--lambda", "0.93", "--T", "2000",
                 "--seed", "1", "--out", str(tmp_path)])
    assert code == 0
    header, rows = read_csv(tmp_path / "predictor.csv")
    assert len(rows) == 2000
    mu = column(tmp_path / "predictor.csv", "mu_pred_1")
    assert np.all((mu > 0) & (mu < 1))
    assert column(tmp_path / "series.csv", "y").shape == (2000,)


def test_simulate_gaussian_sd_column(tmp_path):
    assert main(["simulate", "--frame", "gaussian", "--alpha", "0.95", "--lambda", "0.93", "--T", "300",
                 "--out", str(tmp_path)]) == 0
    header, _ = read_csv(tmp_path / "predictor.csv")
    sd = [h for h in header if "sd" in h]
    assert sd
    assert np.all(column(tmp_path / "predictor.csv", sd[0]) >= 0)


def test_simulate_pareto_emits_inf(tmp_path):
    # an anchor with mean of log y large enough that theta >= -1 along the path
    assert main(["simulate", "--frame", "pareto", "--m", "1", "--eh1", "1.5", "--alpha", "0.9",
                 "--lambda", "0.9", "--T", "50", "--out", str(tmp_path)]) == 0
    text = (tmp_path / "predictor.csv").read_text()
    assert ",inf" in text


def test_simulate_byte_identical(tmp_path):
    args = ["simulate", "--frame", "von_mises", "--alpha", "0.7", "--lambda", "0.93", "--T", "200", "--seed", "42"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    for name in ("series.csv", "predictor.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


@pytest.mark.parametrize("frame,extra", [("poisson", []), ("dirichlet", ["--d", "7"]), ("beta", [])])
def test_simulate_filter_roundtrip(tmp_path, frame, extra):
    base = ["--frame", frame, "--alpha", "0.95", "--lambda", "0.65"] + extra
    assert main(["simulate"] + base + ["--T", "300", "--seed", "3", "--out", str(tmp_path)]) == 0
    pred = tmp_path / "predictor.csv"
    header, _ = read_csv(pred)
    k = sum(h.startswith("theta_pred_") for h in header)
    theta_sim = np.column_stack([column(pred, f"theta_pred_{i + 1}") for i in range(k)])
    mu1 = np.column_stack([column(pred, f"mu_pred_{i + 1}") for i in range(k)])[0]
    eh1 = ",".join(repr(float(v)) for v in mu1)
    assert main(["filter", str(tmp_path / "series.csv")] + base + ["--eh1=" + eh1, "--out", str(tmp_path)]) == 0
    est = tmp_path / "estimates.csv"
    theta_f = np.column_stack([column(est, f"predictor_theta_{i + 1}") for i in range(k)])
    np.testing.assert_allclose(theta_f, theta_sim, rtol=1e-10, atol=1e-10)
    if frame == "dirichlet":
        for kind in ("predictor", "smoother"):
            r = np.column_stack([column(est, f"{kind}_ratio_{i + 1}") for i in range(7)])
            assert np.all((r > 0) & (r < 1))
            np.testing.assert_allclose(r.sum(axis=1), 1.0, atol=1e-12)


def test_filter_single_row(tmp_path):
    p = tmp_path / "one.csv"
    p.write_text("y\n3\n")
    assert main(["filter", str(p), "--frame", "poisson", "--alpha", "0.5", "--lambda", "0.9", "--eh1", "2",
                 "--out", str(tmp_path)]) == 0
    est = tmp_path / "estimates.csv"
    f, s = column(est, "filter_theta_1"), column(est, "smoother_theta_1")
    assert f[0] == s[0] == pytest.approx(math.log(2.5))
    assert column(est, "predictor_theta_1")[0] == pytest.approx(math.log(2.0))


def test_filter_constant_input_constant_mean(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("y\n" + "0.5\n" * 20)
    assert main(["filter", str(p), "--frame", "bernoulli", "--alpha", "0.3", "--lambda", "0.8", "--eh1", "0.5",
                 "--out", str(tmp_path)]) == 0
    np.testing.assert_allclose(column(tmp_path / "estimates.csv", "filter_mu_1"), 0.5, rtol=1e-14)


def test_fit_with_grid(tmp_path):
    assert main(["simulate", "--frame", "poisson", "--alpha", "0.9", "--lambda", "0.7", "--eh1", "3", "--T", "400",
                 "--out", str(tmp_path)]) == 0
    assert main(["fit", str(tmp_path / "series.csv"), "--frame", "poisson", "--method", "two-step",
                 "--grid", "50x50", "--out", str(tmp_path)]) == 0
    d = json.loads((tmp_path / "fit.json").read_text())
    assert {"alpha_hat", "lambda_hat", "cov", "loglik", "method", "iterations", "diagnostics"} <= set(d)
    header, rows = read_csv(tmp_path / "grid.csv")
    assert header == ["alpha", "lambda", "loglik", "in_ci99"] and len(rows) == 2500


def test_kalman_command(tmp_path):
    assert main(["kalman", "--out", str(tmp_path)]) == 0
    header, rows = read_csv(tmp_path / "kalman.csv")
    assert header == ["q", "t", "K_t", "n_lambda_t", "product"] and len(rows) == 300
    tab = np.array(rows, dtype=float)
    assert np.all(tab[tab[:, 1] == 1, 4] == 1.0)
    # slowest convergence for the smallest q
    gap = {q: np.sum(np.abs(tab[tab[:, 0] == q, 4] - 1)) for q in np.unique(tab[:, 0])}
    assert max(gap, key=gap.get) == 0.001
    assert main(["kalman", "--q", "0", "--T", "10", "--out", str(tmp_path)]) == 0
    np.testing.assert_allclose(column(tmp_path / "kalman.csv", "product"), 1.0)


def test_exit_codes(tmp_path):
    assert main(["simulate", "--frame", "nope", "--alpha", "0.5", "--lambda", "0.5", "--out", str(tmp_path)]) == 2
    assert main(["simulate", "--frame", "poisson", "--alpha", "2", "--lambda", "0.5"]) == 2
    assert main(["bogus"]) == 2
    cfg = tmp_path / "run.cfg"
    cfg.write_text("frame = poisson\nunknown = 1\n")
    assert main(["kalman", "--config", str(cfg)]) == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("y\n1\n-2\n")
    assert main(["filter", str(bad), "--frame", "poisson", "--alpha", "0.5", "--lambda", "0.5"]) == 3
    assert main(["filter", str(tmp_path / "missing.csv"), "--frame", "poisson", "--alpha", "0.5", "--lambda", "0.5"]) == 3


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"frame = poisson\nalpha = 0.5\nlambda = 0.9\nT = 30\nout = {tmp_path / 'x'}\n")
    assert main(["simulate", "--config", str(cfg), "--T", "12"]) == 0
    assert len(read_csv(tmp_path / "x" / "series.csv")[1]) == 12
