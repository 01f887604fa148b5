"""CSV and JSON plumbing plus the flat key=value run configuration."""
import csv
import json
import math
import os
import tempfile
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from .errors import ConfigError, DataError
from .kalman import DEFAULT_Q_GRID

__all__ = [
    "SeriesTable",
    "read_series",
    "write_csv",
    "write_json",
    "RunConfig",
    "parse_config_text",
    "load_config",
    "SIMPLEX_RENORM_TOL",
    "ZERO_FLOOR",
]

SIMPLEX_RENORM_TOL = 1e-6
ZERO_FLOOR = 1e-9


# -- writing ----------------------------------------------------------------------------


def _atomic_write(path, text):
    path = os.fspath(path)
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(value, digits):
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, f".{digits}g")


def write_csv(path, header, columns, digits=17):
    """Write equal-length columns under ``header``; floats at ``digits`` significant digits."""
    columns = [np.asarray(c) for c in columns]
    if len(header) != len(columns):
        raise ValueError("header and columns differ in length")
    T = len(columns[0]) if columns else 0
    if any(len(c) != T for c in columns):
        raise ValueError("columns differ in length")
    lines = [",".join(header)]
    for i in range(T):
        lines.append(",".join(_fmt(c[i], digits) for c in columns))
    _atomic_write(path, "\n".join(lines) + "\n")


def write_json(path, obj):
    _atomic_write(path, json.dumps(obj, indent=2) + "\n")


# -- reading ------------------------------------------------------------------------------


@dataclass
class SeriesTable:
    """Observation columns (T,) or (T, d), optional scale and anchor columns."""

    header: list
    y: np.ndarray
    n: Optional[np.ndarray] = None
    anchors: Optional[np.ndarray] = None
    renormalized: int = 0
    floored: int = 0

    def __len__(self):
        return len(self.y)


def _y_columns(header, n_col, anchor_prefix):
    if "y" in header:
        return [header.index("y")]
    named = [i for i, h in enumerate(header) if h.startswith("y_") and h[2:].isdigit()]
    if named:
        return sorted(named, key=lambda i: int(header[i][2:]))
    skip = {"t", n_col}
    return [
        i
        for i, h in enumerate(header)
        if h not in skip and not (anchor_prefix and h.startswith(anchor_prefix))
    ]


def read_series(path, frame=None, n_col=None, anchor_prefix=None):
    """Read a CSV with a header row.

    Observation columns are ``y``, else ``y_1..y_d``, else every column other
    than ``t``, the scale column ``n_col`` and anchor columns starting with
    ``anchor_prefix``. For simplex frames rows within 1e-6 of summing to one
    are renormalised and zeros are floored at 1e-9 (then renormalised). When a
    frame is given every row is checked against its support.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError("empty input file")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    if not body:
        raise DataError("input has a header but no data rows")
    width = len(header)
    values = np.empty((len(body), width))
    for r, row in enumerate(body, start=1):
        if len(row) != width:
            raise DataError(f"expected {width} fields, found {len(row)}", row=r)
        for c, cell in enumerate(row):
            try:
                values[r - 1, c] = float(cell)
            except ValueError:
                raise DataError(f"non-numeric value {cell!r} in column {header[c]!r}", row=r) from None
    if n_col is not None and n_col not in header:
        raise DataError(f"scale column {n_col!r} not in header")
    ycols = _y_columns(header, n_col, anchor_prefix)
    if not ycols:
        raise DataError("no observation columns found")
    y = values[:, ycols]
    n = values[:, header.index(n_col)] if n_col is not None else None
    anchors = None
    if anchor_prefix:
        acols = [i for i, h in enumerate(header) if h.startswith(anchor_prefix)]
        anchors = values[:, acols] if acols else None
    if n is not None:
        bad = np.flatnonzero(~(n > 0) | ~np.isfinite(n))
        if bad.size:
            raise DataError("scale n_t must be positive", row=int(bad[0]) + 1)

    table = SeriesTable(header=[header[i] for i in ycols], y=y, n=n, anchors=anchors)
    if frame is not None and frame.obs_ndim == 1:
        _clean_simplex(table, frame)
    else:
        if y.shape[1] != 1:
            if frame is not None:
                raise DataError(f"the {frame.name} frame takes one observation column, found {y.shape[1]}")
        else:
            table.y = y[:, 0]
    if frame is not None:
        check_rows(frame, table.y, table.n)
    return table


def _clean_simplex(table, frame):
    y = table.y
    if y.shape[1] != frame.dim:
        raise DataError(f"expected {frame.dim} simplex columns, found {y.shape[1]}")
    neg = np.flatnonzero(np.any(y < 0, axis=1) | ~np.all(np.isfinite(y), axis=1))
    if neg.size:
        raise DataError("simplex entries must be finite and nonnegative", row=int(neg[0]) + 1)
    s = y.sum(axis=1)
    far = np.flatnonzero(np.abs(s - 1) > SIMPLEX_RENORM_TOL)
    if far.size:
        i = int(far[0])
        raise DataError(f"row sums to {s[i]:.10g}, more than 1e-6 away from 1", row=i + 1)
    zeros = y < ZERO_FLOOR
    table.floored = int(zeros.sum())
    y = np.where(zeros, ZERO_FLOOR, y)
    s2 = y.sum(axis=1)
    table.renormalized = int(np.sum(s2 != 1.0))
    table.y = y / s2[:, None]


def check_rows(frame, y, n=None):
    """Raise :class:`DataError` naming the first row outside the frame support."""
    T = len(y)
    nn = np.ones(T) if n is None else n
    if frame.check_support(np.asarray(y, dtype=float), nn[:, None] if frame.obs_ndim == 1 else nn):
        return
    for i in range(T):
        if not frame.check_support(np.asarray(y[i], dtype=float), np.asarray(nn[i])):
            raise DataError(f"observation outside the support of the {frame.name} frame", row=i + 1)
    raise DataError(f"observations outside the support of the {frame.name} frame")


# -- configuration ----------------------------------------------------------------------------


def _floats(text):
    return [float(v) for v in str(text).replace(";", ",").split(",") if v.strip()]


@dataclass
class RunConfig:
    """Settings for one CLI run; every field can come from a file or a flag."""

    frame: Optional[str] = None
    sigma: Optional[float] = None
    m: Optional[float] = None
    d: Optional[int] = None
    alpha: Optional[float] = None
    lam: Optional[float] = None
    eh1: Optional[str] = None
    T: int = 2000
    seed: int = 0
    burn_in: int = 4
    horizon: int = 1
    method: str = "two-step"
    grid: Optional[str] = None
    q: list = field(default_factory=lambda: list(DEFAULT_Q_GRID))
    input: Optional[str] = None
    out: str = "."
    n_col: Optional[str] = None
    precision: int = 17
    skip: int = 0

    # external key name -> field name
    ALIASES = {"lambda": "lam", "n-col": "n_col", "burn-in": "burn_in"}

    @classmethod
    def keys(cls):
        return {f.name for f in fields(cls)} | set(cls.ALIASES)

    @classmethod
    def from_mapping(cls, raw):
        """Build from string values; unknown keys and bad values raise ConfigError."""
        cfg = cls()
        for key, value in raw.items():
            name = cls.ALIASES.get(key, key)
            if name not in {f.name for f in fields(cls)}:
                raise ConfigError(f"unknown configuration key {key!r}")
            if value is None:
                continue
            setattr(cfg, name, cls._convert(name, value))
        cfg.validate()
        return cfg

    @staticmethod
    def _convert(name, value):
        try:
            if name in ("sigma", "m", "alpha", "lam"):
                return float(value)
            if name in ("d", "T", "burn_in", "horizon", "precision", "skip"):
                iv = int(str(value))
                return iv
            if name == "seed":
                iv = int(str(value))
                if not 0 <= iv < 2**64:
                    raise ValueError("seed must be an unsigned 64-bit integer")
                return iv
            if name == "q":
                return _floats(value) if isinstance(value, str) else [float(v) for v in value]
            return str(value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {name}: {value!r} ({exc})") from None

    def validate(self):
        if self.alpha is not None and not 0 <= self.alpha <= 1:
            raise ConfigError("alpha must lie in [0, 1]")
        if self.lam is not None and not 0 <= self.lam <= 1:
            raise ConfigError("lambda must lie in [0, 1]")
        if self.T < 1:
            raise ConfigError("T must be positive")
        if self.horizon < 1:
            raise ConfigError("horizon must be at least 1")
        if self.burn_in < 0 or self.skip < 0:
            raise ConfigError("burn_in and skip must be nonnegative")
        if not 1 <= self.precision <= 17:
            raise ConfigError("precision must lie in 1..17")
        if self.method not in ("mle", "two-step"):
            raise ConfigError("method must be 'mle' or 'two-step'")
        if self.grid is not None:
            self.grid_shape()
        if not self.q or any(not v >= 0 for v in self.q):
            raise ConfigError("q must be a nonempty list of nonnegative values")
        if self.eh1 is not None and self.eh1 != "sample-mean":
            self.eh1_vector()

    def grid_shape(self):
        try:
            r, c = (int(v) for v in self.grid.lower().split("x"))
        except ValueError:
            raise ConfigError(f"grid must look like RxC, got {self.grid!r}") from None
        if r < 1 or c < 1:
            raise ConfigError("grid dimensions must be positive")
        return r, c

    def eh1_vector(self):
        """Anchor as an array, or None for ``sample-mean`` / unset."""
        if self.eh1 is None or self.eh1 == "sample-mean":
            return None
        try:
            vals = _floats(self.eh1)
        except ValueError:
            raise ConfigError(f"eh1 must be a comma separated list or 'sample-mean', got {self.eh1!r}") from None
        if not vals:
            raise ConfigError("eh1 is empty")
        return np.array(vals)


def parse_config_text(text):
    """Parse ``key = value`` lines; ``#`` starts a comment. Returns a dict of strings."""
    out = {}
    known = RunConfig.keys()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        out[key] = value
    return out


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
