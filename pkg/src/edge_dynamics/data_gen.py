"""Seeded synthetic datasets for the quadratic network experiments.

Every random draw comes from :class:`~edge_dynamics.prng.SplitMix64`
sub-streams of the dataset seed, so a dataset is fully determined by its
parameters:

====  ===================
path  use
====  ===================
0     design matrix X
1     ground truth U*
2     label noise
3     held-out test inputs
4     test-label noise
5     initial weights
====  ===================
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidParam, InvalidShape, ParseError
from .prng import SplitMix64

ORTHONORMAL = "orthonormal_rows"
GAUSSIAN = "gaussian"
KINDS = (ORTHONORMAL, GAUSSIAN)
NOISE_PRESETS = (0.0, 0.25, 1.0)

S_X, S_TRUTH, S_NOISE, S_TEST, S_TEST_NOISE, S_INIT = range(6)


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    kind: str
    noise_var: float
    seed: int
    ground_truth: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParam(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.noise_var < 0:
            raise InvalidParam("noise_var must be >= 0")
        if self.X.ndim != 2 or self.y.shape != (self.X.shape[0],):
            raise InvalidShape(f"X {self.X.shape} and y {self.y.shape} disagree")
        if self.ground_truth is not None and self.ground_truth.shape[0] != self.X.shape[1]:
            raise InvalidShape("ground truth must have d rows")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def m(self) -> int | None:
        return None if self.ground_truth is None else self.ground_truth.shape[1]

    def check_orthonormal(self, norm_tol: float = 1e-12, ortho_tol: float = 1e-10) -> bool:
        G = self.X @ self.X.T
        off = G - np.diag(np.diag(G))
        return bool(np.all(np.abs(np.diag(G) - 1) <= norm_tol) and np.all(np.abs(off) <= ortho_tol))


def random_orthonormal_rows(n: int, d: int, seed: int) -> np.ndarray:
    """First n rows of a random orthogonal d x d matrix (QR of a seeded Gaussian)."""
    if n > d:
        raise InvalidShape(f"cannot have {n} orthonormal rows in dimension {d}")
    if n < 1:
        raise InvalidShape("n must be >= 1")
    G = SplitMix64(seed, S_X).normal(d * d).reshape(d, d)
    Q, R = np.linalg.qr(G)
    # sign fix makes the factorization unique (Haar-distributed Q)
    Q = Q * np.where(np.diag(R) < 0, -1.0, 1.0)
    return np.ascontiguousarray(Q.T[:n])


def gaussian_matrix(n: int, d: int, seed: int, stream: int = S_X) -> np.ndarray:
    if n < 1 or d < 1:
        raise InvalidShape("n and d must be >= 1")
    return SplitMix64(seed, stream).normal(n * d).reshape(n, d)


def quadnet_outputs(X: np.ndarray, U: np.ndarray) -> np.ndarray:
    """sum_j (X_i.u_j)^2 / (sqrt(m) d) for every row of X."""
    P = X @ U
    return (P * P).sum(axis=1) / (math.sqrt(U.shape[1]) * X.shape[1])


def generate_labels(X, U_star, noise_var: float, seed: int, stream: int = S_NOISE) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    U_star = np.asarray(U_star, dtype=float)
    if U_star.ndim != 2 or U_star.shape[0] != X.shape[1]:
        raise InvalidShape(f"U* must be {X.shape[1]} x m, got {U_star.shape}")
    if noise_var < 0:
        raise InvalidParam("noise_var must be >= 0")
    y = quadnet_outputs(X, U_star)
    if noise_var > 0:
        y = y + math.sqrt(noise_var) * SplitMix64(seed, stream).normal(X.shape[0])
    return y


def phase_retrieval_labels(X, w_star, gamma: float, c: float, noise_var: float, seed: int,
                           stream: int = S_NOISE) -> np.ndarray:
    """gamma (X_i.w*)^2 / 2 + c X_i.w* plus N(0, noise_var) noise."""
    p = np.asarray(X, dtype=float) @ np.asarray(w_star, dtype=float).reshape(-1)
    y = gamma * p * p / 2 + c * p
    if noise_var < 0:
        raise InvalidParam("noise_var must be >= 0")
    if noise_var > 0:
        y = y + math.sqrt(noise_var) * SplitMix64(seed, stream).normal(p.shape[0])
    return y


def make_dataset(kind: str, n: int, d: int, m: int, noise_var: float, seed: int) -> Dataset:
    if kind not in KINDS:
        raise InvalidParam(f"kind must be one of {KINDS}, got {kind!r}")
    if m < 1:
        raise InvalidParam("m must be >= 1")
    X = random_orthonormal_rows(n, d, seed) if kind == ORTHONORMAL else gaussian_matrix(n, d, seed)
    U = SplitMix64(seed, S_TRUTH).normal(d * m).reshape(d, m)
    y = generate_labels(X, U, noise_var, seed)
    return Dataset(X, y, kind, float(noise_var), seed, U)


def make_test_set(ds: Dataset, n_test: int = 500) -> tuple[np.ndarray, np.ndarray]:
    """Held-out inputs and noisy labels from the same ground truth.

    Gaussian data draws standard normal test rows.  Orthonormal training
    rows have unit norm, so their test rows are standard normal / sqrt(d),
    which matches that norm on average.
    """
    if ds.ground_truth is None:
        raise InvalidParam("dataset has no ground truth to label a test set")
    Xt = gaussian_matrix(n_test, ds.d, ds.seed, S_TEST)
    if ds.kind == ORTHONORMAL:
        Xt = Xt / math.sqrt(ds.d)
    return Xt, generate_labels(Xt, ds.ground_truth, ds.noise_var, ds.seed, S_TEST_NOISE)


def init_weights(shape, scale: float, seed: int) -> np.ndarray:
    """Coordinate-wise N(0, scale^2) initial weights."""
    shape = tuple(np.atleast_1d(shape))
    size = int(np.prod(shape))
    return scale * SplitMix64(seed, S_INIT).normal(size).reshape(shape)


def _fmt(x: float) -> str:
    return repr(float(x))


def save_dataset(ds: Dataset, path) -> None:
    """CSV with ``#`` header lines, an ``x_1..x_d,y`` header and optional U* block."""
    lines = [f"# kind={ds.kind}", f"# seed={ds.seed}", f"# noise_var={_fmt(ds.noise_var)}",
             f"# d={ds.d} m={ds.m if ds.m is not None else 0} n={ds.n}",
             ",".join([f"x_{j + 1}" for j in range(ds.d)] + ["y"])]
    for row, yi in zip(ds.X, ds.y):
        lines.append(",".join(_fmt(v) for v in row) + "," + _fmt(yi))
    if ds.ground_truth is not None:
        lines.append("# ground_truth")
        for row in ds.ground_truth:
            lines.append(",".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def _parse_row(text: str, lineno: int, width: int) -> list[float]:
    parts = text.split(",")
    if len(parts) != width:
        raise ParseError(f"expected {width} fields, found {len(parts)}", lineno, 1)
    out = []
    col = 1
    for p in parts:
        try:
            out.append(float(p))
        except ValueError:
            raise ParseError(f"not a number: {p.strip()!r}", lineno, col) from None
        col += len(p) + 1
    return out


def load_dataset(path) -> Dataset:
    path = Path(path)
    lines = path.read_text().splitlines()
    header: dict[str, str] = {}
    i = 0
    while i < len(lines) and lines[i].startswith("#"):
        for tok in lines[i][1:].split():
            if "=" not in tok:
                raise ParseError(f"malformed header token {tok!r}", i + 1, lines[i].find(tok) + 1)
            k, v = tok.split("=", 1)
            header[k] = v
        i += 1
    for key in ("kind", "seed", "noise_var", "d", "m", "n"):
        if key not in header:
            raise ParseError(f"missing header field {key!r}", i + 1, 1)
    try:
        d, m, n = int(header["d"]), int(header["m"]), int(header["n"])
        seed = int(header["seed"])
        noise = float(header["noise_var"])
    except ValueError as exc:
        raise ParseError(f"bad numeric header value: {exc}", 1, 1) from None
    if i >= len(lines):
        raise ParseError("missing column header row", i + 1, 1)
    cols = lines[i].split(",")
    if len(cols) != d + 1:
        raise ParseError(f"header field 'd'={d} disagrees with {len(cols) - 1} x columns", i + 1, 1)
    i += 1
    rows = []
    while i < len(lines) and not lines[i].startswith("#"):
        if lines[i].strip():
            rows.append(_parse_row(lines[i], i + 1, d + 1))
        i += 1
    if len(rows) != n:
        raise ParseError(f"header field 'n'={n} but found {len(rows)} data rows", i + 1, 1)
    gt = None
    if i < len(lines):
        if lines[i].strip() != "# ground_truth":
            raise ParseError(f"unexpected line {lines[i]!r}", i + 1, 1)
        i += 1
        gt_rows = [_parse_row(t, k + 1, m) for k, t in enumerate(lines[i:], start=i) if t.strip()]
        if len(gt_rows) != d:
            raise ParseError(f"ground truth has {len(gt_rows)} rows, header field 'd'={d}",
                             len(lines), 1)
        gt = np.array(gt_rows)
    data = np.array(rows, dtype=float).reshape(n, d + 1)
    try:
        ds = Dataset(data[:, :d].copy(), data[:, d].copy(), header["kind"], noise, seed, gt)
    except (InvalidParam, InvalidShape) as exc:
        raise ParseError(str(exc), 1, 1) from None
    if ds.kind == ORTHONORMAL and not ds.check_orthonormal():
        raise ParseError("rows are not orthonormal although kind=orthonormal_rows", 1, 1)
    return ds
