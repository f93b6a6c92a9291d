"""Gradient descent on quadratic regression models and their cubic-map coordinates.

Two models, both trained on the mean loss (1/2n) sum_i (g_i - y_i)^2:

* generalized phase retrieval, g(w; X_i) = gamma (X_i.w)^2 / 2 + c_i X_i.w
* a two-layer network with quadratic activation and frozen unit outer
  weights, g(U; X_j) = sum_i (X_j.u_i)^2 / (sqrt(m) d)

With mutually orthogonal rows every residual e_i evolves on its own, and
the rescaled residual z_i = kappa_i e_i follows z <- f_{a_i}(z) exactly.
The trainers and coordinate maps only use ring arithmetic on the arrays
they are handed, so they run unchanged on ``dtype=object`` arrays of
``mpmath.mpf`` when the exact identity has to be checked through a
chaotic stretch of iterations.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (BracketError, DimensionError, NonConvergedError, NoPositiveLabelError,
                     OrthogonalityError, NonPositiveAWarning, InvalidParam)
from .predictor import RunningMean
from .prng import SplitMix64

LOSS_DIVERGENCE = 1e12
ORTHO_TOL = 1e-10


def _as_array(x) -> np.ndarray:
    arr = np.asarray(x)
    if arr.dtype.kind in "biu":
        arr = arr.astype(float)
    return arr


def _is_orthogonal(X: np.ndarray, tol: float = ORTHO_TOL) -> bool:
    G = X @ X.T
    off = G - np.diag(np.diag(G))
    return bool(np.all(np.abs(off.astype(float)) <= tol))


@dataclass
class PhaseRetrievalSpec:
    """Generalized phase retrieval data: g(w; X_i) = gamma (X_i.w)^2 / 2 + c_i X_i.w."""

    gamma: float
    c: float | np.ndarray
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.X = _as_array(self.X)
        self.y = _as_array(self.y).reshape(-1)
        if self.X.ndim == 1:
            self.X = self.X.reshape(1, -1)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise DimensionError(f"X {self.X.shape} and y {self.y.shape} disagree")
        if self.gamma == 0:
            raise InvalidParam("gamma must be nonzero")
        c = _as_array(self.c)
        if c.ndim == 0:
            c = np.full(self.n, c.item(), dtype=c.dtype if c.dtype == object else float)
        if c.shape != (self.n,):
            raise DimensionError(f"c must be a scalar or have shape ({self.n},)")
        self.c = c

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def is_orthogonal(self, tol: float = ORTHO_TOL) -> bool:
        return _is_orthogonal(self.X, tol)

    def _check_w(self, w):
        w = _as_array(w)
        if w.shape != (self.d,):
            raise DimensionError(f"w must have shape ({self.d},), got {w.shape}")
        return w

    def predict(self, w, X=None) -> np.ndarray:
        X = self.X if X is None else _as_array(X)
        p = X @ self._check_w(w)
        c = self.c if X is self.X else self.c[:1].repeat(X.shape[0])
        return self.gamma * p * p / 2 + c * p

    def residuals(self, w) -> np.ndarray:
        return self.predict(w) - self.y

    def loss(self, w):
        e = self.residuals(w)
        return (e @ e) / (2 * self.n)

    def gradient(self, w) -> np.ndarray:
        w = self._check_w(w)
        p = self.X @ w
        e = self.gamma * p * p / 2 + self.c * p - self.y
        alpha = self.c + self.gamma * p
        return self.X.T @ (e * alpha) / self.n

    def hessian(self, w) -> np.ndarray:
        """(1/n) sum_i (alpha_i^2 + gamma e_i) X_i X_i^T."""
        w = self._check_w(w)
        p = self.X @ w
        e = self.gamma * p * p / 2 + self.c * p - self.y
        alpha = self.c + self.gamma * p
        return (self.X.T * (alpha * alpha + self.gamma * e)) @ self.X / self.n


@dataclass
class QuadNetSpec:
    """Hidden-layer training data for g(U; X_j) = sum_i (X_j.u_i)^2 / (sqrt(m) d)."""

    X: np.ndarray
    y: np.ndarray
    m: int

    def __post_init__(self):
        self.X = _as_array(self.X)
        self.y = _as_array(self.y).reshape(-1)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise DimensionError(f"X {self.X.shape} and y {self.y.shape} disagree")
        if self.m < 1:
            raise InvalidParam("width m must be >= 1")
        self.scale = 1.0 / (math.sqrt(self.m) * self.d)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def is_orthogonal(self, tol: float = ORTHO_TOL) -> bool:
        return _is_orthogonal(self.X, tol)

    def _check_U(self, U):
        U = _as_array(U)
        if U.shape != (self.d, self.m):
            raise DimensionError(f"U must have shape ({self.d}, {self.m}), got {U.shape}")
        return U

    def predict(self, U, X=None) -> np.ndarray:
        X = self.X if X is None else _as_array(X)
        P = X @ self._check_U(U)
        return (P * P).sum(axis=1) * self.scale

    def residuals(self, U) -> np.ndarray:
        return self.predict(U) - self.y

    def loss(self, U):
        e = self.residuals(U)
        return (e @ e) / (2 * self.n)

    def gradient(self, U) -> np.ndarray:
        U = self._check_U(U)
        P = self.X @ U
        e = (P * P).sum(axis=1) * self.scale - self.y
        return self.X.T @ (e[:, None] * P) * (2 * self.scale / self.n)


def pr_forward(spec: PhaseRetrievalSpec, w, i: int):
    if not 0 <= i < spec.n:
        raise DimensionError(f"sample index {i} out of range for n={spec.n}")
    p = spec.X[i] @ spec._check_w(w)
    return spec.gamma * p * p / 2 + spec.c[i] * p


def qn_forward(spec: QuadNetSpec, U, j: int):
    if not 0 <= j < spec.n:
        raise DimensionError(f"sample index {j} out of range for n={spec.n}")
    p = spec.X[j] @ spec._check_U(U)
    return (p @ p) * spec.scale


def gd_step_pr(spec: PhaseRetrievalSpec, w, eta: float) -> np.ndarray:
    """w - (eta/n) sum_i e_i alpha_i X_i with alpha_i = c_i + gamma X_i.w."""
    if not eta > 0:
        raise InvalidParam("eta must be > 0")
    w = spec._check_w(w)
    return w - eta * spec.gradient(w)


def gd_step_qn(spec: QuadNetSpec, U, eta: float) -> np.ndarray:
    """(I - A) U with A = (2 eta / (sqrt(m) d n)) sum_j e_j X_j X_j^T, applied as a rank-n update."""
    if not eta > 0:
        raise InvalidParam("eta must be > 0")
    U = spec._check_U(U)
    return U - eta * spec.gradient(U)


@dataclass(frozen=True)
class MapCoordinates:
    a: np.ndarray
    z: np.ndarray
    kappa: np.ndarray

    @property
    def a_max(self) -> float:
        return float(np.max(self.a.astype(float)))


def _require_orthogonal(spec, require: bool):
    if require and spec.n > 1 and not spec.is_orthogonal():
        raise OrthogonalityError(
            "rows of X are not mutually orthogonal; cubic-map coordinates do not apply")


def _warn_nonpositive(a: np.ndarray):
    bad = np.flatnonzero(a.astype(float) <= 0)
    if bad.size:
        warnings.warn(f"samples {bad.tolist()} have a_i <= 0 and are outside the phase theory",
                      NonPositiveAWarning, stacklevel=3)


def pr_kappa(spec: PhaseRetrievalSpec, eta) -> np.ndarray:
    return eta * spec.gamma * (spec.X * spec.X).sum(axis=1) / spec.n


def qn_kappa(spec: QuadNetSpec, eta) -> np.ndarray:
    return 2 * eta * (spec.X * spec.X).sum(axis=1) * spec.scale / spec.n


def derive_map_params_pr(spec: PhaseRetrievalSpec, eta, w, require_orthogonal: bool = True,
                         warn: bool = True) -> MapCoordinates:
    """kappa_i = eta gamma |X_i|^2 / n, a_i = (y_i + c_i^2/(2 gamma)) kappa_i, z_i = kappa_i e_i."""
    _require_orthogonal(spec, require_orthogonal)
    kappa = pr_kappa(spec, eta)
    beta = spec.y + spec.c * spec.c / (2 * spec.gamma)
    a = beta * kappa
    if warn:
        _warn_nonpositive(a)
    return MapCoordinates(a, kappa * spec.residuals(w), kappa)


def derive_map_params_qn(spec: QuadNetSpec, eta, U, require_orthogonal: bool = True,
                         warn: bool = True) -> MapCoordinates:
    """kappa_i = 2 eta |X_i|^2 / (sqrt(m) d n), a_i = kappa_i y_i, z_i = kappa_i e_i."""
    _require_orthogonal(spec, require_orthogonal)
    kappa = qn_kappa(spec, eta)
    a = kappa * spec.y
    if warn:
        _warn_nonpositive(a)
    return MapCoordinates(a, kappa * spec.residuals(U), kappa)


def loss_from_z(z, kappa):
    """(1/2n) sum_i z_i^2 / kappa_i^2."""
    z = _as_array(z)
    kappa = _as_array(kappa)
    return (z * z / (kappa * kappa)).sum() / (2 * z.shape[0])


def sharpness_formula(z, a, eta):
    """max_i (3 z_i + 2 a_i) / eta: the top Hessian eigenvalue for orthogonal rows."""
    if not eta > 0:
        raise InvalidParam("eta must be > 0")
    return np.max(3 * _as_array(z) + 2 * _as_array(a)) / eta


@dataclass
class RecordConfig:
    X_test: np.ndarray | None = None
    stride: int = 1
    avg_burn_in: int = 0  # extra steps dropped after the initialization


@dataclass
class TrainTrace:
    """Per-step record of a gradient-descent run (index t = weights after t updates)."""

    eta: float
    a: np.ndarray
    kappa: np.ndarray
    loss: np.ndarray
    sharpness: np.ndarray  # nan when the rows are not orthogonal
    z: np.ndarray  # (steps + 1, n)
    final_weights: np.ndarray
    orthogonal: bool
    diverged: bool = False
    divergence_step: int | None = None
    pred_steps: np.ndarray | None = None
    test_raw: np.ndarray | None = None  # (len(pred_steps), n_test)
    test_avg: np.ndarray | None = None
    z0: np.ndarray = field(default=None)

    @property
    def steps_run(self) -> int:
        return len(self.loss) - 1

    @property
    def governing_index(self) -> int:
        return int(np.argmax(self.a.astype(float)))


def _train(spec, predict, coords, step, eta, steps: int, w0, record: RecordConfig | None):
    if not eta > 0:
        raise InvalidParam("eta must be > 0")
    if steps < 0:
        raise InvalidParam("steps must be >= 0")
    record = record or RecordConfig()
    if record.stride < 1:
        raise InvalidParam("prediction stride must be >= 1")
    orthogonal = spec.n == 1 or spec.is_orthogonal()
    w = w0
    c0 = coords(spec, eta, w, require_orthogonal=False, warn=False)
    kappa, a = c0.kappa, c0.a
    obj = w0.dtype == object
    loss = np.empty(steps + 1, dtype=object if obj else float)
    sharp = np.full(steps + 1, np.nan, dtype=object if obj else float)
    Z = np.empty((steps + 1, spec.n), dtype=object if obj else float)

    tracker = None
    pred_steps, raw_rows, avg_rows = [], [], []
    if record.X_test is not None:
        tracker = RunningMean(np.asarray(record.X_test).shape[0], start=1 + record.avg_burn_in)

    diverged, div_step = False, None
    last = steps
    for t in range(steps + 1):
        e = spec.residuals(w)
        z = kappa * e
        Z[t] = z
        loss[t] = (e @ e) / (2 * spec.n)
        if orthogonal:
            sharp[t] = np.max(3 * z + 2 * a) / eta
        if tracker is not None:
            pred = predict(w, record.X_test)
            avg = tracker.update(pred)
            if t % record.stride == 0 or t == steps:
                pred_steps.append(t)
                raw_rows.append(np.array(pred, dtype=float))
                avg_rows.append(avg.copy())
        if not loss[t] <= LOSS_DIVERGENCE:  # also catches nan
            diverged, div_step, last = True, t, t
            break
        if t < steps:
            w = step(spec, w, eta)
    trace = TrainTrace(
        eta=eta, a=a, kappa=kappa, loss=loss[: last + 1], sharpness=sharp[: last + 1],
        z=Z[: last + 1], final_weights=w, orthogonal=orthogonal, diverged=diverged,
        divergence_step=div_step, z0=Z[0].copy())
    if tracker is not None:
        trace.pred_steps = np.array(pred_steps, dtype=np.int64)
        trace.test_raw = np.array(raw_rows)
        trace.test_avg = np.array(avg_rows)
    return trace


def train_pr(spec: PhaseRetrievalSpec, eta, steps: int, w0, record: RecordConfig | None = None) -> TrainTrace:
    """Full-batch gradient descent on phase retrieval, stopping once the loss exceeds 1e12."""
    w0 = spec._check_w(w0)
    return _train(spec, lambda w, X: spec.predict(w, X), derive_map_params_pr, gd_step_pr,
                  eta, steps, w0, record)


def train_qn(spec: QuadNetSpec, eta, steps: int, U0, record: RecordConfig | None = None) -> TrainTrace:
    """Full-batch gradient descent on the quadratic network's hidden layer."""
    U0 = spec._check_U(U0)
    return _train(spec, lambda U, X: spec.predict(U, X), derive_map_params_qn, gd_step_qn,
                  eta, steps, U0, record)


def _a_coefficients(spec) -> np.ndarray:
    """a_i at eta = 1 (a_i is linear in eta)."""
    if isinstance(spec, PhaseRetrievalSpec):
        beta = spec.y + spec.c * spec.c / (2 * spec.gamma)
        return (beta * pr_kappa(spec, 1.0)).astype(float)
    return (spec.y * qn_kappa(spec, 1.0)).astype(float)


def eta_for_target_amax(spec, target: float) -> float:
    """Step size at which max_i a_i equals ``target``."""
    if not target > 0:
        raise InvalidParam("target must be > 0")
    coef = _a_coefficients(spec)
    if not np.any(coef > 0):
        raise NoPositiveLabelError("no sample has a positive a_i coefficient; target unreachable")
    return float(target / coef.max())


def _runs_bounded(spec, eta, steps, w0) -> bool:
    train = train_pr if isinstance(spec, PhaseRetrievalSpec) else train_qn
    return not train(spec, eta, steps, w0).diverged


def tune_eta_max(spec, trial_steps: int, lo: float, hi: float, w0,
                 rel_width: float = 0.01, max_doublings: int = 60) -> float:
    """Largest eta (to ``rel_width`` relative) whose trial run keeps the loss below 1e12.

    Assumes divergence is monotone in eta.  ``hi`` is doubled until a trial
    diverges; ``lo`` must not diverge.
    """
    if not 0 < lo < hi:
        raise InvalidParam(f"need 0 < lo < hi, got lo={lo}, hi={hi}")
    if not _runs_bounded(spec, lo, trial_steps, w0):
        raise BracketError(f"training already diverges at the lower bracket eta={lo}")
    doublings = 0
    while _runs_bounded(spec, hi, trial_steps, w0):
        if doublings >= max_doublings:
            raise BracketError(f"no divergence found up to eta={hi}")
        lo, hi = hi, 2 * hi
        doublings += 1
    while hi - lo > rel_width * lo:
        mid = 0.5 * (lo + hi)
        if _runs_bounded(spec, mid, trial_steps, w0):
            lo = mid
        else:
            hi = mid
    return lo


def eta_grid(eta_max: float, count: int = 5) -> list[float]:
    """(i + 1)/count * eta_max for i = 0..count-1."""
    return [(i + 1) / count * eta_max for i in range(count)]


def _as_gradient(model) -> Callable[[np.ndarray], np.ndarray]:
    if hasattr(model, "gradient"):
        return model.gradient
    if callable(model):
        return model
    raise TypeError("model must be callable or expose .gradient(params)")


def hessian_sharpness_oracle(model, params, fd_step: float | None = None,
                             power_iters: int = 20_000, tol: float = 1e-6, seed: int = 0) -> float:
    """Largest Hessian eigenvalue from finite-difference Hessian-vector products.

    H v is approximated by (grad(p + h v) - grad(p - h v)) / (2h) with
    h = 1e-5 (1 + max|p|).  Power iteration first estimates the spectral
    radius r, then runs on H + r I, whose top eigenvector is that of the
    largest (not largest-magnitude) eigenvalue of H.  Converged when the
    eigen-residual |Bv - mu v| drops below tol * mu.
    """
    grad = _as_gradient(model)
    p = np.asarray(params, dtype=float)
    shape = p.shape
    flat = p.ravel()
    h = fd_step if fd_step is not None else 1e-5 * (1.0 + float(np.max(np.abs(flat), initial=0.0)))
    if not h > 0:
        raise InvalidParam("fd_step must be > 0")

    def hvp(v):
        dv = (h * v).reshape(shape)
        gp = np.asarray(grad((flat.reshape(shape) + dv)), dtype=float).ravel()
        gm = np.asarray(grad((flat.reshape(shape) - dv)), dtype=float).ravel()
        return (gp - gm) / (2 * h)

    v = SplitMix64(seed, 0xE16).normal(flat.size)
    v /= np.linalg.norm(v)
    radius = 0.0
    for _ in range(60):
        w = hvp(v)
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        radius = nw
        v = w / nw
    shift = radius
    v = SplitMix64(seed, 0xE17).normal(flat.size)
    v /= np.linalg.norm(v)
    mu = 0.0
    for _ in range(power_iters):
        bv = hvp(v) + shift * v
        mu = float(v @ bv)
        res = np.linalg.norm(bv - mu * v)
        if res <= tol * abs(mu):
            return mu - shift
        v = bv / np.linalg.norm(bv)
    raise NonConvergedError(
        f"power iteration did not settle in {power_iters} iterations (residual {res:.3g}, mu {mu:.6g})")
