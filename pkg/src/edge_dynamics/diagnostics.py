"""Lyapunov exponents, bifurcation sweeps and the catapult interval lemma."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import cubic_map as cm
from .errors import DivergedError, InvalidParam

NEG_INF_FLOOR = 1e-300


@dataclass(frozen=True)
class SweepGrid:
    a_min: float = 1e-3
    a_max: float = 2.0
    steps: int = 2000
    z0: float = 0.1
    burn_in: int = 2000
    keep: int = 200
    seed: int = 0

    def __post_init__(self):
        if not self.a_min < self.a_max:
            raise InvalidParam(f"need a_min < a_max, got {self.a_min} >= {self.a_max}")
        if self.a_min <= 0:
            raise InvalidParam(f"a_min must be > 0, got {self.a_min}")
        if self.steps < 2:
            raise InvalidParam(f"steps must be >= 2, got {self.steps}")
        if self.burn_in < 0 or self.keep < 0:
            raise InvalidParam("burn_in and keep must be >= 0")

    def a_values(self) -> np.ndarray:
        return np.linspace(self.a_min, self.a_max, self.steps)


def _lyapunov_batch(a: np.ndarray, z0: float, n: int, burn_in: int):
    """Per-column exponent, -inf flag and divergence step for parameters ``a``."""
    a = np.asarray(a, dtype=float)
    z = np.full(a.shape, float(z0))
    total = np.zeros(a.shape)
    neg_inf = np.zeros(a.shape, dtype=bool)
    div_step = np.full(a.shape, -1, dtype=np.int64)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for t in range(burn_in + n):
            if t >= burn_in:
                d = np.abs(cm.eval_f_prime(a, z))
                tiny = d < NEG_INF_FLOOR
                neg_inf |= tiny
                total += np.log(np.where(tiny, 1.0, d))
            z = cm.eval_f(a, z)
            bad = ~(np.abs(z) <= cm.DIVERGE_THRESHOLD) & (div_step < 0)
            div_step[bad] = t + 1
    lam = total / n
    lam[neg_inf] = -np.inf
    return lam, neg_inf, div_step


def lyapunov_exponent(a: float, z0: float = 0.1, n: int = 100_000, burn_in: int = 1000) -> float:
    """Average of log|f_a'(z_i)| over i = burn_in .. burn_in + n - 1.

    Returns -inf when the orbit passes within 1e-300 of a critical point
    (e.g. a = 0.5, where 0 is superattracting).
    """
    cm._check_a(a)
    if n < 1:
        raise InvalidParam(f"n must be >= 1, got {n}")
    z = float(z0)
    total = 0.0
    neg_inf = False
    for t in range(burn_in + n):
        if t >= burn_in:
            d = abs((z - 1) * (3 * z + 2 * a - 1))
            if d < NEG_INF_FLOOR:
                neg_inf = True
            else:
                total += math.log(d)
        z = z * (z + a) * (z - 2) + z
        if not abs(z) <= cm.DIVERGE_THRESHOLD:
            raise DivergedError(f"orbit of z0={z0} under a={a} diverged at step {t + 1}", t + 1)
    return -math.inf if neg_inf else total / n


@dataclass(frozen=True)
class BifurcationTable:
    a: np.ndarray  # (steps,)
    values: np.ndarray  # (keep, steps); nan columns where diverged
    diverged: np.ndarray  # (steps,) bool

    def cell(self, i: int) -> np.ndarray:
        return self.values[:, i]

    def nearest_cell(self, a: float) -> np.ndarray:
        return self.cell(int(np.argmin(np.abs(self.a - a))))

    def rows(self):
        """(a, z) pairs, a ascending; diverged cells contribute nothing."""
        for i, a in enumerate(self.a):
            if self.diverged[i]:
                continue
            for z in self.values[:, i]:
                yield float(a), float(z)


def bifurcation_sweep(grid: SweepGrid) -> BifurcationTable:
    """Attractor samples: burn_in iterations from z0, then keep recorded ones.

    All cells are iterated together; each column follows exactly the
    scalar recursion, so the table does not depend on evaluation order.
    """
    a = grid.a_values()
    orbits, div = cm.iterate_batch(a, grid.z0, grid.burn_in + grid.keep)
    values = orbits[grid.burn_in + 1:, :] if grid.keep else np.empty((0, a.size))
    return BifurcationTable(a, values, div >= 0)


@dataclass(frozen=True)
class LyapunovTable:
    a: np.ndarray
    exponent: np.ndarray
    flag: tuple[str, ...]  # "ok", "neg_inf" or "diverged" per cell


def lyapunov_sweep(grid: SweepGrid, n: int | None = None) -> LyapunovTable:
    """:func:`lyapunov_exponent` over the grid; n defaults to grid.keep."""
    a = grid.a_values()
    n = grid.keep if n is None else n
    if n < 1:
        raise InvalidParam("need at least one averaging step")
    lam, neg_inf, div = _lyapunov_batch(a, grid.z0, n, grid.burn_in)
    flags = []
    for i in range(a.size):
        if div[i] >= 0:
            flags.append("diverged")
            lam[i] = np.nan
        elif neg_inf[i]:
            flags.append("neg_inf")
        else:
            flags.append("ok")
    return LyapunovTable(a, lam, tuple(flags))


def count_distinct(values, tol: float = 1e-6) -> int:
    """Number of clusters after single-linkage at ``tol`` on the sorted values."""
    v = np.sort(np.asarray(values, dtype=float))
    v = v[np.isfinite(v)]
    if v.size == 0:
        return 0
    return int(1 + np.count_nonzero(np.diff(v) > tol))


@dataclass(frozen=True)
class IntervalPartition:
    """The five subintervals I1..I5 of [-a, 2] used in the catapult phase."""

    a: float
    left_root: float  # (2 - a - sqrt(a^2 + 4a)) / 2
    right_root: float  # (2 - a + sqrt(a^2 + 4a)) / 2

    @property
    def intervals(self) -> tuple[tuple[float, float], ...]:
        a = self.a
        return ((-a, self.left_root), (self.left_root, 0.0), (0.0, 0.25),
                (0.25, self.right_root), (self.right_root, 2.0))

    def interval(self, k: int) -> tuple[float, float]:
        """I_k for k = 1..5."""
        return self.intervals[k - 1]

    def verify(self, samples: int = 10_000, tol: float = 1e-12) -> bool:
        """Dense check of f(I2) in I3 and f(I3) in I2 (endpoint slack ``tol``)."""
        (l2, r2), (l3, r3) = self.interval(2), self.interval(3)
        img2 = cm.eval_f(self.a, np.linspace(l2, r2, samples))
        img3 = cm.eval_f(self.a, np.linspace(l3, r3, samples))
        ok2 = np.all((img2 >= l3 - tol) & (img2 <= r3 + tol))
        ok3 = np.all((img3 >= l2 - tol) & (img3 <= r2 + tol))
        return bool(ok2 and ok3)


def catapult_partition(a: float) -> IntervalPartition:
    if not cm.MONOTONE_LIMIT < a <= 1.0:
        raise InvalidParam(f"catapult partition needs 2*sqrt(2)-2 < a <= 1, got {a!r}")
    s = np.sqrt(a * a + 4 * a)
    return IntervalPartition(a, float((2 - a - s) / 2), float((2 - a + s) / 2))


def catapult_growth_interval(a: float) -> tuple[float, float]:
    """Open interval of z > 0 where |f_a(z)| > |z|, i.e. g_a(z) < -1.

    The roots of g_a(z) = -1 are (2 - a -+ sqrt(a^2 + 4a - 4)) / 2; both are
    non-negative for a <= 1, so the region starts at the smaller root, not
    at 0 (they coincide only at a = 1).
    """
    if not cm.MONOTONE_LIMIT < a <= 1.0:
        raise InvalidParam(f"growth interval needs 2*sqrt(2)-2 < a <= 1, got {a!r}")
    s = np.sqrt(a * a + 4 * a - 4)
    return (float((2 - a - s) / 2), float((2 - a + s) / 2))
