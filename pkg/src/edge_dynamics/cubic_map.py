"""The cubic map f_a(z) = z * g_a(z) with g_a(z) = (z + a)(z - 2) + 1.

All evaluators accept Python floats or numpy arrays (broadcasting over
``a`` and ``z``) and also work with arbitrary-precision scalars such as
``mpmath.mpf`` because they only use ring arithmetic.

For z in [-a, 2] and 0 < a <= 2 the map sends the interval into itself;
outside it every orbit eventually runs off to infinity, which is why
iteration stops once ``|z| > DIVERGE_THRESHOLD``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CriticalPointError, InvalidParam, NoRootError

DIVERGE_THRESHOLD = 1e6
MONOTONE_LIMIT = 2.0 * np.sqrt(2.0) - 2.0  # 0.828427...


def _check_a(a) -> None:
    if np.any(np.asarray(a, dtype=float) <= 0):
        raise InvalidParam(f"map parameter a must be > 0, got {a!r}")


@dataclass(frozen=True)
class MapParam:
    a: float

    def __post_init__(self):
        _check_a(self.a)


def eval_g(a, z):
    return (z + a) * (z - 2) + 1


def eval_f(a, z):
    # factored form: better conditioned near the roots -a, 0, 2 than monomials
    return z * (z + a) * (z - 2) + z


def eval_f_expanded(a, z):
    """Monomial form z^3 + (a-2) z^2 + (1-2a) z, kept for cross-checks."""
    return ((z + (a - 2)) * z + (1 - 2 * a)) * z


def eval_f_prime(a, z):
    return (z - 1) * (3 * z + 2 * a - 1)


def eval_f_second(a, z):
    return 6 * z + 2 * a - 4


def eval_schwarzian(a, z) -> float:
    """Schwarzian derivative f'''/f' - 1.5 (f''/f')**2 (scalar z)."""
    d1 = eval_f_prime(a, z)
    if abs(d1) < 1e-12:
        raise CriticalPointError(f"f'_a(z) = {d1!r} at z={z!r}; Schwarzian undefined")
    r = eval_f_second(a, z) / d1
    return 6.0 / d1 - 1.5 * r * r


def fixed_points(a: float) -> tuple[float, float, float]:
    _check_a(a)
    return (-a, 0.0, 2.0)


def critical_points(a: float) -> tuple[float, float]:
    """Local maximum (1 - 2a)/3 and local minimum 1, in ascending order."""
    _check_a(a)
    return ((1.0 - 2.0 * a) / 3.0, 1.0)


def local_extrema_values(a: float) -> tuple[float, float]:
    """(f_a at the local max, f_a at the local min) = ((4a^3+12a^2-15a+4)/27, -a)."""
    _check_a(a)
    return ((4 * a**3 + 12 * a**2 - 15 * a + 4) / 27.0, -a)


@dataclass(frozen=True)
class Orbit:
    param: MapParam
    z0: float
    points: np.ndarray = field(repr=False)
    terminated_divergent: bool = False
    divergence_step: int | None = None

    def __len__(self) -> int:
        return len(self.points)

    @property
    def a(self) -> float:
        return self.param.a


def iterate_orbit(a: float, z0: float, T: int) -> Orbit:
    """Iterate z_{t+1} = f_a(z_t) for T steps, stopping early on divergence."""
    param = MapParam(a)
    if T < 0:
        raise InvalidParam(f"T must be >= 0, got {T}")
    pts = [float(z0)]
    z = float(z0)
    step = None
    if abs(z) > DIVERGE_THRESHOLD:
        step = 0
    else:
        for t in range(1, T + 1):
            z = eval_f(a, z)
            pts.append(z)
            if not abs(z) <= DIVERGE_THRESHOLD:  # also catches nan
                step = t
                break
    arr = np.array(pts)
    arr.setflags(write=False)
    return Orbit(param, float(z0), arr, step is not None, step)


def iterate_batch(a, z0, T: int) -> tuple[np.ndarray, np.ndarray]:
    """Iterate many orbits at once.

    ``a`` and ``z0`` broadcast to a common shape ``(N,)``.  Returns the
    ``(T + 1, N)`` array of iterates (nan after a column diverges) and the
    per-column divergence step (-1 when the column stayed bounded).  Each
    entry equals what :func:`iterate_orbit` produces for that column.
    """
    _check_a(a)
    a_arr, z = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(z0, dtype=float))
    a_arr = a_arr.ravel().copy()
    z = z.ravel().copy()
    out = np.full((T + 1, z.size), np.nan)
    out[0] = z
    div_step = np.full(z.size, -1, dtype=np.int64)
    alive = np.abs(z) <= DIVERGE_THRESHOLD
    div_step[~alive] = 0
    idx = np.flatnonzero(alive)
    zc, ac = z[idx], a_arr[idx]
    for t in range(1, T + 1):
        if idx.size == 0:
            break
        zc = eval_f(ac, zc)
        out[t, idx] = zc
        ok = np.abs(zc) <= DIVERGE_THRESHOLD
        if not ok.all():
            div_step[idx[~ok]] = t
            idx, zc, ac = idx[ok], zc[ok], ac[ok]
    return out, div_step


def _bisect_piece(a: float, target: float, lo: float, hi: float) -> float | None:
    """Root of f_a - target on [lo, hi] where f_a is monotone, or None."""
    flo = eval_f(a, lo) - target
    fhi = eval_f(a, hi) - target
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if (flo > 0) == (fhi > 0):
        return None
    # bisect to full double resolution (finer than the 1e-13 width contract)
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = eval_f(a, mid) - target
        if fm == 0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi, fhi = mid, fm
    return lo if abs(flo) <= abs(fhi) else hi


def preimages(a: float, target: float, lo: float, hi: float) -> list[float]:
    """All z in [lo, hi] with f_a(z) = target, ascending.

    The interval is cut at the critical points and each monotone piece is
    bisected.  Only roots with a sign change (or an exact zero at a piece
    endpoint) are found; a tangency strictly inside a piece is missed.
    """
    _check_a(a)
    if not lo < hi:
        raise InvalidParam(f"need lo < hi, got [{lo}, {hi}]")
    cuts = [lo] + [c for c in critical_points(a) if lo < c < hi] + [hi]
    tol = 1e-12 * max(1.0, abs(target))
    roots: list[float] = []
    for left, right in zip(cuts[:-1], cuts[1:]):
        r = _bisect_piece(a, target, left, right)
        if r is None:
            # a critical-point endpoint can touch the target without a sign change
            for end in (left, right):
                if abs(eval_f(a, end) - target) <= tol:
                    r = end
                    break
        if r is None or abs(eval_f(a, r) - target) > tol:
            continue
        if not roots or abs(r - roots[-1]) > 1e-12:
            roots.append(r)
    if not roots:
        raise NoRootError(f"f_{a}(z) = {target} has no solution in [{lo}, {hi}]")
    return roots
