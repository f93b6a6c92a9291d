"""Phase classification of the cubic map, periodic orbits and chaos witnesses.

Two routes to a phase:

* :func:`classify_by_parameter` reads it off the parameter using the
  proven boundaries 2*sqrt(2) - 2, 1, a*, 2.  The onset of chaos a* is
  only known to exist, so a certified upper bound (the root of
  4c^3 + 12c^2 - 15c - 23, :func:`estimate_chaos_onset`) stands in for it.
* :func:`classify_trajectory` looks at one finite orbit and decides from
  its shape (convergence, catapults, cycles, divergence).

Chaos is certified constructively by :func:`li_yorke_witness`, which finds
x0 with f^3(x0) <= x0 < f(x0) < f^2(x0); by the period-three theorem of
Li and Yorke this implies chaos.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import cubic_map as cm
from .errors import ConstructionFailed, InconclusiveError, InvalidParam


class Phase(str, enum.Enum):
    MONOTONIC = "Monotonic"
    CATAPULT = "Catapult"
    PERIODIC = "Periodic"
    CHAOTIC = "Chaotic"
    DIVERGENT = "Divergent"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class PeriodicOrbit:
    period: int
    points: tuple[float, ...]
    multiplier: float

    @property
    def stable(self) -> bool:
        return abs(self.multiplier) < 1.0


@dataclass(frozen=True)
class ChaosWitness:
    a: float
    x0: float
    iterates: tuple[float, float, float, float]

    def margins(self) -> tuple[float, float, float]:
        """Slacks of x0 - f^3, f - x0 and f^2 - f (all must be positive-ish)."""
        x0, b, c, d = self.iterates
        return (x0 - d, b - x0, c - b)


@dataclass(frozen=True)
class ClassifierConfig:
    eps_conv: float = 1e-10
    cycle_tol: float = 1e-8
    max_period: int = 64
    min_length: int = 1000
    burn_in_fraction: float = 0.5
    a_star_estimate: float | None = None


@dataclass(frozen=True)
class PhaseReport:
    phase: Phase
    evidence: PeriodicOrbit | ChaosWitness | int | None = None
    a_star_estimate: float | None = None
    config: ClassifierConfig = field(default_factory=ClassifierConfig)
    note: str = ""

    def describe(self) -> str:
        """One line such as ``Chaotic (witness x0=..., a* estimate 1.5981)``."""
        details = []
        ev = self.evidence
        if isinstance(ev, PeriodicOrbit):
            pts = ", ".join(f"{p:.7g}" for p in ev.points[:8])
            more = ", ..." if ev.period > 8 else ""
            details.append(f"period {ev.period}, points [{pts}{more}], multiplier {ev.multiplier:.6g}")
        elif isinstance(ev, ChaosWitness):
            details.append(f"witness x0={ev.x0:.10g}")
        elif isinstance(ev, int):
            details.append(f"diverged at step {ev}")
        if self.note:
            details.append(self.note)
        if self.a_star_estimate is not None:
            details.append(f"a* estimate {self.a_star_estimate:.4f}")
        if not details:
            return self.phase.value
        return f"{self.phase.value} ({', '.join(details)})"


def _chaos_onset_poly(c: float) -> float:
    return 4 * c**3 + 12 * c**2 - 15 * c - 23


_ONSET_CACHE: list[float] = []


def estimate_chaos_onset() -> float:
    """The c in (1, 2) with f_c((1 - 2c)/3) = 1, an upper bound on a*."""
    if _ONSET_CACHE:
        return _ONSET_CACHE[0]
    lo, hi = 1.0, 2.0  # p(1) = -22, p(2) = 27
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if _chaos_onset_poly(mid) < 0:
            lo = mid
        else:
            hi = mid
    c = 0.5 * (lo + hi)
    _ONSET_CACHE.append(c)
    return c


def classify_by_parameter(a: float, a_star_estimate: float | None = None) -> Phase:
    if not a > 0:
        raise InvalidParam(f"a must be > 0, got {a!r}")
    a_star = estimate_chaos_onset() if a_star_estimate is None else a_star_estimate
    if not 1.0 < a_star < 2.0:
        raise InvalidParam(f"a_star_estimate must lie in (1, 2), got {a_star!r}")
    if a <= cm.MONOTONE_LIMIT:
        return Phase.MONOTONIC
    if a <= 1.0:
        return Phase.CATAPULT
    if a < a_star:
        return Phase.PERIODIC
    if a <= 2.0:
        return Phase.CHAOTIC
    return Phase.DIVERGENT


def orbit_multiplier(a: float, points) -> float:
    """Product of f_a' over the cycle; |value| < 1 means the cycle attracts."""
    if isinstance(points, PeriodicOrbit):
        points = points.points
    out = 1.0
    for p in points:
        out *= float(cm.eval_f_prime(a, p))
    return out


def detect_cycle_values(values, tol: float = 1e-8, max_period: int = 64,
                        a: float | None = None) -> PeriodicOrbit | None:
    """Smallest period p <= max_period that the tail of ``values`` repeats with.

    Looks at the last 4 * max_period values and requires
    |z[T-i] - z[T-i-p]| <= tol for every i < 2p.  Cycle points are the
    averages of the matched repetitions, listed in time order ending at the
    last value.  The multiplier is filled in when ``a`` is given.
    """
    z = np.asarray(values, dtype=float)
    if max_period < 1:
        raise InvalidParam("max_period must be >= 1")
    if z.size == 0 or not np.all(np.isfinite(z[-min(z.size, 4 * max_period):])):
        return None
    window = z[-min(z.size, 4 * max_period):]
    T = window.size - 1
    for p in range(1, max_period + 1):
        reps = 2 * p
        if T - (reps - 1) - p < 0:
            break
        i = np.arange(reps)
        if np.all(np.abs(window[T - i] - window[T - i - p]) <= tol):
            # three repetitions of the cycle are available: average them
            block = window[T - 3 * p + 1:].reshape(3, p)
            pts = tuple(float(v) for v in block.mean(axis=0))
            mult = orbit_multiplier(a, pts) if a is not None else float("nan")
            return PeriodicOrbit(p, pts, mult)
    return None


def detect_cycle(orbit: cm.Orbit, tol: float = 1e-8, max_period: int = 64) -> PeriodicOrbit | None:
    if orbit.terminated_divergent:
        return None
    return detect_cycle_values(orbit.points, tol, max_period, a=orbit.a)


def _envelope_decreasing(absz: np.ndarray, min_drop: float, blocks: int = 8) -> bool:
    """True when block maxima of |z| shrink strictly: slow (e.g. neutral) convergence.

    The total drop must also exceed ``min_drop`` so rounding jitter on a
    settled cycle does not count.
    """
    n = absz.size // blocks
    if n < 2:
        return False
    maxima = absz[: n * blocks].reshape(blocks, n).max(axis=1)
    return bool(np.all(np.diff(maxima) < 0) and maxima[0] - maxima[-1] > min_drop)


def classify_sequence(values, *, diverged: bool = False, divergence_step: int | None = None,
                      a: float | None = None,
                      cfg: ClassifierConfig = ClassifierConfig()) -> PhaseReport:
    """Empirical phase of a residual-like sequence (map orbit or GD coordinate).

    Rules, in order: divergence flag -> Divergent; converging to 0 ->
    Monotonic when |z| never rises (beyond 1e-12 relative, ignoring values
    already below eps_conv) and Catapult otherwise; a cycle in the tail ->
    Periodic; anything else bounded -> Chaotic.  "Converging" means the
    final |z| < eps_conv, or the tail's block maxima of |z| strictly
    decrease by more than 8 cycle_tol in total, which catches the algebraically slow convergence at a = 1.
    """
    a_star = cfg.a_star_estimate if cfg.a_star_estimate is not None else estimate_chaos_onset()
    if diverged:
        return PhaseReport(Phase.DIVERGENT, divergence_step, a_star, cfg)
    z = np.asarray(values, dtype=float)
    if z.size < cfg.min_length:
        raise InconclusiveError(
            f"sequence has {z.size} points, need at least {cfg.min_length} to classify")
    if not np.all(np.isfinite(z)):
        bad = int(np.flatnonzero(~np.isfinite(z))[0])
        return PhaseReport(Phase.DIVERGENT, bad, a_star, cfg)
    absz = np.abs(z)
    burn = int(z.size * cfg.burn_in_fraction)
    tail = z[burn:]

    def converged(note: str = "") -> PhaseReport:
        rises = (absz[1:] > absz[:-1] * (1 + 1e-12)) & (absz[1:] >= cfg.eps_conv)
        phase = Phase.CATAPULT if rises.any() else Phase.MONOTONIC
        return PhaseReport(phase, None, a_star, cfg, note)

    if absz[-1] < cfg.eps_conv:
        return converged()
    # before cycle detection: near a = 1 successive iterates around 0 differ
    # by O(z^3), which would otherwise pass for a tiny 2-cycle
    if _envelope_decreasing(np.abs(tail), 8 * cfg.cycle_tol):
        return converged("converging slowly")
    cycle = detect_cycle_values(tail, cfg.cycle_tol, cfg.max_period, a=a)
    if cycle is not None:
        if cycle.period == 1 and abs(cycle.points[0]) < cfg.cycle_tol:
            return converged("converging slowly")
        return PhaseReport(Phase.PERIODIC, cycle, a_star, cfg)
    return PhaseReport(Phase.CHAOTIC, None, a_star, cfg)


def classify_trajectory(orbit: cm.Orbit, cfg: ClassifierConfig = ClassifierConfig()) -> PhaseReport:
    return classify_sequence(orbit.points, diverged=orbit.terminated_divergent,
                             divergence_step=orbit.divergence_step, a=orbit.a, cfg=cfg)


def _sign_change_roots(poly, lo: float, hi: float, samples: int = 10_000) -> list[float]:
    grid = np.linspace(lo, hi, samples + 1)
    vals = poly(grid)
    roots = [float(x) for x, v in zip(grid, vals) if v == 0]
    for i in np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0):
        left, right = float(grid[i]), float(grid[i + 1])
        fl = poly(left)
        while True:
            mid = 0.5 * (left + right)
            if mid <= left or mid >= right:
                break
            fm = poly(mid)
            if (fm > 0) == (fl > 0):
                left, fl = mid, fm
            else:
                right = mid
        roots.append(left)
    return sorted(roots)


def find_period2_points(a: float) -> list[PeriodicOrbit]:
    """All real 2-cycles of f_a on [-a, 2].

    f^2(z) - z factors as z (z + a)(z - 2) times the quadratic
    z^2 + (a-1) z + (1-a) and the quartic
    z^4 + (a-3) z^3 + (3-3a) z^2 + (2a-2) z + 2.  The quadratic's roots are
    taken in closed form; the quartic's are isolated by sign changes on a
    grid of 10^4 cells over [-a, 2] and bisected (tangential roots are
    missed).
    """
    cm._check_a(a)
    candidates: list[float] = []
    disc = (a - 1) * (a + 3)
    if disc > 0:
        s = np.sqrt(disc)
        candidates += [(-(a - 1) + s) / 2, (-(a - 1) - s) / 2]

    def quartic(z):
        return (((z + (a - 3)) * z + (3 - 3 * a)) * z + (2 * a - 2)) * z + 2

    candidates += _sign_change_roots(quartic, -a, 2.0)

    points = []
    for z in candidates:
        fz = cm.eval_f(a, z)
        if abs(cm.eval_f(a, fz) - z) <= 1e-9 and abs(fz - z) > 1e-9:
            points.append(float(z))
    orbits: list[PeriodicOrbit] = []
    used = [False] * len(points)
    for i, p in enumerate(points):
        if used[i]:
            continue
        used[i] = True
        q = float(cm.eval_f(a, p))
        for j in range(len(points)):
            if not used[j] and abs(points[j] - q) <= 1e-7:
                used[j] = True
                q = points[j]
                break
        pair = (p, q) if p >= q else (q, p)
        orbits.append(PeriodicOrbit(2, pair, orbit_multiplier(a, pair)))
    return orbits


def find_attracting_orbit(a: float, max_period: int = 64, T: int = 10_000,
                          tol: float = 1e-8) -> PeriodicOrbit | None:
    """Probe for an attracting cycle by following the orbit of the critical point (1-2a)/3.

    With negative Schwarzian derivative every attracting cycle captures a
    critical point, and the other critical point 1 lands on the repelling
    fixed point -a, so this orbit is the only candidate.  Heuristic: a cycle
    longer than ``max_period`` or slower than ``T`` steps is not seen.
    """
    if not 0 < a <= 2:
        return None
    orbit = cm.iterate_orbit(a, (1 - 2 * a) / 3, T)
    cycle = detect_cycle(orbit, tol, max_period)
    if cycle is None or not cycle.stable:
        return None
    return cycle


def li_yorke_witness(a: float) -> ChaosWitness | None:
    """Period-three-type witness f^3(x0) <= x0 < f(x0) < f^2(x0), or None.

    Construction: when the local maximum value f((1-2a)/3) reaches 1, pick
    y0 in ((1-2a)/3, 0) with f(y0) = 1 and x0 in (-a, (1-2a)/3) with
    f(x0) = y0.  Then f^2(x0) = 1 and f^3(x0) = f(1) = -a.
    """
    if not 1 < a <= 2:
        raise InvalidParam(f"witness construction needs 1 < a <= 2, got {a!r}")
    crit = (1 - 2 * a) / 3
    if cm.eval_f(a, crit) < 1:
        return None
    y0 = max(cm.preimages(a, 1.0, crit, 0.0))
    x0 = min(cm.preimages(a, y0, -a, crit))
    b = cm.eval_f(a, x0)
    c = cm.eval_f(a, b)
    d = cm.eval_f(a, c)
    w = ChaosWitness(a, x0, (x0, b, c, d))
    lower, mid1, mid2 = w.margins()
    if not (lower >= -1e-12 and mid1 > 1e-9 and mid2 > 1e-9):
        raise ConstructionFailed(f"witness inequality fails at a={a}: iterates {w.iterates}")
    return w


def period3_onset_scan(a_lo: float = 1.0 + 1e-6, a_hi: float = 2.0, samples: int = 20_000,
                       tol: float = 1e-12) -> float | None:
    """Smallest a in the range where the critical point (1-2a)/3 has period 3.

    A numerical probe of the conjectured characterization of a*; the
    result is not used as ground truth anywhere.
    """
    def h(a):
        c = (1 - 2 * a) / 3
        return cm.eval_f(a, cm.eval_f(a, cm.eval_f(a, c))) - c

    grid = np.linspace(a_lo, a_hi, samples + 1)
    vals = h(grid)
    for i in range(samples):
        if vals[i] == 0:
            return float(grid[i])
        if vals[i] * vals[i + 1] < 0:
            lo, hi, flo = float(grid[i]), float(grid[i + 1]), float(vals[i])
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                fm = h(mid)
                if (fm > 0) == (flo > 0):
                    lo, flo = mid, fm
                else:
                    hi = mid
            return 0.5 * (lo + hi)
    return None
