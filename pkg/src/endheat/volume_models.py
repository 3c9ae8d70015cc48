"""Volume profiles of single ends, their h-functions and growth predicates.

Every profile is evaluated in log-radius coordinates ``u = log r``; the
oscillating construction reaches radii far beyond the float range (``log a_8``
is in the thousands for the second example), so ``log_volume`` and
``log_density`` are the primitive operations and ``volume``/``density`` are
thin exponentiating wrappers.
"""
from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, optimize

from .errors import BreakpointError, InconclusiveError, QuadratureError, RootError

TWO_PI = 2.0 * math.pi
LOG_TWO_PI = math.log(TWO_PI)

# one-sided evaluation offset at kinks of V'
BREAKPOINT_OFFSET = 1e-9
# divergence threshold for h used by classify_end
H_DIVERGENCE = 10.0
# constant accepted as "finite" by the grid-based predicates
RATIO_TOL = 4.0
H1H2_TOL = 10.0
GAMMA_LATTICE = np.round(np.arange(0.1, 1.95, 0.1), 10)


def _as_array(x):
    return np.asarray(x, dtype=float)


class VolumeProfile:
    """Volume function ``V`` of one end.

    Subclasses implement ``log_volume(u)`` and ``log_density(u)`` for
    ``u = log r``.  ``knots`` are log-radii where the closed form changes;
    ``breakpoints`` is the subset where ``V'`` jumps.
    """

    kind = "abstract"
    knots: tuple = ()
    breakpoints: tuple = ()

    def log_volume(self, u):
        raise NotImplementedError

    def log_density(self, u):
        raise NotImplementedError

    def volume(self, r):
        r = _as_array(r)
        with np.errstate(divide="ignore", over="ignore"):
            out = np.exp(self.log_volume(np.log(r)))
        return np.where(r > 0, out, 0.0)

    def density(self, r):
        r = _as_array(r)
        with np.errstate(over="ignore"):
            return np.exp(self.log_density(np.log(r)))

    def rv_ratio(self, u):
        """``r V'(r) / V(r)`` at ``r = e^u``."""
        u = _as_array(u)
        return np.exp(self.log_density(u) + u - self.log_volume(u))

    def log_weight(self, u):
        """``log W`` with ``W^2 = V' / (2 pi r)``."""
        u = _as_array(u)
        return 0.5 * (self.log_density(u) - LOG_TWO_PI - u)

    def describe(self) -> dict:
        return {"kind": self.kind}


@dataclass(frozen=True)
class PowerLogProfile(VolumeProfile):
    """``V(r) = scale * r**alpha * (log r)**beta``.

    With ``beta == 0`` this is a pure power on all of ``(0, inf)``.  Otherwise
    the formula holds for ``r >= e`` and below ``e`` the volume is the quadratic
    stub ``V(e) * (r/e)**2``.
    """

    alpha: float
    beta: float = 0.0
    scale: float = 1.0

    kind = "powerlog"

    def __post_init__(self):
        if self.alpha < 0 or self.scale <= 0:
            raise ValueError("need alpha >= 0 and scale > 0")
        if self.beta == 0 and self.alpha == 0:
            raise ValueError("V must be strictly increasing")
        if self.beta != 0 and self.alpha + self.beta <= 0:
            raise ValueError("alpha + beta must be positive for V to increase past e")

    @property
    def knots(self):
        return () if self.beta == 0 else (1.0,)

    @property
    def breakpoints(self):
        return () if self.beta == 0 or self.alpha + self.beta == 2 else (1.0,)

    def log_volume(self, u):
        u = _as_array(u)
        ls = math.log(self.scale)
        if self.beta == 0:
            return ls + self.alpha * u
        with np.errstate(divide="ignore", invalid="ignore"):
            outer = ls + self.alpha * u + self.beta * np.log(np.maximum(u, 1.0))
        inner = ls + self.alpha + 2.0 * (u - 1.0)
        return np.where(u >= 1.0, outer, inner)

    def log_density(self, u):
        u = _as_array(u)
        ls = math.log(self.scale)
        if self.beta == 0:
            return ls + math.log(self.alpha) + (self.alpha - 1.0) * u
        uu = np.maximum(u, 1.0)
        outer = ls + (self.alpha - 1.0) * uu + self.beta * np.log(uu) + np.log(self.alpha + self.beta / uu)
        inner = ls + self.alpha + math.log(2.0) - 2.0 + u
        return np.where(u >= 1.0, outer, inner)

    def describe(self):
        return {"kind": self.kind, "alpha": self.alpha, "beta": self.beta, "scale": self.scale}


class EuclideanPlaneProfile(VolumeProfile):
    """``V_1(r) = pi r^2``: the plane with Lebesgue measure."""

    kind = "m1"

    def log_volume(self, u):
        return math.log(math.pi) + 2.0 * _as_array(u)

    def log_density(self, u):
        return LOG_TWO_PI + _as_array(u)

    def __eq__(self, other):
        return isinstance(other, EuclideanPlaneProfile)

    def __hash__(self):
        return hash(self.kind)


# exp(2(s-1)) is the C^1 continuation of Z^2 = 1 + 2 log s below s = 1
_M3_CORE = math.pi * (1.0 + math.exp(-2.0)) / 2.0


def _m3_inner_volume(r):
    # 2 pi int_0^r e^{2(s-1)} s ds as a positive series (no cancellation near 0)
    r = _as_array(r)
    total = np.zeros_like(r)
    term = np.ones_like(r)  # (2r)^k / k!, starting at k = 0
    for k in range(1, 40):
        term = term * 2.0 * r / k
        if k >= 2:
            total = total + term * (k - 1) / 4.0
    return TWO_PI * math.exp(-2.0) * total


class ParabolicWeightProfile(VolumeProfile):
    """``V_3``: the plane with weight ``Z^2``, ``Z(r) = sqrt(1 + 2 log r)`` for r >= 1."""

    kind = "m3"
    knots = (0.0,)

    def log_volume(self, u):
        u = _as_array(u)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            pos = np.maximum(u, 0.0)
            outer = np.logaddexp(math.log(_M3_CORE), LOG_TWO_PI + 2.0 * pos + np.log(pos))
            inner = np.log(_m3_inner_volume(np.exp(np.minimum(u, 0.0))))
        return np.where(u >= 0.0, outer, inner)

    def log_density(self, u):
        u = _as_array(u)
        pos = np.maximum(u, 0.0)
        outer = LOG_TWO_PI + u + np.log1p(2.0 * pos)
        with np.errstate(over="ignore"):
            inner = LOG_TWO_PI + 2.0 * (np.exp(np.minimum(u, 0.0)) - 1.0) + u
        return np.where(u >= 0.0, outer, inner)

    def __eq__(self, other):
        return isinstance(other, ParabolicWeightProfile)

    def __hash__(self):
        return hash(self.kind)


class CustomProfile(VolumeProfile):
    """Profile given by plain callables ``volume(r)`` and ``density(r)``.

    Used for ad-hoc weights in checks; no log-space extension, so radii must
    stay inside the float range.
    """

    kind = "custom"

    def __init__(self, volume: Callable, density: Callable, breakpoints_r: Sequence[float] = ()):
        self._volume = volume
        self._density = density
        self.breakpoints = tuple(math.log(b) for b in breakpoints_r)
        self.knots = self.breakpoints

    def log_volume(self, u):
        with np.errstate(divide="ignore"):
            return np.log(self._volume(np.exp(_as_array(u))))

    def log_density(self, u):
        return np.log(self._density(np.exp(_as_array(u))))


class ScheduleMode(str, enum.Enum):
    EXAMPLE1 = "example1"
    EXAMPLE2 = "example2"


@dataclass(frozen=True, eq=False)
class OscillationSchedule:
    """Sequences ``a_k <= b_k < c_k <= d_k < a_{k+1}`` stored as logarithms.

    ``log_terms[k] = (log a, log b, log c, log d)`` for period ``k+1`` and
    ``log_a_next`` is ``log a_{N+1}``.
    """

    alpha: float
    beta: float
    mode: ScheduleMode
    delta: float | None
    log_terms: np.ndarray = field(repr=False)
    log_a_next: float = 0.0
    plateau: float = 1.0

    @property
    def N(self) -> int:
        return len(self.log_terms)

    @property
    def a1(self) -> float:
        return math.exp(self.log_terms[0, 0])

    @property
    def gamma(self) -> float:
        return 1.0 / (self.alpha - 2.0) + 1.0 / (2.0 - self.beta)

    @property
    def theta(self) -> float | None:
        if self.delta is None:
            return None
        return self.delta / (self.alpha - 2.0) + 1.0 / (2.0 - self.beta)

    @property
    def terms(self) -> np.ndarray:
        """Quadruples as plain numbers (``inf`` once they leave float range)."""
        with np.errstate(over="ignore"):
            return np.exp(self.log_terms)

    def log_a(self) -> np.ndarray:
        """``log a_1, ..., log a_{N+1}``."""
        return np.append(self.log_terms[:, 0], self.log_a_next)

    def residuals(self) -> dict:
        """Relative residuals of the defining relations and ordering slack."""
        la, lb, lc, ld = self.log_terms.T
        la_next = self.log_a()[1:]
        bc = np.expm1(lc - np.log(lc) / (self.alpha - 2.0) - lb)
        ad = np.expm1(ld + np.log(ld) / (2.0 - self.beta) - la_next)
        ordered = bool(np.all(la <= lb) and np.all(lb < lc) and np.all(lc <= ld) and np.all(ld < la_next))
        return {"bc": float(np.max(np.abs(bc))), "ad": float(np.max(np.abs(ad))), "ordered": ordered}

    def describe(self):
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "mode": self.mode.value,
            "delta": self.delta,
            "log_a1": float(self.log_terms[0, 0]),
            "N": self.N,
            "plateau": self.plateau,
        }


def _solve_c(log_b: float, p: float) -> float:
    # log c - p log log c = log b, branch log c > p
    f = lambda L: L - p * math.log(L) - log_b
    lo = max(log_b, p * (1.0 + 1e-12))
    hi = log_b + p * math.log(max(log_b, math.e)) + 2.0 * p + 1.0
    if not (f(lo) <= 0.0 < f(hi)):
        raise RootError(f"cannot bracket log c for log b = {log_b:.6g}; a1 too small")
    return optimize.brentq(f, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)


def build_schedule(
    alpha: float,
    beta: float,
    a1: float | None = None,
    N: int = 8,
    mode: ScheduleMode | str = ScheduleMode.EXAMPLE1,
    delta: float | None = None,
    *,
    log_a1: float | None = None,
    plateau: float = 1.0,
) -> OscillationSchedule:
    """Generate ``N`` periods of the oscillation schedule.

    ``b_k = plateau * a_k`` in both modes; ``d_k = plateau * c_k`` (first
    example) or ``d_k = c_k**delta`` (second example).  ``plateau = 1`` is the
    equality realization of the two-sided comparisons.
    """
    mode = ScheduleMode(mode)
    if (a1 is None) == (log_a1 is None):
        raise ValueError("give exactly one of a1, log_a1")
    la = math.log(a1) if log_a1 is None else float(log_a1)
    if not alpha > 2 or not 0 < beta < 2:
        raise ValueError("need alpha > 2 and 0 < beta < 2")
    if la <= 1.0 or math.log(la) <= 1.0:
        raise RootError("a1 must exceed e with log log a1 > 1")
    if N < 1:
        raise ValueError("N must be >= 1")
    if plateau < 1.0:
        raise ValueError("plateau must be >= 1")
    if mode is ScheduleMode.EXAMPLE2:
        if delta is None or not delta > 1:
            raise ValueError("second example needs delta > 1")
    elif delta is not None:
        raise ValueError("delta only applies to the second example")
    p = 1.0 / (alpha - 2.0)
    q = 1.0 / (2.0 - beta)
    lp = math.log(plateau)
    rows = []
    for _ in range(N):
        lb = la + lp
        lc = _solve_c(lb, p)
        ld = lc + lp if mode is ScheduleMode.EXAMPLE1 else delta * lc
        rows.append((la, lb, lc, ld))
        la = ld + q * math.log(ld)
    return OscillationSchedule(alpha, beta, mode, delta, np.array(rows), la, plateau)


# piece kinds of the oscillating volume
_QUAD, _RISE, _PLATEAU_LOG, _FALL = 0, 1, 2, 3


class OscillatingProfile(VolumeProfile):
    """``V_2 = 2 pi P`` with ``P`` the piecewise oscillating law built on a schedule.

    Beyond ``a_{N+1}`` the quadratic law continues indefinitely.
    """

    kind = "oscillating"

    def __init__(self, schedule: OscillationSchedule):
        self.schedule = schedule
        starts, kinds, anchors = [-np.inf], [_QUAD], [0.0]
        for la, lb, lc, ld in schedule.log_terms:
            if lb > la:
                starts.append(la), kinds.append(_QUAD), anchors.append(0.0)
            starts.append(lb), kinds.append(_RISE), anchors.append(lb)
            if ld > lc:
                starts.append(lc), kinds.append(_PLATEAU_LOG), anchors.append(0.0)
            starts.append(ld), kinds.append(_FALL), anchors.append(ld)
        starts.append(schedule.log_a_next), kinds.append(_QUAD), anchors.append(0.0)
        self._starts = np.array(starts)
        self._kinds = np.array(kinds)
        self._anchors = np.array(anchors)
        self.knots = tuple(float(s) for s in starts[1:])
        self.breakpoints = self.knots

    def _piece(self, u):
        idx = np.searchsorted(self._starts, u, side="right") - 1
        return self._kinds[idx], self._anchors[idx]

    def log_volume(self, u):
        u = _as_array(u)
        kind, anc = self._piece(u)
        a, b = self.schedule.alpha, self.schedule.beta
        with np.errstate(divide="ignore", invalid="ignore"):
            logu = np.log(np.maximum(u, 1e-300))
            loga = np.log(np.maximum(anc, 1e-300))
        val = np.select(
            [kind == _QUAD, kind == _RISE, kind == _PLATEAU_LOG],
            [2.0 * u, a * (u - anc) + 2.0 * anc, 2.0 * u + logu],
            b * (u - anc) + 2.0 * anc + loga,
        )
        return LOG_TWO_PI + val

    def log_density(self, u):
        u = _as_array(u)
        kind, anc = self._piece(u)
        a, b = self.schedule.alpha, self.schedule.beta
        with np.errstate(divide="ignore", invalid="ignore"):
            loga = np.log(np.maximum(anc, 1e-300))
            val = np.select(
                [kind == _QUAD, kind == _RISE, kind == _PLATEAU_LOG],
                [
                    math.log(2.0) + u,
                    math.log(a) + (a - 1.0) * u + (2.0 - a) * anc,
                    u + np.log(2.0 * np.maximum(u, 0.0) + 1.0),
                ],
                math.log(b) + (b - 1.0) * u + (2.0 - b) * anc + loga,
            )
        return LOG_TWO_PI + val

    def continuity_residual(self) -> float:
        """Largest relative jump of ``V`` across the piece boundaries."""
        k = np.array(self.knots)
        left = self.log_volume(np.nextafter(k, -np.inf))
        right = self.log_volume(k)
        return float(np.max(np.abs(np.expm1(right - left)))) if len(k) else 0.0

    def describe(self):
        return {"kind": self.kind, **self.schedule.describe()}


@dataclass(frozen=True)
class EndSpec:
    label: str
    profile: VolumeProfile


@dataclass(frozen=True)
class ManifoldSpec:
    """Ends glued at a single center ``o``.

    One-end specs are accepted so that single rays can be meshed; envelope
    functions that need several ends check ``k`` themselves.
    """

    ends: tuple
    center: str = "o"
    _classes: dict = field(default_factory=dict, repr=False, compare=False, hash=False)

    def __post_init__(self):
        ends = tuple(self.ends)
        object.__setattr__(self, "ends", ends)
        if not ends:
            raise ValueError("a manifold needs at least one end")
        labels = [e.label for e in ends]
        if len(set(labels)) != len(labels):
            raise ValueError(f"end labels must be unique: {labels}")

    @classmethod
    def of(cls, *profiles: VolumeProfile, labels: Sequence[str] | None = None) -> "ManifoldSpec":
        labels = labels or [f"E{i + 1}" for i in range(len(profiles))]
        return cls(tuple(EndSpec(l, p) for l, p in zip(labels, profiles)))

    @property
    def k(self) -> int:
        return len(self.ends)

    @property
    def profiles(self) -> list:
        return [e.profile for e in self.ends]

    def classify(self, r_max: float, per_decade: int = 16) -> list:
        """Per-end classification, cached per ``(r_max, per_decade)``."""
        key = (float(r_max), per_decade)
        if key not in self._classes:
            self._classes[key] = [classify_end(p, r_max, per_decade) for p in self.profiles]
        return self._classes[key]


def eval_volume(profile: VolumeProfile, r):
    """``V(r)``; scalar in, scalar out."""
    if np.any(_as_array(r) < 0):
        raise ValueError("r must be >= 0")
    out = profile.volume(r)
    return float(out) if np.ndim(out) == 0 else out


def eval_density(profile: VolumeProfile, r):
    """``V'(r)``; raises ``BreakpointError`` at a kink of ``V'``."""
    r = _as_array(r)
    if np.any(r <= 0):
        raise ValueError("r must be > 0")
    if profile.breakpoints:
        u = np.log(r)[..., None]
        bp = np.array(profile.breakpoints)
        if np.any(np.abs(u - bp) <= 1e-12 * np.maximum(1.0, np.abs(bp))):
            raise BreakpointError(f"V' is undefined at a breakpoint of {profile.kind}")
    out = profile.density(r)
    return float(out) if np.ndim(out) == 0 else out


def _h_integrand(profile):
    # s ds / V(s) with s = e^w
    return lambda w: math.exp(2.0 * w - float(profile.log_volume(w)))


def _quad(f, a, b, rel=1e-8):
    val, err, *rest = integrate.quad(f, a, b, epsabs=0.0, epsrel=1e-11, limit=400, full_output=1)
    if len(rest) > 1 or err > rel * abs(val) + 1e-300:
        raise QuadratureError(f"tolerance {rel} unmet on [{a:.6g}, {b:.6g}] (err {err:.3g})")
    return val


def h_integral_log(profile: VolumeProfile, log_r) -> np.ndarray:
    """``int_1^r s ds / V(s)`` for ``log r >= 0`` given as ``log_r`` (vectorized)."""
    targets = np.atleast_1d(_as_array(log_r))
    if np.any(targets < 0):
        raise ValueError("log r must be >= 0")
    hi = float(targets.max()) if targets.size else 0.0
    cuts = np.unique(np.concatenate([[0.0], targets, [k for k in profile.knots if 0.0 < k < hi]]))
    f = _h_integrand(profile)
    pieces = [_quad(f, a, b) for a, b in zip(cuts[:-1], cuts[1:])]
    cum = np.concatenate([[0.0], np.cumsum(pieces)])
    out = cum[np.searchsorted(cuts, targets)]
    return out.reshape(np.shape(log_r))


def compute_h_log(profile: VolumeProfile, log_r):
    """``h`` as a function of ``log r`` (any ``log r``; ``h = 1`` below ``r = 1``)."""
    lr = _as_array(log_r)
    val = 1.0 + h_integral_log(profile, np.maximum(lr, 0.0))
    return float(val) if np.ndim(val) == 0 else val


def compute_h(profile: VolumeProfile, r):
    """``h(r) = 1 + max(0, int_1^r s ds / V(s))``."""
    with np.errstate(divide="ignore"):
        return compute_h_log(profile, np.log(_as_array(r)))


def _log_grid(u_lo: float, u_hi: float, per_decade: int) -> np.ndarray:
    n = max(int(math.ceil((u_hi - u_lo) / math.log(10.0) * per_decade)), 1) + 1
    return np.linspace(u_lo, u_hi, n)


def _away_from_breakpoints(profile, u):
    if not profile.breakpoints:
        return u
    bp = np.array(profile.breakpoints)
    near = np.min(np.abs(u[:, None] - bp[None, :]), axis=1) < BREAKPOINT_OFFSET * np.maximum(1.0, np.abs(u))
    return u[~near]


@dataclass
class EndClassification:
    """Outcome of the grid predicates for one end.

    ``None`` in a boolean field means the grid evidence was mixed.
    """

    parabolic: bool | None
    subcritical: bool | None
    regular: bool
    h_max: float
    h_growth_ratio: float
    sub_constant: float
    sub_delta: float
    gamma1: float | None
    gamma2: float | None
    regular_constants: tuple[float, float] | None
    inconclusive: list[str] = field(default_factory=list)

    def require(self, *names: str):
        bad = [n for n in names if n in self.inconclusive]
        if bad:
            raise InconclusiveError(f"grid evidence mixed for {', '.join(bad)}")
        return self


def _late_early(u, values):
    # split the grid at the geometric mean of u (midpoint in log log r)
    mid = math.sqrt(u[0] * u[-1])
    k = int(np.searchsorted(u, mid))
    k = min(max(k, 1), len(u) - 1)
    return k


def fit_regular(log_v: np.ndarray, u: np.ndarray, tol: float = RATIO_TOL):
    """Smallest lattice exponents pinching ``V(R)/V(r)`` with constants within ``tol``.

    Returns ``(gamma1, gamma2, C_upper, c_lower)``; a gamma is ``None`` when
    no lattice value works.
    """
    g1 = g2 = None
    c_up = c_lo = None
    for g in GAMMA_LATTICE:
        f = log_v - (2.0 + g) * u
        worst = float(np.max(f - np.minimum.accumulate(f)))
        if worst <= math.log(tol):
            g1, c_up = float(g), math.exp(worst)
            break
    for g in GAMMA_LATTICE:
        f = log_v - (2.0 - g) * u
        worst = float(np.min(f - np.maximum.accumulate(f)))
        if worst >= -math.log(tol):
            g2, c_lo = float(g), math.exp(worst)
            break
    return g1, g2, c_up, c_lo


def classify_end(profile: VolumeProfile, r_max: float, per_decade: int = 16, *, log_r_max: float | None = None) -> EndClassification:
    """Grid evaluation of parabolicity, subcriticality and regularity.

    The grid is geometric in ``r`` from ``e`` to ``r_max``.  Parabolic: ``h``
    exceeds ``H_DIVERGENCE`` while still increasing, or its increment over the
    upper half of the grid (split at the midpoint in ``log log r``) is at least
    0.6 times the increment over the lower half; an increment ratio below 0.35
    means bounded ``h``.  Subcritical uses the same split on ``h V / r^2``.
    """
    u_hi = math.log(r_max) if log_r_max is None else float(log_r_max)
    if u_hi < 2.0:
        raise ValueError("r_max must be >= e^2")
    u = _log_grid(1.0, u_hi, per_decade)
    h = compute_h_log(profile, u)
    log_v = profile.log_volume(u)
    inconclusive = []

    k = _late_early(u, h)
    early = h[k] - h[0]
    late = h[-1] - h[k]
    growth = late / early if early > 0 else math.inf
    slope = np.polyfit(np.log(u[k:]), h[k:], 1)[0] if len(u) - k >= 2 else late
    if (h[-1] > H_DIVERGENCE and slope > 0) or growth >= 0.6:
        parabolic = True
    elif growth <= 0.35:
        parabolic = False
    else:
        parabolic = None
        inconclusive.append("parabolic")

    q = h * np.exp(log_v - 2.0 * u)
    q_ratio = float(np.max(q[k:]) / np.max(q[: k + 1]))
    if q_ratio <= 1.5:
        subcritical = True
    elif q_ratio >= 2.5:
        subcritical = False
    else:
        subcritical = None
        inconclusive.append("subcritical")
    sub_constant = float(np.max(q))
    uu = _away_from_breakpoints(profile, u[k:])
    sub_delta = float(2.0 - np.max(profile.rv_ratio(uu)))

    g1, g2, c_up, c_lo = fit_regular(log_v, u)
    regular = g1 is not None and g2 is not None and 2 * g1 + g2 < 2
    return EndClassification(
        parabolic=parabolic,
        subcritical=subcritical,
        regular=bool(regular),
        h_max=float(h[-1]),
        h_growth_ratio=float(growth),
        sub_constant=sub_constant,
        sub_delta=sub_delta,
        gamma1=g1 if regular else None,
        gamma2=g2 if regular else None,
        regular_constants=(c_up, c_lo) if regular else None,
        inconclusive=inconclusive,
    )


def _probe_grid(profile, u_lo, u_hi, per_decade=64):
    u = _log_grid(u_lo, u_hi, per_decade)
    extra = []
    for b in profile.breakpoints:
        if u_lo < b < u_hi:
            off = BREAKPOINT_OFFSET * max(1.0, abs(b))
            extra += [b - off, b + off]
    return np.unique(np.concatenate([u, extra]))


def check_doubling(profile: VolumeProfile, r_max: float, r_min: float = 1.0, *, log_r_max: float | None = None) -> float:
    """``sup V(2r)/V(r)`` over a dense geometric grid (breakpoints included)."""
    u_hi = math.log(r_max) if log_r_max is None else float(log_r_max)
    u = _probe_grid(profile, math.log(r_min), u_hi - math.log(2.0))
    u = np.unique(np.concatenate([u, np.array(profile.breakpoints) - math.log(2.0)]))
    u = u[(u >= math.log(r_min)) & (u <= u_hi - math.log(2.0))]
    return float(np.exp(np.max(profile.log_volume(u + math.log(2.0)) - profile.log_volume(u))))


def check_rv_prime(profile: VolumeProfile, r_max: float, r_min: float = 1.0, *, log_r_max: float | None = None) -> float:
    """``sup r V'(r) / V(r)`` over a grid excluding breakpoints (one-sided limits)."""
    u_hi = math.log(r_max) if log_r_max is None else float(log_r_max)
    u = _probe_grid(profile, math.log(r_min), u_hi)
    return float(np.max(profile.rv_ratio(u)))


@dataclass(frozen=True)
class H1H2Result:
    h1_ok: bool
    h1_constant: float
    h2_ok: bool
    h2_constant: float


def _sliding_extremes(u, w, width):
    # max(w) - min(w) over windows [u_i, u_i + width] (u sorted)
    n = len(u)
    out = np.full(n, -np.inf)
    dmax, dmin = deque(), deque()
    j = 0
    for i in range(n):
        if u[i] + width > u[-1] + 1e-12:
            break
        while j < n and u[j] <= u[i] + width + 1e-12:
            while dmax and w[dmax[-1]] <= w[j]:
                dmax.pop()
            dmax.append(j)
            while dmin and w[dmin[-1]] >= w[j]:
                dmin.pop()
            dmin.append(j)
            j += 1
        while dmax[0] < i:
            dmax.popleft()
        while dmin[0] < i:
            dmin.popleft()
        out[i] = w[dmax[0]] - w[dmin[0]]
    return out[np.isfinite(out)]


def check_h1_h2(profile: VolumeProfile, r_max: float, r_min: float = 1.0, tol: float = H1H2_TOL, *, log_r_max: float | None = None) -> H1H2Result:
    """Dyadic oscillation of ``W`` and ``int_0^r W^2 s ds / (W^2 r^2)`` on a grid.

    ``W^2 = V'/(2 pi r)``; since ``int_0^r W^2 s ds = V/(2 pi)`` the second
    quantity equals ``V / (r V')``.
    """
    u_hi = math.log(r_max) if log_r_max is None else float(log_r_max)
    u = _probe_grid(profile, math.log(r_min), u_hi, per_decade=128)
    lw = profile.log_weight(u)
    h1 = float(np.exp(np.max(_sliding_extremes(u, lw, math.log(2.0)))))
    h2 = float(np.max(1.0 / profile.rv_ratio(u)))
    return H1H2Result(h1 <= tol, h1, h2 <= tol, h2)


def _period_integrals(schedule: OscillationSchedule) -> np.ndarray:
    """Exact ``int s ds / P(s)`` over the four segments of each period, shape (N, 4)."""
    a, b = schedule.alpha, schedule.beta
    la, lb, lc, ld = schedule.log_terms.T
    la_next = schedule.log_a()[1:]
    seg1 = lb - la
    seg2 = -np.expm1((a - 2.0) * (lb - lc)) / (a - 2.0)
    seg3 = np.log(ld / lc)
    seg4 = np.expm1((2.0 - b) * (la_next - ld)) / ((2.0 - b) * ld)
    return np.stack([seg1, seg2, seg3, seg4], axis=1)


def h2_partial_sums(schedule: OscillationSchedule, n: int) -> float:
    """Closed form of ``h_2(a_{n+1}) = 1 + int_1^{a_1} + sum_{k<=n} int_{a_k}^{a_{k+1}}``.

    ``n = 0`` gives ``h_2(a_1) = 1 + log(a_1) / (2 pi)``.
    """
    if not 0 <= n <= schedule.N:
        raise ValueError(f"n must lie in [0, {schedule.N}]")
    per = _period_integrals(schedule)[:n].sum()
    return 1.0 + (schedule.log_terms[0, 0] + per) / TWO_PI


def h2_at_a(schedule: OscillationSchedule, n: int) -> float:
    """``h_2(a_n)`` for ``1 <= n <= N+1``."""
    return h2_partial_sums(schedule, n - 1)


def h2_estimate_sum(schedule: OscillationSchedule, n: int) -> float:
    """The comparison sum ``sum_{k<=n} (log(b_k/a_k) + log(log d_k/log c_k) + 1)``."""
    la, lb, lc, ld = schedule.log_terms[:n].T
    return float(np.sum((lb - la) + np.log(ld / lc) + 1.0))


def schedule_growth(schedule: OscillationSchedule) -> dict:
    """Constants of the growth laws of ``a_n``.

    First example: ``log a_n - gamma n log n`` (lower constant) and the least
    ``gamma'`` with ``log a_n <= log a_1 + gamma' n log n``.  Second example:
    ``log a_{k+1} - delta log a_k`` (lower) and, for ``eta = delta + 0.5``,
    ``max log a_{k+1} - eta log a_k`` (upper).
    """
    la = schedule.log_a()
    n = np.arange(1, len(la) + 1, dtype=float)
    if schedule.mode is ScheduleMode.EXAMPLE1:
        nlogn = n * np.log(n)
        lower = float(np.min(la - schedule.gamma * nlogn))
        gp = float(np.max((la[1:] - la[0]) / nlogn[1:]))
        return {"log_c": lower, "gamma": schedule.gamma, "gamma_prime": gp}
    eta = schedule.delta + 0.5
    lower = float(np.min(la[1:] - schedule.delta * la[:-1]))
    upper = float(np.max(la[1:] - eta * la[:-1]))
    return {"log_c": lower, "log_C": upper, "delta": schedule.delta, "eta": eta}
