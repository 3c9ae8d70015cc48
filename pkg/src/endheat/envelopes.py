"""Closed-form heat kernel and Poincare envelopes for manifolds with ends.

All envelopes are evaluated from the end volumes ``V_i`` and h-functions
``h_i`` in log space, so they stay finite for the oscillating profiles whose
radii leave the float range.  Index selections (largest end ``m``, second
largest ``n``) break ties toward the lowest index.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import COEError, NoDominatingEndError, NotApplicableError
from .volume_models import (
    GAMMA_LATTICE,
    RATIO_TOL,
    ManifoldSpec,
    VolumeProfile,
    compute_h_log,
    fit_regular,
)

__all__ = [
    "ManifoldSpec",
    "EnvelopeCurve",
    "COEDecomposition",
    "DominatingResult",
    "smallest_end_envelope",
    "largest_end_envelope",
    "check_dominating",
    "min_min_upper",
    "log_min_min_upper",
    "offdiag_assemble",
    "offdiag_regimes_2_1",
    "subcritical_all_envelope",
    "poincare_envelope",
    "check_coe",
    "ly_envelope",
    "lex_order",
]

DEFAULT_B = 0.25
# window used to classify ends when no radius is given
DEFAULT_CLASSIFY_RMAX = 1e8


def _u_of_t(t):
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("t must be positive")
    return 0.5 * np.log(t)


def _log_vh(spec: ManifoldSpec, u):
    """``log V_i(e^u)`` and ``log h_i(e^u)``, shape ``(k,) + u.shape``."""
    u = np.asarray(u, dtype=float)
    lv = np.stack([np.asarray(p.log_volume(u), dtype=float) * np.ones_like(u) for p in spec.profiles])
    lh = np.stack([np.log(np.asarray(compute_h_log(p, u), dtype=float)) * np.ones_like(u) for p in spec.profiles])
    return lv, lh


def _scalar(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


def _classes(spec: ManifoldSpec, r_max: float | None):
    return spec.classify(r_max or DEFAULT_CLASSIFY_RMAX)


@dataclass
class EnvelopeCurve:
    """A named envelope ``t -> value`` (or ``r -> value``) with regime labels.

    ``regime`` maps the same argument to a label string; the labels over a
    grid partition it into the intervals reported by ``regimes``.
    """

    quantity: str
    formula: str
    fn: Callable
    regime: Callable | None = None

    def __call__(self, x):
        return self.fn(x)

    def regimes(self, grid) -> list:
        """Maximal runs ``(lo, hi, label)`` of constant label along ``grid``."""
        grid = np.asarray(grid, dtype=float)
        if self.regime is None:
            return [(float(grid[0]), float(grid[-1]), self.formula)]
        labels = [self.regime(x) for x in grid]
        runs, start = [], 0
        for i in range(1, len(grid) + 1):
            if i == len(grid) or labels[i] != labels[start]:
                runs.append((float(grid[start]), float(grid[i - 1]), labels[start]))
                start = i
        return runs


def smallest_end_envelope(spec: ManifoldSpec, t, *, r_max: float | None = None):
    """``1 / min_i V_i(sqrt t) h_i(sqrt t)^2`` (needs a non-parabolic end)."""
    if all(c.parabolic for c in _classes(spec, r_max)):
        raise NotApplicableError("all ends are parabolic")
    lv, lh = _log_vh(spec, _u_of_t(t))
    return _scalar(np.exp(-np.min(lv + 2.0 * lh, axis=0)))


@dataclass
class DominatingResult:
    """Outcome of the fixed-dominating-end test.

    ``lower`` is ``min_r V_m / max_i V_i`` and ``upper`` is
    ``max_r V_m h_m^2 / min_i V_i h_i^2`` for the best candidate ``m``.
    """

    ok: bool
    m: int | None
    lower: float
    upper: float
    violating_radius: float | None
    tol: float = RATIO_TOL

    def __bool__(self):
        return self.ok


def _dominating_from_logs(lv, lh, u, tol):
    k = lv.shape[0]
    lvh2 = lv + 2.0 * lh
    top_v = np.max(lv, axis=0)
    low_vh2 = np.min(lvh2, axis=0)
    best = None
    for m in range(k):
        lo = lv[m] - top_v  # <= 0
        hi = lvh2[m] - low_vh2  # >= 0
        score = max(-lo.min(), hi.max())
        if best is None or score < best[0] - 1e-12:
            worst = int(np.argmax(np.maximum(-lo, hi)))
            best = (score, m, float(np.exp(lo.min())), float(np.exp(hi.max())), worst)
    score, m, lower, upper, worst = best
    ok = bool(score <= math.log(tol))
    return DominatingResult(ok, m, lower, upper, None if ok else float(np.exp(u[worst])), tol)


def check_dominating(spec: ManifoldSpec, r_grid=None, *, log_r_grid=None, tol: float = RATIO_TOL) -> DominatingResult:
    """Whether one end is uniformly largest in ``V`` and smallest in ``V h^2``.

    Both comparisons must hold with constants within ``tol`` over the whole
    grid; otherwise ``violating_radius`` is where the best candidate is worst.
    """
    if (r_grid is None) == (log_r_grid is None):
        raise ValueError("give exactly one of r_grid, log_r_grid")
    u = np.log(np.asarray(r_grid, dtype=float)) if log_r_grid is None else np.asarray(log_r_grid, dtype=float)
    if spec.k == 1:
        return DominatingResult(True, 0, 1.0, 1.0, None, tol)
    lv, lh = _log_vh(spec, u)
    return _dominating_from_logs(lv, lh, u, tol)


def largest_end_envelope(spec: ManifoldSpec, t, *, r_max: float | None = None, tol: float = RATIO_TOL):
    """``1 / V_m(sqrt t)`` for the largest end ``m(sqrt t)`` of a parabolic manifold."""
    if not all(c.parabolic for c in _classes(spec, r_max)):
        raise NotApplicableError("every end must be parabolic")
    u = _u_of_t(t)
    uu = np.atleast_1d(u)
    grid = np.linspace(1.0, max(float(uu.max()), 2.0), 256)
    res = check_dominating(spec, log_r_grid=grid, tol=tol)
    if not res.ok:
        raise NoDominatingEndError(f"no fixed dominating end; worst at r = {res.violating_radius:.4g}")
    lv = np.stack([np.asarray(p.log_volume(uu), dtype=float) for p in spec.profiles])
    out = np.exp(-lv[np.argmax(lv, axis=0), np.arange(len(uu))])
    return _scalar(out.reshape(np.shape(u)))


def log_min_min_upper(spec: ManifoldSpec, log_t):
    """``log`` of ``min_i h_i^2 / min_i V_i h_i^2`` at ``sqrt t``."""
    u = 0.5 * np.asarray(log_t, dtype=float)
    lv, lh = _log_vh(spec, u)
    return _scalar(2.0 * np.min(lh, axis=0) - np.min(lv + 2.0 * lh, axis=0))


def min_min_upper(spec: ManifoldSpec, t):
    """``min_i h_i(sqrt t)^2 / min_i V_i(sqrt t) h_i(sqrt t)^2``.

    The regularity/subcriticality precondition is the caller's concern; it is
    not enforced because the oscillating ends only satisfy it in the limit.
    """
    u = _u_of_t(t)
    return _scalar(np.exp(log_min_min_upper(spec, 2.0 * u)))


def offdiag_assemble(pD, p_oo, int_p_oo, Px, Py, dPx, dPy):
    """``pD + p_oo Px Py + int_p_oo (dPx Py + Px dPy)``."""
    args = [np.asarray(a, dtype=float) for a in (pD, p_oo, int_p_oo, Px, Py, dPx, dPy)]
    if any(np.any(a < 0) for a in args):
        raise ValueError("all components must be nonnegative")
    pD, p_oo, I, Px, Py, dPx, dPy = args
    return _scalar(pD + p_oo * Px * Py + I * (dPx * Py + Px * dPy))


def offdiag_regimes_2_1(x_abs, y_abs, t, b: float = DEFAULT_B):
    """Three-regime kernel between a planar end (``x``) and a linear end (``y``).

    Returns ``(value, label)`` with label ``"x_far"``, ``"both_near"`` or
    ``"y_far"``; the distance is ``|x| + |y|`` through the center.
    """
    x_abs, y_abs, t = float(x_abs), float(y_abs), float(t)
    if t <= 0 or x_abs <= 0 or y_abs < 0:
        raise ValueError("need t > 0, |x| > 0, |y| >= 0")
    s = math.sqrt(t)
    gauss = math.exp(-b * (x_abs + y_abs) ** 2 / t)
    if x_abs > s:
        return gauss / t, "x_far"
    log_term = math.log(math.e * s / x_abs)
    if y_abs <= s:
        return (1.0 + y_abs / s * log_term) / t, "both_near"
    return log_term * gauss / t, "y_far"


def subcritical_all_envelope(spec: ManifoldSpec, t, x_abs, y_abs, b: float = DEFAULT_B, *, r_max: float | None = None):
    """``exp(-b d^2/t) / V_m(sqrt t)`` for points on different subcritical ends."""
    if spec.k < 2:
        raise NotApplicableError("points on different ends need at least two ends")
    if not all(c.subcritical for c in _classes(spec, r_max)):
        raise NotApplicableError("every end must be subcritical")
    u = _u_of_t(t)
    lv = np.stack([np.asarray(p.log_volume(u), dtype=float) for p in spec.profiles])
    d = np.asarray(x_abs, dtype=float) + np.asarray(y_abs, dtype=float)
    return _scalar(np.exp(-np.max(lv, axis=0) - b * d * d / np.asarray(t, dtype=float)))


def ly_envelope(end: VolumeProfile, t, x_abs, y_abs, b: float = DEFAULT_B):
    """``exp(-b |x - y|^2 / t) / V(sqrt t)`` on a single end."""
    u = _u_of_t(t)
    d = np.asarray(x_abs, dtype=float) - np.asarray(y_abs, dtype=float)
    return _scalar(np.exp(-np.asarray(end.log_volume(u)) - b * d * d / np.asarray(t, dtype=float)))


def lex_order(pairs: Sequence[tuple]) -> list:
    """Permutation sorting ``(alpha, beta)`` pairs in descending lexicographic order (stable)."""
    return sorted(range(len(pairs)), key=lambda i: (-pairs[i][0], -pairs[i][1]))


def _second_largest(lv):
    k, n = lv.shape
    m = np.argmax(lv, axis=0)
    masked = lv.copy()
    masked[m, np.arange(n)] = -np.inf
    return m, np.argmax(masked, axis=0)


def poincare_envelope(spec: ManifoldSpec, r, *, r_max: float | None = None, check: bool = True):
    """``V_n(r)`` (all ends non-parabolic) or ``V_n(r) h_n(r)`` otherwise.

    ``n = n(r)`` is the largest end other than ``m(r)``.  With a parabolic end
    present the critical-ordering decomposition is verified first unless
    ``check`` is false.
    """
    if spec.k < 2:
        raise NotApplicableError("the second largest end needs k >= 2")
    classes = _classes(spec, r_max)
    parabolic = any(c.parabolic for c in classes)
    if parabolic and check:
        check_coe(spec, r_max=r_max)
    u = np.log(np.asarray(r, dtype=float))
    uu = np.atleast_1d(u)
    lv, lh = _log_vh(spec, uu)
    _, n = _second_largest(lv)
    cols = np.arange(len(uu))
    out = lv[n, cols] + (lh[n, cols] if parabolic else 0.0)
    return _scalar(np.exp(out).reshape(np.shape(u)))


@dataclass
class COEDecomposition:
    """Partition of the ends into super/middle/sub classes with witnessing exponents."""

    I_super: tuple
    I_middle: tuple
    I_sub: tuple
    epsilon: float
    delta: float
    gamma1: float
    gamma2: float
    order: tuple = ()
    constants: dict = field(default_factory=dict)


def _normalized_extreme(log_ratio, fn):
    # extreme of a log-ratio after normalizing by its value at the first grid point
    return float(fn(log_ratio - log_ratio[0]))


def check_coe(spec: ManifoldSpec, *, r_max: float | None = None, per_decade: int = 16, tol: float = RATIO_TOL) -> COEDecomposition:
    """Fit the critically-ordered-ends decomposition on a grid ``[e, r_max]``.

    Constants are measured relative to the first grid point and accepted when
    within ``tol``; exponents come from the 0.1..1.9 lattice.  Raises
    ``COEError`` naming the failing clause.
    """
    r_max = r_max or DEFAULT_CLASSIFY_RMAX
    classes = spec.classify(r_max, per_decade)
    u_hi = math.log(r_max)
    n = max(int(math.ceil((u_hi - 1.0) / math.log(10.0) * per_decade)), 1) + 1
    u = np.linspace(1.0, u_hi, n)
    lv, lh = _log_vh(spec, u)
    lt = math.log(tol)

    sup, mid, sub = [], [], []
    eps_fit, delta_fit = {}, {}
    for i, c in enumerate(classes):
        # V >= c r^(2+eps) forces a bounded h, so parabolic ends are never super
        good_eps = [g for g in GAMMA_LATTICE if _normalized_extreme(lv[i] - (2.0 + g) * u, np.min) >= -lt]
        if good_eps and c.parabolic is False:
            sup.append(i)
            eps_fit[i] = max(good_eps)
            continue
        if c.subcritical:
            good_d = [g for g in GAMMA_LATTICE if _normalized_extreme(lv[i] - (2.0 - g) * u, np.max) <= lt]
            if not good_d:
                raise COEError("b", f"end {spec.ends[i].label} is subcritical but no delta fits V <= C r^(2-delta)")
            sub.append(i)
            delta_fit[i] = max(good_d)
            continue
        mid.append(i)

    all_parabolic = all(c.parabolic for c in classes)
    constants = {}
    order = sorted(mid, key=lambda i: -lv[i, -1])
    for a_pos, i in enumerate(order):
        for j in order[a_pos + 1:]:
            vr = lv[i] - lv[j]
            if _normalized_extreme(vr, np.min) < -lt and _normalized_extreme(-vr, np.min) < -lt:
                raise COEError("c", f"volumes of {spec.ends[i].label} and {spec.ends[j].label} are not uniformly ordered")
            if _normalized_extreme(vr, np.min) < -lt:
                i, j = j, i
                vr = -vr
            vh = lv[i] + lh[i] - lv[j] - lh[j]
            low = _normalized_extreme(vh, np.min)
            constants[(i, j, "Vh")] = math.exp(low)
            if low < -lt:
                raise COEError("c", f"V h is not ordered like V for {spec.ends[i].label} over {spec.ends[j].label}")
            if all_parabolic:
                vh2 = lv[i] + 2.0 * lh[i] - lv[j] - 2.0 * lh[j]
                high = _normalized_extreme(vh2, np.max)
                constants[(i, j, "Vh2")] = math.exp(high)
                if high > lt:
                    raise COEError(
                        "c",
                        f"V h^2 of larger end {spec.ends[i].label} exceeds that of {spec.ends[j].label} "
                        f"by {math.exp(high):.3g} > {tol:g}",
                    )

    g1 = g2 = GAMMA_LATTICE[0]
    for i in mid:
        fg1, fg2, _, _ = fit_regular(lv[i], u, tol)
        if fg1 is None or fg2 is None or 2 * fg1 + fg2 >= 2:
            raise COEError("c", f"end {spec.ends[i].label} is not regular")
        g1, g2 = max(g1, fg1), max(g2, fg2)

    eps = min(eps_fit.values()) if eps_fit else float(GAMMA_LATTICE[-1])
    if delta_fit:
        delta = min(delta_fit.values())
    else:
        above = [g for g in GAMMA_LATTICE if g > g1 + g2 + 1e-12]
        delta = above[0] if above else 2.0
    if not (g1 < eps and g1 + g2 < delta < 2 and 2 * g1 + g2 < 2):
        raise COEError(
            "parameters",
            f"no admissible chain: eps={eps:g}, delta={delta:g}, gamma1={g1:g}, gamma2={g2:g}",
        )
    return COEDecomposition(tuple(sup), tuple(mid), tuple(sub), float(eps), float(delta), float(g1), float(g2), tuple(order), constants)
