"""Separation profiles of two flow orbits over a finite horizon.

Between consecutive roof crossings of either orbit both base points are
fixed and both heights grow at unit speed, so ``d^f(T_t p, T_t q)`` is
piecewise constant. Profiles are therefore computed exactly from merged
crossing schedules; breakpoints are stored as exact rationals of the
computed crossing times so segment lengths telescope to the horizon.
"""
from __future__ import annotations

import csv
import io
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

import numpy as np

from .circle import CirclePoint, Dist
from .errors import AmbiguousComparison, PrecisionExhausted, WindowOutOfHorizon
from .divergence import DivergenceWindows, build_windows, check_beta, delta0_estimate, sample_pair
from .flow import FlowPoint, SpecialFlow, crossing_schedule, flow_eval
from .roof import U, birkhoff, birkhoff_prefix


@dataclass
class StepProfile:
    """Piecewise-constant distance on ``[0, H)``.

    Segment ``i`` is ``[breaks[i], breaks[i+1])`` with distance ``values[i]``
    (error ``errs[i]``) and ``far[i] = values[i] >= delta``.
    """

    horizon: Fraction
    delta: float
    breaks: list[Fraction]
    values: list[float]
    errs: list[float]
    far: list[bool]
    ambiguous: int = 0

    def __len__(self):
        return len(self.values)

    def segments(self) -> Iterable[tuple[Fraction, Fraction, float, bool]]:
        for i, v in enumerate(self.values):
            yield self.breaks[i], self.breaks[i + 1], v, self.far[i]

    @property
    def lam_far(self) -> Fraction:
        return sum((b - a for a, b, _, f in self.segments() if f), Fraction(0))

    @property
    def lam_close(self) -> Fraction:
        return sum((b - a for a, b, _, f in self.segments() if not f), Fraction(0))

    def far_measure(self, a, b) -> Fraction:
        """``lambda(F cap [a, b))``."""
        a, b = Fraction(a), Fraction(b)
        total = Fraction(0)
        for s, e, _, f in self.segments():
            if f:
                lo, hi = max(s, a), min(e, b)
                if hi > lo:
                    total += hi - lo
        return total

    def value_at(self, t: float) -> float:
        i = int(np.searchsorted(np.array([float(b) for b in self.breaks]), t, side="right")) - 1
        return self.values[min(max(i, 0), len(self.values) - 1)]

    def is_close_at(self, t) -> bool:
        t = Fraction(t)
        for s, e, _, f in self.segments():
            if s <= t < e:
                return not f
        raise ValueError("t outside [0, H)")

    def min_positive_value(self) -> float:
        pos = [v for v in self.values if v > 0]
        return min(pos) if pos else math.inf

    def to_csv(self, fh=None) -> str:
        buf = fh if fh is not None else io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t_start", "t_end", "distance", "is_far"])
        for s, e, v, f in self.segments():
            w.writerow([repr(float(s)), repr(float(e)), repr(v), int(f)])
        return buf.getvalue() if fh is None else ""


def _events(sp, sq) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Merge two crossing schedules into ``(times, which, errs)``; ``which`` is 0 for p, 1 for q."""
    t = np.concatenate([sp.times, sq.times])
    e = np.concatenate([sp.errs, sq.errs])
    w = np.concatenate([np.zeros(len(sp.times), dtype=int), np.ones(len(sq.times), dtype=int)])
    order = np.lexsort((w, t))
    return t[order], w[order], e[order]


def _merge_close_events(t: np.ndarray, w: np.ndarray, e: np.ndarray, strict: bool) -> tuple[np.ndarray, int]:
    """Snap crossings of the two orbits that are not separated by their error
    budgets onto a common instant; the dropped sliver is at most ``e_i + e_j`` long."""
    if len(t) < 2:
        return t, 0
    dt = np.diff(t)
    clash = (dt > 0) & (dt <= e[1:] + e[:-1]) & (w[1:] != w[:-1])
    if not clash.any():
        return t, 0
    if strict:
        i = int(np.argmax(clash))
        raise PrecisionExhausted(f"crossings at t={t[i]!r} and t={t[i + 1]!r} are not separated "
                                 f"by their error budgets")
    t = t.copy()
    for i in np.flatnonzero(clash):
        t[i + 1] = t[i]
    return t, int(clash.sum())


def _height_offset(sched, n: int) -> tuple[float, float]:
    """``s - f^(n)(x)``: the height is ``t + offset`` after ``n`` crossings."""
    return sched.p.s - sched.F[n], sched.p.s_err + sched.F_err[n]


def _segment_distance(sp, sq, n: int, m: int, alpha: CirclePoint):
    xn = sp.base(n)
    ym = sq.base(m)
    dx = (xn - ym).norm()
    op, ep = _height_offset(sp, n)
    oq, eq = _height_offset(sq, m)
    dh = abs(oq - op)
    v = dx.value + dh
    return float(v), float(dx.err + U * dx.value + ep + eq + 2 * U * (abs(op) + abs(oq) + v))


def closeness_profile(flow: SpecialFlow, p: FlowPoint, q: FlowPoint, H: float,
                      delta: float, strict: bool = False) -> StepProfile:
    """Exact ``t -> d^f(T_t p, T_t q)`` on ``[0, H)`` with its delta-close/far split.

    A segment whose distance is within its error bound of ``delta`` is
    classified by the computed value and counted in ``ambiguous``, as is a
    pair of crossings too close to order (they are merged into one instant).
    With ``strict=True`` both raise instead.
    """
    if H <= 0 or delta <= 0:
        raise ValueError("horizon and delta must be positive")
    sp = crossing_schedule(flow, p, H)
    sq = crossing_schedule(flow, q, H)
    times, which, errs = _events(sp, sq)
    times, ambiguous = _merge_close_events(times, which, errs, strict)
    Hf = Fraction(H)
    breaks = [Fraction(0)]
    values, verrs, far = [], [], []
    n = m = 0
    i = 0
    while True:
        v, e = _segment_distance(sp, sq, n, m, flow.alpha)
        if abs(v - delta) <= e:
            if strict:
                raise AmbiguousComparison(f"segment distance {v!r} within {e:.3g} of delta")
            ambiguous += 1
        is_far = v >= delta
        end = Fraction(float(times[i])) if i < len(times) else Hf
        if values and values[-1] == v and far[-1] == is_far:
            breaks[-1] = end
            verrs[-1] = max(verrs[-1], e)
        else:
            breaks.append(end)
            values.append(v)
            verrs.append(e)
            far.append(is_far)
        if i >= len(times):
            break
        # consume every event at this instant
        t0 = times[i]
        while i < len(times) and times[i] == t0:
            if which[i] == 0:
                n += 1
            else:
                m += 1
            i += 1
    return StepProfile(Hf, float(delta), breaks, values, verrs, far, ambiguous)


# ---------------------------------------------------------------------------
# Hamming distance


@dataclass(frozen=True)
class GridPartition:
    """``m`` equal base arcs times height bands of width ``eta``.

    The top band under the roof is truncated at the local roof value. Atom
    diameters in ``d^f`` are at most ``1/m + eta``.
    """

    m: int
    eta: float

    def __post_init__(self):
        if self.m < 1 or not self.eta > 0:
            raise ValueError("need m >= 1 and eta > 0")

    @property
    def diameter(self) -> float:
        return 1.0 / self.m + self.eta

    def base_index(self, x: CirclePoint) -> int:
        """``floor(m x)``; raises if ``x`` is within its error of an arc boundary."""
        P = x.prec
        i = (x.num * self.m) >> P
        if x.err_ulps:
            lo = ((x.num - x.err_ulps) % x.modulus * self.m) >> P
            hi = ((x.num + x.err_ulps) % x.modulus * self.m) >> P
            if lo != i or hi != i:
                raise AmbiguousComparison("base point on a partition boundary within its error")
        return int(i)

    def band_index(self, h: float) -> int:
        return int(math.floor(h / self.eta))

    def atom(self, x: CirclePoint, h: float) -> tuple[int, int]:
        return self.base_index(x), self.band_index(h)


def _band_events(sched, part: GridPartition, H: float) -> np.ndarray:
    """Times in ``(0, H)`` at which the height of ``sched.p`` crosses a multiple of eta."""
    out = []
    starts = np.concatenate([[0.0], sched.times])
    for n in range(len(starts)):
        off = sched.p.s - sched.F[n]          # height = t + off
        top = sched.F[n + 1] - sched.F[n]     # roof value at the n-th base point
        h0 = starts[n] + off
        j = math.floor(h0 / part.eta) + 1
        while j * part.eta < top:
            t = j * part.eta - off
            if t >= H:
                break
            out.append(t)
            j += 1
    return np.array(out)


def hamming_distance(flow: SpecialFlow, part: GridPartition, p: FlowPoint, q: FlowPoint,
                     H: float) -> float:
    """Fraction of ``[0, H)`` during which ``T_t p`` and ``T_t q`` lie in different atoms."""
    if H <= 0:
        raise ValueError("horizon must be positive")
    sp = crossing_schedule(flow, p, H)
    sq = crossing_schedule(flow, q, H)
    ev = np.concatenate([sp.times, sq.times, _band_events(sp, part, H), _band_events(sq, part, H)])
    ev = np.unique(ev[(ev > 0) & (ev < H)])
    bounds = np.concatenate([[0.0], ev, [float(H)]])
    mids = 0.5 * (bounds[:-1] + bounds[1:])
    n_idx = np.searchsorted(sp.times, mids, side="right")
    m_idx = np.searchsorted(sq.times, mids, side="right")
    cache_p: dict[int, int] = {}
    cache_q: dict[int, int] = {}
    diff_len = []
    for j in range(len(mids)):
        n, m = int(n_idx[j]), int(m_idx[j])
        if n not in cache_p:
            cache_p[n] = part.base_index(sp.base(n))
        if m not in cache_q:
            cache_q[m] = part.base_index(sq.base(m))
        hp = mids[j] + sp.p.s - sp.F[n]
        hq = mids[j] + sq.p.s - sq.F[m]
        if cache_p[n] != cache_q[m] or part.band_index(hp) != part.band_index(hq):
            diff_len.append(bounds[j + 1] - bounds[j])
    return min(1.0, math.fsum(diff_len) / H)


# ---------------------------------------------------------------------------
# the interval I_t and the density check


@dataclass
class ItInterval:
    """``I_t = t + [-s_t + f^(a)(x_t), -s_t + f^(b)(x_t))`` with ``a = min J``, ``b = max J + 1``.

    ``pieces[k]`` is the start of ``I_t^n`` for ``n = a + k`` (absolute time),
    the last entry being the end of ``I_t``.
    """

    t: float
    start: float
    end: float
    err: float
    windows: object
    pieces: np.ndarray
    s_t: float
    x_t: CirclePoint
    y_t: CirclePoint

    @property
    def length(self) -> float:
        return self.end - self.start

    def piece(self, n: int) -> tuple[float, float]:
        a = self.windows.J[0]
        return float(self.pieces[n - a]), float(self.pieces[n - a + 1])

    def contains(self, t: float) -> bool:
        return self.start <= t < self.end


def build_It(flow: SpecialFlow, p: FlowPoint, q: FlowPoint, t: float, beta,
             delta0: float | None = None) -> ItInterval:
    pt, _ = flow_eval(flow, p, t)
    qt, _ = flow_eval(flow, q, t)
    w = build_windows(flow, pt.x, qt.x, beta, delta0)
    a, b = w.J[0], w.J[1] + 1
    ns, vals, errs = birkhoff_prefix(flow.roof, flow.cf, pt.x, min(a, 0), max(b, 0), flow.step_budget)
    lo = -min(a, 0)
    F = vals[lo + a: lo + b + 1]
    base = t - pt.s
    pieces = base + F
    err = pt.s_err + float(errs[lo + a: lo + b + 1].max()) + U * abs(t)
    return ItInterval(t, float(pieces[0]), float(pieces[-1]), err, w, pieces, pt.s, pt.x, qt.x)


@dataclass(frozen=True)
class GammaCheck:
    passed: bool
    ratio: float
    gamma: float
    margin: float
    lam_It: float
    lam_far: float

    def to_record(self) -> dict:
        return {"passed": self.passed, "ratio": self.ratio, "gamma": self.gamma,
                "margin": self.margin, "lambda_It": self.lam_It, "lambda_It_far": self.lam_far}


def check_gamma_density(flow: SpecialFlow, p: FlowPoint, q: FlowPoint, t: float, H: float,
                        delta: float, beta, profile: StepProfile | None = None,
                        delta0: float | None = None) -> GammaCheck:
    """``lambda(I_t cap F) > gamma lambda(I_t)`` with ``gamma = L / (10 M)``."""
    it = build_It(flow, p, q, t, beta, delta0)
    if it.start - it.err < 0 or it.end + it.err > H:
        raise WindowOutOfHorizon(f"I_t = [{it.start:.6g}, {it.end:.6g}) is not inside [0, {H})")
    if profile is None:
        profile = closeness_profile(flow, p, q, H, delta)
    lam_far = float(profile.far_measure(it.start, it.end))
    lam = it.length
    gamma = flow.roof.L / (10 * flow.roof.M)
    ratio = lam_far / lam
    # each endpoint of I_t and of every segment is known to within its error
    slack = 2 * it.err + 2 * max(profile.errs, default=0.0)
    margin = lam_far - gamma * lam - slack
    return GammaCheck(bool(margin > 0), float(ratio), float(gamma), float(margin), float(lam), lam_far)


@dataclass(frozen=True)
class DeltaThreshold:
    delta0: float
    half_bound: float
    gap_bound: float
    k_max: int
    k_argmin: int

    @property
    def value(self) -> float:
        return min(self.delta0, self.half_bound, self.gap_bound)

    def to_record(self) -> dict:
        return {"delta0": self.delta0, "half_bound": self.half_bound, "gap_bound": self.gap_bound,
                "k_max": self.k_max, "k_argmin": self.k_argmin, "value": self.value}


def delta_threshold(flow: SpecialFlow, cf, beta, delta0: float | None = None) -> DeltaThreshold:
    """The three upper bounds on ``delta`` for the far-time density estimate around a close time.

    Any ``delta`` strictly below ``value`` is admissible.
    """
    b = float(check_beta(beta))
    L, M = flow.roof.L, flow.roof.M
    if delta0 is None:
        delta0 = delta0_estimate(flow, beta).value
    half = 0.5 * b * L / (1e6 * M * M)
    k_max = math.floor(Fraction(60) * Fraction(M) / (Fraction(L) ** 2))
    a = cf.alpha
    m = a.modulus
    best, arg = m, 0
    v = 0
    for k in range(1, k_max + 1):
        v = (v + a.num) % m
        d = min(v, m - v)
        if d < best:
            best, arg = d, k
    gap = Dist(best, a.prec, arg * a.err_ulps).lower / 2
    return DeltaThreshold(float(delta0), half, float(gap), k_max, arg)


@dataclass(frozen=True)
class ScenarioPair:
    """Two flow points whose orbits are ``delta``-close at time ``t``, with ``I_t`` inside ``[0, H)``."""

    p: FlowPoint
    q: FlowPoint
    t: float
    H: float
    delta: float
    windows: DivergenceWindows


def close_at_time_pair(flow: SpecialFlow, beta, delta: float, rng: random.Random,
                       delta0: float | None = None, max_J: int = 3000,
                       lead: float = 5.0) -> ScenarioPair:
    """Build ``p, q`` with ``t`` in the close set and ``t`` in ``[H/4, 3H/4]``.

    Base points ``x_t, y_t`` with ``||x_t - y_t|| < delta`` are sampled and
    given heights ``s_t`` and ``s_t + (delta - ||x_t - y_t||)/2``, so the
    distance at time ``t`` stays below ``delta`` while the two orbits never
    cross the roof at the same instant. Both are flowed back by ``t``.
    Pairs whose window has more than ``max_J`` points are resampled.
    """
    if delta0 is None:
        delta0 = delta0_estimate(flow, beta).value
    if not 0 < delta <= delta0:
        raise ValueError("need 0 < delta <= delta0")
    roof = flow.roof
    while True:
        xt, yt = sample_pair(flow, beta, delta, rng)
        w = build_windows(flow, xt, yt, beta, delta0)
        if w.size_J <= max_J:
            break
    a, b = w.J[0], w.J[1] + 1
    Fa = birkhoff(roof, flow.cf, xt, a, flow.step_budget).value if a else 0.0
    Fb = birkhoff(roof, flow.cf, xt, b, flow.step_budget).value
    s_t = rng.uniform(0.0, 0.5 * roof.L)
    dxy = float(w.dist)
    t = s_t - Fa + lead
    H = max(4 * t / 3, t - s_t + Fb + lead, 5 * roof.M * w.size_J)
    t = max(t, H / 4)
    H = max(H, t - s_t + Fb + lead)
    pt = FlowPoint(xt, s_t)
    qt = FlowPoint(yt, s_t + (delta - dxy) / 2)
    p, _ = flow_eval(flow, pt, -t)
    q, _ = flow_eval(flow, qt, -t)
    return ScenarioPair(p, q, t, H, delta, w)
