"""Roof functions ``f = g + A{x} + c`` and their Birkhoff cocycle.

``g`` is a real trigonometric polynomial without constant term, so its mean
is exactly zero and its derivative is available in closed form.

Birkhoff sums are evaluated by direct summation. Base points come from the
exact fixed-point orbit; roof values are binary64 and every sum carries an
a-priori error bound (per-term evaluation error plus the standard
``gamma_n * sum |t_i|`` bound for recursive summation).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

from .circle import (
    Approx,
    Arc,
    CirclePoint,
    digits_ge,
    digits_ge_const,
    digits_near,
    digits_to_float,
    orbit_digits,
    shortest_arc,
)
from .errors import AmbiguousComparison, NonPositiveIntegral, NonPositiveRoof, PrecisionExhausted, \
    StepBudgetExceeded

U = 2.0 ** -53
TWO_PI = 2.0 * math.pi
CHUNK = 1 << 18
DEFAULT_STEP_BUDGET = 10 ** 7


def gamma(n):
    """Higham's ``gamma_n = n u / (1 - n u)``."""
    nu = np.asarray(n, dtype=np.float64) * U
    return nu / (1.0 - nu)


@dataclass(frozen=True)
class TrigPoly:
    """``g(x) = sum_k a_k cos(2 pi k x) + b_k sin(2 pi k x)`` over ``k >= 1``."""

    terms: tuple[tuple[int, float, float], ...] = ()

    def __post_init__(self):
        for k, a, b in self.terms:
            if int(k) != k or k < 1:
                raise ValueError(f"harmonic index must be a positive integer, got {k!r}")
            if not (math.isfinite(a) and math.isfinite(b)):
                raise ValueError("non-finite coefficient")

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]]) -> "TrigPoly":
        return cls(tuple((int(k), float(a), float(b)) for k, a, b in rows))

    @property
    def degree(self) -> int:
        return max((k for k, _, _ in self.terms), default=0)

    @property
    def is_zero(self) -> bool:
        return all(a == 0 and b == 0 for _, a, b in self.terms)

    def scaled(self, s: float) -> "TrigPoly":
        return TrigPoly(tuple((k, a * s, b * s) for k, a, b in self.terms))

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        out = np.zeros_like(x)
        for k, a, b in self.terms:
            ph = TWO_PI * k * x
            out += a * np.cos(ph) + b * np.sin(ph)
        return out

    def deriv(self, x):
        x = np.asarray(x, dtype=np.float64)
        out = np.zeros_like(x)
        for k, a, b in self.terms:
            ph = TWO_PI * k * x
            out += TWO_PI * k * (b * np.cos(ph) - a * np.sin(ph))
        return out

    def diff(self, x, delta: float):
        """``g(x) - g(x + delta)`` via sum-to-product, accurate relative to ``delta``."""
        x = np.asarray(x, dtype=np.float64)
        out = np.zeros_like(x)
        for k, a, b in self.terms:
            s = 2.0 * math.sin(math.pi * k * delta)
            mid = TWO_PI * k * x + math.pi * k * delta
            out += s * (a * np.sin(mid) - b * np.cos(mid))
        return out

    # rigorous bounds; sqrt(a^2 + b^2) is the amplitude of the k-th harmonic

    @property
    def amplitude(self) -> float:
        return sum(math.hypot(a, b) for _, a, b in self.terms)

    @property
    def coeff_l1(self) -> float:
        return sum(abs(a) + abs(b) for _, a, b in self.terms)

    @property
    def sup_deriv(self) -> float:
        """Upper bound for ``sup |g'|`` (exact for a single harmonic)."""
        return sum(TWO_PI * k * math.hypot(a, b) for k, a, b in self.terms)

    @property
    def sup_second_deriv(self) -> float:
        return sum((TWO_PI * k) ** 2 * math.hypot(a, b) for k, a, b in self.terms)

    def uniform_cancellation(self, alpha: float) -> float:
        """``C`` with ``|g^(n)(x) - g^(n)(y)| <= C ||x - y||`` for every ``n``.

        Summing the geometric series per harmonic gives
        ``sum_k 2 pi k |c_k| / |sin(pi k alpha)|``.
        """
        total = 0.0
        for k, a, b in self.terms:
            s = abs(math.sin(math.pi * k * alpha))
            total += TWO_PI * k * math.hypot(a, b) / s
        return total * (1 + 1e-12)

    def deriv_birkhoff(self, theta, n: int, n_alpha: float, alpha: float):
        """``g'^(n)(theta) = sum_{i<n} g'(theta + i alpha)`` for ``n >= 0`` in closed form.

        ``n_alpha`` is ``{n alpha}`` computed exactly upstream; only the small
        phases ``k * alpha`` and ``k * {n alpha}`` are formed in floating point.
        """
        theta = np.asarray(theta, dtype=np.float64)
        out = np.zeros_like(theta)
        for k, a, b in self.terms:
            z = np.exp(2j * math.pi * ((k * alpha) % 1.0))
            zn = np.exp(2j * math.pi * ((k * n_alpha) % 1.0))
            geo = (zn - 1.0) / (z - 1.0)
            w = TWO_PI * k * complex(b, a)
            out += np.real(w * np.exp(2j * math.pi * ((k * theta) % 1.0)) * geo)
        return out


@dataclass(frozen=True)
class Roof:
    """Roof ``f(x) = g(x) + A{x} + c`` with one jump of size ``A`` at 0.

    ``L = min(1, inf f)`` and ``M = max(1, sup f)`` are certified outer bounds
    (``L`` rounded down, ``M`` rounded up) computed on first access; every later
    inequality uses them as the constants themselves.
    """

    g: TrigPoly = field(default_factory=TrigPoly)
    A: float = 1.0
    c: float = 0.5
    normalized: bool = False

    def __post_init__(self):
        if self.A == 0 or not math.isfinite(self.A) or not math.isfinite(self.c):
            raise ValueError("slope A must be finite and non-zero, c finite")

    @property
    def jump(self) -> float:
        """``f(0-) - f(0+)``."""
        return self.A

    @property
    def integral(self) -> float:
        return self.A / 2 + self.c

    @cached_property
    def bounds(self) -> tuple[float, float, float, float]:
        return _enclose(self)

    @property
    def L(self) -> float:
        return self.bounds[2]

    @property
    def M(self) -> float:
        return self.bounds[3]

    @property
    def inf_lower(self) -> float:
        return self.bounds[0]

    @property
    def sup_upper(self) -> float:
        return self.bounds[1]

    def __call__(self, x):
        """Evaluate on floats in ``[0, 1)``; ``x = 0`` gives the right limit."""
        x = np.asarray(x, dtype=np.float64)
        return self.g(x) + self.A * x + self.c

    def term_error(self, e_x: float) -> float:
        """Bound on ``|fl(f(x)) - f(x)|`` when the float ``x`` is off by ``e_x``."""
        g = self.g
        err_g = sum((abs(a) + abs(b)) * (TWO_PI * k * (e_x + 2 * U) + 4 * U)
                    for k, a, b in g.terms)
        scale = g.coeff_l1 + abs(self.A) + abs(self.c)
        return err_g + abs(self.A) * (e_x + U) + 4 * U * scale


def _enclose(roof: Roof) -> tuple[float, float, float, float]:
    # the smooth part h(x) = g(x) + A x on [0, 1] has the same inf/sup as f on [0, 1)
    # (sup is the left limit at 1); on a cell of width w, h deviates from the
    # chord by at most sup|h''| w^2 / 8 with h'' = g''
    s2 = roof.g.sup_second_deriv
    n = 4096
    while s2 / (8 * n * n) > 1e-9:
        n *= 2
    x = np.linspace(0.0, 1.0, n + 1)
    h = roof.g(x) + roof.A * x + roof.c
    slack = s2 / (8 * n * n) + 16 * U * (roof.g.coeff_l1 + abs(roof.A) + abs(roof.c)) + 1e-12
    inf_lo = float(h.min()) - slack
    sup_hi = float(h.max()) + slack
    if inf_lo <= 0:
        raise NonPositiveRoof(f"cannot certify f > 0 (inf f >= {inf_lo:.3g})")
    return inf_lo, sup_hi, min(1.0, inf_lo), max(1.0, sup_hi)


def make_roof(g=(), A: float = 1.0, c: float = 0.5, normalize_roof: bool = False) -> Roof:
    if not isinstance(g, TrigPoly):
        g = TrigPoly.from_rows(g)
    roof = Roof(g, float(A), float(c))
    roof.bounds  # certify positivity now
    return normalize(roof) if normalize_roof else roof


def roof_eval(roof: Roof, x: CirclePoint) -> Approx:
    xf = x.value
    e_x = x.err + U
    val = float(roof(xf))
    return Approx(val, roof.term_error(e_x) + (abs(roof.A) if x.err_ulps and _near_jump(x) else 0.0))


def _near_jump(x: CirclePoint) -> bool:
    return x.num <= x.err_ulps or x.num >= x.modulus - x.err_ulps


def roof_bounds(roof: Roof) -> tuple[float, float]:
    return roof.L, roof.M


def normalize(roof: Roof) -> Roof:
    """Scale ``(g, A, c)`` so that the roof integrates to one."""
    total = roof.integral
    if total <= 0:
        raise NonPositiveIntegral(f"integral A/2 + c = {total} is not positive")
    out = Roof(roof.g.scaled(1 / total), roof.A / total, roof.c / total, normalized=True)
    out.bounds
    return out


# ---------------------------------------------------------------------------
# orbit blocks


def orbit_blocks(x: CirclePoint, alpha: CirclePoint, k0: int, k1: int,
                 chunk: int = CHUNK) -> Iterator[tuple[int, np.ndarray, int]]:
    """Yield ``(k_start, digits, budget_ulps)`` covering ``x + k alpha`` for ``k0 <= k < k1``."""
    m = x.modulus
    k = k0
    while k < k1:
        cnt = min(chunk, k1 - k)
        start = (x.num + k * alpha.num) % m
        budget = x.err_ulps + max(abs(k), abs(k + cnt - 1)) * alpha.err_ulps
        yield k, orbit_digits(start, alpha.num, cnt, x.prec), budget
        k += cnt


def _near_zero(d: np.ndarray, k0: int, budget: int, base_budget: int, prec: int) -> np.ndarray:
    """Points of an orbit block within their error budget of 0.

    The block-wide budget is the one of its farthest index; the unrotated
    point at ``k = 0`` only carries its own error.
    """
    near = digits_near(d, 0, budget, prec)
    if k0 <= 0 < k0 + d.shape[1]:
        near[-k0] = bool(digits_near(d[:, -k0:-k0 + 1], 0, base_budget, prec)[0])
    return near


def _check_budget(n: int, budget: int):
    if abs(n) > budget:
        raise StepBudgetExceeded(f"|n| = {abs(n)} exceeds the step budget {budget}")


def _terms(roof: Roof, alpha: CirclePoint, x: CirclePoint, k0: int, k1: int):
    """Roof values at ``x + k alpha`` for ``k0 <= k < k1`` plus a per-term error bound."""
    vals = []
    tau = 0.0
    for k, d, budget in orbit_blocks(x, alpha, k0, k1):
        if budget and _near_zero(d, k, budget, x.err_ulps, x.prec).any():
            raise PrecisionExhausted("orbit point within the error budget of the discontinuity")
        vals.append(roof(digits_to_float(d)))
        e_x = U + 2.0 ** -96 + math.ldexp(budget, -x.prec)
        tau = max(tau, roof.term_error(e_x))
    return (np.concatenate(vals) if vals else np.zeros(0)), tau


def birkhoff(roof: Roof, cf, x: CirclePoint, n: int,
             step_budget: int = DEFAULT_STEP_BUDGET) -> Approx:
    """Cocycle ``f^(n)(x)``: sum of ``f(x + i alpha)`` over ``0 <= i < n``, and
    ``-sum_{n <= i < 0}`` for negative ``n``. ``f^(0) = 0`` exactly."""
    _check_budget(n, step_budget)
    if n == 0:
        return Approx(0.0, 0.0)
    lo, hi = (0, n) if n > 0 else (n, 0)
    t, tau = _terms(roof, cf.alpha, x, lo, hi)
    s = math.fsum(t)
    err = abs(n) * tau + U * abs(s)
    return Approx(s if n > 0 else -s, err)


def birkhoff_prefix(roof: Roof, cf, x: CirclePoint, lo: int, hi: int,
                    step_budget: int = DEFAULT_STEP_BUDGET) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All ``f^(n)(x)`` for ``lo <= n <= hi`` (``lo <= 0 <= hi``).

    Returns ``(ns, values, errors)``.
    """
    if not lo <= 0 <= hi:
        raise ValueError("range must contain 0")
    _check_budget(max(-lo, hi), step_budget)
    parts_v, parts_e = [], []
    if lo < 0:
        t, tau = _terms(roof, cf.alpha, x, lo, 0)
        t = t[::-1]  # t_{-1}, t_{-2}, ...
        cs = np.cumsum(t)
        ca = np.cumsum(np.abs(t))
        k = np.arange(1, -lo + 1)
        parts_v.append((-cs)[::-1])
        parts_e.append((k * tau + gamma(k) * ca)[::-1])
    parts_v.append(np.zeros(1))
    parts_e.append(np.zeros(1))
    if hi > 0:
        t, tau = _terms(roof, cf.alpha, x, 0, hi)
        cs = np.cumsum(t)
        ca = np.cumsum(np.abs(t))
        k = np.arange(1, hi + 1)
        parts_v.append(cs)
        parts_e.append(k * tau + gamma(k) * ca)
    return np.arange(lo, hi + 1), np.concatenate(parts_v), np.concatenate(parts_e)


# ---------------------------------------------------------------------------
# pairs of orbits


@dataclass
class DiffScan:
    """``f^(n)(x) - f^(n)(y)`` along one time direction.

    ``ns[j] = direction * j`` for ``j = 0 .. N``; ``hits[j]`` counts the indices
    ``i`` in the summation range of ``ns[j]`` with ``0 in R^i [x, y]``.
    """

    ns: np.ndarray
    delta: np.ndarray
    err: np.ndarray
    hits: np.ndarray
    undecidable: int = 0


def _hit_mask(arc_end: np.ndarray, length: int, k0: int, budget: int, base_budget: int, prec: int):
    # 0 lies on the closed arc iff its ccw end sits in [0, length]
    hit = ~digits_ge_const(arc_end, length + 1)
    amb = digits_near(arc_end, 0, budget, prec) | digits_near(arc_end, length, budget, prec)
    if k0 <= 0 < k0 + arc_end.shape[1]:
        e = arc_end[:, -k0:-k0 + 1]
        amb[-k0] = bool((digits_near(e, 0, base_budget, prec) | digits_near(e, length, base_budget, prec))[0])
    return hit, amb


def diff_scan(roof: Roof, cf, x: CirclePoint, y: CirclePoint, N: int, direction: int = 1,
              step_budget: int = DEFAULT_STEP_BUDGET) -> DiffScan:
    """Scan ``f^(n)(x) - f^(n)(y)`` for ``n = 0, d, 2d, ..., N d`` with ``d = direction``.

    Each term ``f(x_i) - f(y_i)`` is formed with the fractional parts
    subtracted as exact integers and the smooth part by sum-to-product, so
    accuracy is relative to ``||x - y||`` rather than to 1.
    """
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    _check_budget(N, step_budget)
    alpha = cf.alpha
    m, P = x.modulus, x.prec
    D = (y.num - x.num) % m
    d_int = D if D <= m // 2 else D - m
    delta = float(Fraction(d_int, m))
    fd_ge = float(Fraction(m - D, m)) if D else 0.0  # {x_i} - {y_i} when x_i >= y_i
    fd_lt = float(Fraction(-D, m))
    e_d = math.ldexp(x.err_ulps + y.err_ulps, -P)
    length = abs(d_int)
    g = roof.g
    k0, k1 = (0, N) if direction == 1 else (-N, 0)
    terms, taus, hit_parts = [], [], []
    n_amb = 0
    for k, X, budget in orbit_blocks(x, alpha, k0, k1):
        Y = _shifted(X, D, P)
        xf = digits_to_float(X)
        ge = digits_ge(X, Y) if D else np.ones(X.shape[1], dtype=bool)
        fd = np.where(ge, fd_ge, fd_lt)
        t = g.diff(xf, delta) + roof.A * fd
        b2 = budget + y.err_ulps + (budget - x.err_ulps)
        hit, amb = _hit_mask(Y if d_int > 0 else X, length, k, b2, x.err_ulps + y.err_ulps, P)
        amb |= _near_zero(X, k, budget, x.err_ulps, P) | _near_zero(Y, k, b2, y.err_ulps, P)
        n_amb += int(amb.sum())
        e_x = U + 2.0 ** -96 + math.ldexp(budget, -P)
        const = sum((abs(a) + abs(b)) * TWO_PI * k * abs(delta) * (TWO_PI * k * (e_x + 2 * U) + 6 * U)
                    for k, a, b in g.terms) + (g.sup_deriv + abs(roof.A)) * e_d
        taus.append(const + abs(roof.A) * U * np.abs(fd) + 2 * U * np.abs(t))
        terms.append(t)
        hit_parts.append(hit)
    t = np.concatenate(terms) if terms else np.zeros(0)
    tau = np.concatenate(taus) if taus else np.zeros(0)
    hit = np.concatenate(hit_parts) if hit_parts else np.zeros(0, dtype=bool)
    if direction == -1:
        t, tau, hit = t[::-1], tau[::-1], hit[::-1]
    cs = np.concatenate([[0.0], np.cumsum(t)])
    ca = np.concatenate([[0.0], np.cumsum(np.abs(t))])
    ct = np.concatenate([[0.0], np.cumsum(tau)])
    ch = np.concatenate([[0], np.cumsum(hit, dtype=np.int64)])
    j = np.arange(N + 1)
    err = ct + gamma(j) * ca
    vals = cs if direction == 1 else -cs
    return DiffScan(direction * j, vals, err, ch, n_amb)


def _shifted(X: np.ndarray, D: int, prec: int) -> np.ndarray:
    """Digits of ``(X + D) mod 2**prec``."""
    nd, n = X.shape
    out = np.empty_like(X)
    carry = np.zeros(n, dtype=np.uint64)
    for t in range(nd):
        acc = X[t] + np.uint64((D >> (32 * t)) & 0xFFFFFFFF) + carry
        out[t] = acc & np.uint64(0xFFFFFFFF)
        carry = acc >> np.uint64(32)
    return out


def hit_scan(cf, arc: Arc, k0: int, k1: int) -> np.ndarray:
    """Boolean array over ``k0 <= k < k1``: does ``R^k arc`` contain 0?

    Raises :class:`AmbiguousComparison` if any membership is undecidable.
    """
    alpha = cf.alpha
    end = arc.end
    out = []
    for k, E, budget in orbit_blocks(end, alpha, k0, k1):
        b = budget + arc.err_ulps + max(abs(k), abs(k + E.shape[1] - 1)) * alpha.err_ulps
        hit, amb = _hit_mask(E, arc.length_ulps, k, b, arc.err_ulps + end.err_ulps, arc.prec)
        if amb.any():
            raise AmbiguousComparison(f"membership of 0 undecidable near k={k + int(np.argmax(amb))}")
        out.append(hit)
    return np.concatenate(out) if out else np.zeros(0, dtype=bool)


def hit_count(cf, x: CirclePoint, y: CirclePoint, m: int) -> int:
    """``D_m``: number of ``0 <= i < m`` with ``0`` in the closed arc ``R^i [x, y]``."""
    if m < 0:
        raise ValueError("m must be non-negative")
    arc = shortest_arc(x, y)
    return int(hit_scan(cf, arc, 0, m).sum())


def c1_decay_estimate(roof: Roof, cf, n: int, grid_size: int) -> float:
    """``max_theta |g'^(n)(theta) / n|`` over ``theta = j / grid_size``."""
    if grid_size < 2:
        raise ValueError("grid_size must be >= 2")
    if n <= 0:
        raise ValueError("n must be positive")
    if roof.g.is_zero:
        return 0.0
    a = cf.alpha
    n_alpha = math.ldexp((n * a.num) % a.modulus, -a.prec)
    theta = np.arange(grid_size) / grid_size
    vals = roof.g.deriv_birkhoff(theta, n, n_alpha, a.value)
    return float(np.max(np.abs(vals)) / n)
