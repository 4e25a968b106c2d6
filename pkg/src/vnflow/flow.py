"""The special flow over ``R_alpha`` under a roof ``f``.

A point is a pair ``(x, s)`` with ``0 <= s < f(x)``. Flowing for time ``t``
moves the height to ``s + t`` and applies the base rotation once per roof
crossing; the number of crossings is the unique ``n`` with
``f^(n)(x) <= s + t < f^(n+1)(x)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cfrac import CFExpansion
from .circle import Approx, CirclePoint
from .errors import PrecisionExhausted, StepBudgetExceeded
from .roof import DEFAULT_STEP_BUDGET, U, Roof, birkhoff, birkhoff_prefix, roof_eval


@dataclass(frozen=True)
class SpecialFlow:
    roof: Roof
    cf: CFExpansion
    step_budget: int = DEFAULT_STEP_BUDGET

    @property
    def alpha(self) -> CirclePoint:
        return self.cf.alpha

    @property
    def prec(self) -> int:
        return self.cf.alpha.prec

    def point(self, x, s: float, s_err: float = 0.0) -> "FlowPoint":
        """Build a point of the suspension, checking ``0 <= s < f(x)``."""
        if not isinstance(x, CirclePoint):
            x = CirclePoint.from_real(x, self.prec)
        s = float(s)
        if s < 0:
            raise ValueError(f"height {s} is negative")
        fx = roof_eval(self.roof, x)
        if s >= fx.upper:
            raise ValueError(f"height {s} is not below the roof value {fx.value}")
        return FlowPoint(x, s, s_err)


@dataclass(frozen=True)
class FlowPoint:
    """``(x, s)`` with an absolute error bound ``s_err`` on the height."""

    x: CirclePoint
    s: float
    s_err: float = 0.0

    @property
    def err(self) -> float:
        return self.x.err + self.s_err


def _bracket(flow: SpecialFlow, x: CirclePoint, tau: float):
    """Prefix sums covering every ``n`` that can satisfy the bracketing for ``tau``."""
    L = flow.roof.L
    reach = math.ceil(abs(tau) / L) + 2
    if reach > flow.step_budget:
        raise StepBudgetExceeded(f"|t| needs {reach} roof crossings, budget is {flow.step_budget}")
    lo, hi = (0, reach) if tau >= 0 else (-reach, 0)
    return birkhoff_prefix(flow.roof, flow.cf, x, lo, hi, flow.step_budget)


def flow_eval(flow: SpecialFlow, p: FlowPoint, t: float,
              on_crossing: str = "snap") -> tuple[FlowPoint, int]:
    """``T_t(p)`` and the crossing index ``n``.

    When ``s + t`` lies within the error budget of a crossing ``f^(k)(x)`` the
    result is canonicalised to the lower representative ``(x + k alpha, 0)``
    (``on_crossing="snap"``) or :class:`PrecisionExhausted` is raised
    (``on_crossing="raise"``).
    """
    if on_crossing not in ("snap", "raise"):
        raise ValueError("on_crossing must be 'snap' or 'raise'")
    if t == 0:
        return p, 0
    tau = p.s + t
    e_tau = p.s_err + U * abs(tau)
    ns, vals, errs = _bracket(flow, p.x, tau)
    idx = int(np.searchsorted(vals, tau, side="right")) - 1
    if idx < 0 or idx + 1 >= len(vals):
        raise PrecisionExhausted("bracket search left the prefix range")
    n = int(ns[idx])

    # re-certify both sides of the bracket with independent sums
    lo = birkhoff(flow.roof, flow.cf, p.x, n, flow.step_budget)
    hi = birkhoff(flow.roof, flow.cf, p.x, n + 1, flow.step_budget)
    if abs(lo.value - vals[idx]) > lo.err + errs[idx] or \
            abs(hi.value - vals[idx + 1]) > hi.err + errs[idx + 1]:
        raise PrecisionExhausted("prefix and direct Birkhoff sums disagree beyond their bounds")
    below = tau - e_tau >= lo.upper
    above = tau + e_tau < hi.lower
    if below and above:
        s_new = tau - lo.value
        return FlowPoint(p.x.rotate(flow.alpha, n), max(s_new, 0.0),
                         e_tau + lo.err + U * abs(s_new)), n
    if on_crossing == "raise":
        raise PrecisionExhausted("s + t lies within the error budget of a roof crossing")
    if not below and abs(tau - lo.value) <= e_tau + lo.err:
        k, err = n, e_tau + lo.err
    elif not above and abs(tau - hi.value) <= e_tau + hi.err:
        k, err = n + 1, e_tau + hi.err
    else:
        raise PrecisionExhausted("bracketing undecidable")
    return FlowPoint(p.x.rotate(flow.alpha, k), 0.0, err), k


def flow_metric(p: FlowPoint, q: FlowPoint) -> Approx:
    """``d^f(p, q) = ||x_p - x_q|| + |s_p - s_q|``."""
    dx = (p.x - q.x).norm()
    ds = abs(p.s - q.s)
    v = dx.value + ds
    return Approx(v, dx.err + 2.0 ** -53 * dx.value + p.s_err + q.s_err + 2 * U * v)


@dataclass
class CrossingSchedule:
    """Roof crossings ``t_n = f^(n)(x) - s`` of a point over ``[0, H)``.

    ``F[n]``/``F_err[n]`` hold ``f^(n)(x)`` for ``n = 0 .. len(times)`` so the
    last entry bounds the final segment.
    """

    p: FlowPoint
    horizon: float
    times: np.ndarray
    errs: np.ndarray
    F: np.ndarray
    F_err: np.ndarray
    alpha: CirclePoint

    def __len__(self):
        return len(self.times)

    @property
    def ns(self) -> np.ndarray:
        return np.arange(1, len(self.times) + 1)

    def base(self, n: int) -> CirclePoint:
        """Base point after ``n`` crossings."""
        return self.p.x.rotate(self.alpha, n)

    def gaps(self) -> np.ndarray:
        return np.diff(np.concatenate([[-self.p.s], self.times]))


def crossing_schedule(flow: SpecialFlow, p: FlowPoint, horizon: float) -> CrossingSchedule:
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    reach = math.ceil((horizon + p.s) / flow.roof.L) + 2
    if reach > flow.step_budget:
        raise StepBudgetExceeded(f"horizon needs {reach} crossings, budget is {flow.step_budget}")
    _, vals, errs = birkhoff_prefix(flow.roof, flow.cf, p.x, 0, reach, flow.step_budget)
    t = vals - p.s
    e = errs + p.s_err + U * np.abs(t)
    k = int(np.searchsorted(t[1:], horizon, side="left"))  # crossings with t < H
    if k + 1 < len(t) and abs(t[k + 1] - horizon) <= e[k + 1] and t[k + 1] != horizon:
        raise PrecisionExhausted("a crossing sits on the horizon within its error budget")
    return CrossingSchedule(p, float(horizon), t[1:k + 1].copy(), e[1:k + 1].copy(),
                            vals[:k + 2].copy(), errs[:k + 2].copy(), flow.alpha)


def make_flow(roof: Roof, cf: CFExpansion, step_budget: int = DEFAULT_STEP_BUDGET) -> SpecialFlow:
    return SpecialFlow(roof, cf, step_budget)
