"""Continued fractions of the rotation number and the orbit structure they control."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from typing import Sequence

from .circle import CirclePoint, Dist, Arc, DEFAULT_PRECISION, Verdict, check_precision, to_fraction
from .errors import (
    DepthExhausted,
    InsufficientPrecision,
    NonIrrational,
    PairTooFar,
    PrecisionExhausted,
    VNFlowError,
)

# name -> (pre-period, period) of the quotient stream a_1, a_2, ...
NAMED = {
    "golden": ((), (1,)),
    "sqrt2m1": ((), (2,)),
    "e-2": None,  # not eventually periodic, see _e_minus_two
}

STREAM_MAX_DEPTH = 100_000


def _e_minus_two(i: int) -> int:
    # e - 2 = [0; 1, 2, 1, 1, 4, 1, 1, 6, ...]
    if i == 1:
        return 1
    return 2 * (i + 1) // 3 if i % 3 == 2 else 1


class CFExpansion:
    """Partial quotients ``a_1, a_2, ...`` of alpha in (0, 1) with exact convergents.

    ``q[n]`` and ``p[n]`` hold ``q_n`` and ``p_n`` for ``0 <= n <= depth``
    (``q_0 = 1``, ``p_0 = 0``). The expansion grows on demand through
    :meth:`ensure`; growth is monotone and never changes existing entries.
    """

    def __init__(self, quotient_fn, prec: int = DEFAULT_PRECISION, *,
                 max_depth: int = STREAM_MAX_DEPTH, alpha: CirclePoint | None = None,
                 label: str = ""):
        check_precision(prec)
        self._quotient = quotient_fn
        self.prec = prec
        self.max_depth = max_depth
        self.label = label
        self.quotients: list[int] = []
        self.p: list[int] = [0]
        self.q: list[int] = [1]
        self.alpha = alpha if alpha is not None else self._alpha_from_stream()

    # -- construction helpers

    def _alpha_from_stream(self) -> CirclePoint:
        # run the recurrence privately until 1/(q_N q_{N+1}) < 2**-(P+2)
        target = 1 << (self.prec + 2)
        pm, qm, p, q = 1, 0, 0, 1
        i = 0
        while True:
            i += 1
            if i > self.max_depth:
                raise DepthExhausted("quotient stream too short to fix alpha")
            a = self._quotient(i)
            pm, qm, p, q = p, q, a * p + pm, a * q + qm
            if qm * q >= target:
                break
        m = 1 << self.prec
        num = round(Fraction(pm * m, qm))
        # |alpha - p/q| < 1/4 ulp, plus 1/2 ulp rounding
        return CirclePoint(num % m, self.prec, 1)

    @property
    def depth(self) -> int:
        return len(self.quotients)

    def ensure(self, n: int) -> "CFExpansion":
        """Grow the expansion so that ``q[n]`` exists."""
        if n > self.max_depth:
            raise DepthExhausted(f"depth {n} exceeds the available {self.max_depth} quotients")
        while self.depth < n:
            i = self.depth + 1
            a = self._quotient(i)
            if a is None:
                raise DepthExhausted(f"quotient a_{i} is not available")
            self.quotients.append(a)
            if i == 1:
                self.p.append(1)
                self.q.append(a)
            else:
                self.p.append(a * self.p[-1] + self.p[-2])
                self.q.append(a * self.q[-1] + self.q[-2])
        return self

    def qn(self, n: int) -> int:
        self.ensure(n)
        return self.q[n]

    def pn(self, n: int) -> int:
        self.ensure(n)
        return self.p[n]

    def signed_error_ulps(self, n: int) -> int:
        """``q_n * alpha - p_n`` in ulps (exact for the stored alpha)."""
        return self.qn(n) * self.alpha.num - self.pn(n) * (1 << self.prec)

    def __repr__(self):
        head = ", ".join(map(str, self.quotients[:8]))
        return f"CFExpansion({self.label or '?'}: [0; {head}{', ...' if self.depth > 8 else ''}])"


def _stream(head: Sequence[int], tail: Sequence[int]):
    head, tail = tuple(head), tuple(tail)
    for a in head + tail:
        if int(a) != a or a < 1:
            raise ValueError(f"partial quotients must be positive integers, got {a!r}")

    def quotient(i: int) -> int:
        if i <= len(head):
            return head[i - 1]
        return tail[(i - 1 - len(head)) % len(tail)]

    return quotient


def _certified_quotients(lo: Fraction, hi: Fraction, limit: int) -> list[int]:
    """Quotients shared by every number in ``[lo, hi]`` (both in (0, 1))."""
    out: list[int] = []
    while len(out) < limit and lo > 0:
        a = math.floor(1 / hi)
        if math.floor(1 / lo) != a:
            break
        out.append(a)
        lo, hi = 1 / hi - a, 1 / lo - a
        if lo > hi:
            lo, hi = hi, lo
    return out


def expand(alpha_spec, N: int = 0, prec: int | None = None) -> CFExpansion:
    """Build the continued-fraction expansion of alpha down to depth ``N``.

    ``alpha_spec`` is one of

    * a name: ``"golden"`` ((sqrt 5 - 1)/2), ``"sqrt2m1"``, ``"e-2"``;
    * a mapping ``{"quotients": [...], "periodic": [...]}`` giving a pre-period
      and a repeating tail of ``a_1, a_2, ...``;
    * a mapping ``{"decimal": "0.41421356..."}`` or a decimal string. The last
      digit is treated as uncertain by one unit.
    """
    prec = DEFAULT_PRECISION if prec is None else prec
    if N < 0:
        raise ValueError("N must be non-negative")
    spec = alpha_spec
    if isinstance(spec, str) and spec not in NAMED:
        spec = {"decimal": spec}
    if isinstance(spec, str):
        if spec == "e-2":
            cf = CFExpansion(_e_minus_two, prec, label=spec)
        else:
            head, tail = NAMED[spec]
            cf = CFExpansion(_stream(head, tail), prec, label=spec)
    elif isinstance(spec, Fraction) or isinstance(spec, int):
        raise NonIrrational(f"{spec} is rational")
    elif isinstance(spec, dict) and "decimal" in spec:
        cf = _from_decimal(str(spec["decimal"]), prec)
    elif isinstance(spec, dict) or isinstance(spec, (list, tuple)):
        if isinstance(spec, dict):
            head = list(spec.get("quotients", []))
            tail = list(spec.get("periodic", []))
        else:
            head, tail = list(spec), []
        if not tail:
            raise NonIrrational("finite quotient list without a periodic tail is rational")
        label = f"[0; {','.join(map(str, head))}{'|' if head else ''}({','.join(map(str, tail))})]"
        cf = CFExpansion(_stream(head, tail), prec, label=label)
    else:
        raise TypeError(f"unsupported alpha specification {alpha_spec!r}")
    return cf.ensure(N)


def _from_decimal(text: str, prec: int) -> CFExpansion:
    dec = Decimal(text.strip())
    if not dec.is_finite():
        raise ValueError(f"non-finite decimal {text!r}")
    v = Fraction(dec)
    exp = dec.as_tuple().exponent
    u = Fraction(1, 10 ** (-exp)) if exp < 0 else Fraction(1)
    lo, hi = v - u, v + u
    if math.floor(lo) != math.floor(hi):
        raise InsufficientPrecision("integer part of the decimal is not certain")
    base = math.floor(lo)
    lo, hi = lo - base, hi - base
    if lo <= 0:
        raise InsufficientPrecision("decimal too close to an integer")
    certified = _certified_quotients(lo, hi, STREAM_MAX_DEPTH)
    try:
        alpha = CirclePoint.from_real(v, prec, err=u)
    except PrecisionExhausted:
        raise InsufficientPrecision(
            f"{-exp} decimal digits cannot fix alpha to 2**-{prec // 2}") from None

    def quotient(i: int):
        return certified[i - 1] if i <= len(certified) else None

    return CFExpansion(quotient, prec, max_depth=len(certified), alpha=alpha,
                       label=f"decimal:{text.strip()[:20]}")


# ---------------------------------------------------------------------------


def qn_alpha_norm(cf: CFExpansion, n: int) -> Dist:
    """``|q_n alpha - p_n|``, certified against ``1/(2 q_{n+1}) < . < 1/q_{n+1}``.

    This is ``||q_n alpha||`` for every ``n >= 1``. At ``n = 0`` it is ``alpha``
    itself, which differs from ``||alpha||`` when ``a_1 = 1``.
    """
    qn, pn, qn1 = cf.qn(n), cf.pn(n), cf.qn(n + 1)
    a = cf.alpha
    v = Dist(abs(qn * a.num - pn * a.modulus), a.prec, qn * a.err_ulps)
    lower, upper = v.gt(Fraction(1, 2 * qn1)), v.lt(Fraction(1, qn1))
    if Verdict.UNDECIDABLE in (lower, upper):
        raise PrecisionExhausted(f"sandwich for ||q_{n} alpha|| undecidable at P={a.prec}")
    if lower is Verdict.NO or upper is Verdict.NO:
        raise VNFlowError(f"sandwich violated at n={n}: alpha does not match its quotients")
    return v


def min_orbit_gap(cf: CFExpansion, n: int) -> Dist:
    """Smallest distance between two of the points ``0, alpha, ..., (q_n - 1) alpha``.

    Uses ``||i alpha - j alpha|| = ||(j - i) alpha||``, which holds exactly in the
    fixed-point representation, so the minimum runs over differences only.
    The result is checked to equal ``||q_{n-1} alpha||`` and to exceed ``1/(2 q_n)``.
    When ``q_n = 1`` the minimum is vacuous and ``||q_{n-1} alpha||`` is returned.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    a = cf.alpha
    m = a.modulus
    qn = cf.qn(n)
    expect = min((cf.q[n - 1] * a.num) % m, m - (cf.q[n - 1] * a.num) % m)
    err = qn * a.err_ulps
    if qn == 1:
        return Dist(expect, a.prec, cf.q[n - 1] * a.err_ulps)
    best = m
    v = 0
    for _ in range(1, qn):
        v = (v + a.num) % m
        best = min(best, v, m - v)
    if best != expect:
        if abs(best - expect) <= 2 * err:
            raise PrecisionExhausted("minimum gap ties with ||q_{n-1} alpha|| within budget")
        raise VNFlowError(f"minimum orbit gap differs from ||q_{n-1} alpha|| at n={n}")
    gap = Dist(best, a.prec, err)
    check = gap.gt(Fraction(1, 2 * qn))
    if check is Verdict.UNDECIDABLE:
        raise PrecisionExhausted("gap bound 1/(2 q_n) undecidable")
    if check is Verdict.NO:
        raise VNFlowError(f"minimum gap not above 1/(2 q_n) at n={n}")
    return gap


@dataclass(frozen=True)
class Atom:
    """One arc of the orbit partition.

    ``kind`` is ``"I"`` for rotated copies ``R^k I_n`` of ``I_n = [0, q_{n-1} alpha]``
    and ``"I'"`` for copies of ``I'_n = [(q_n - q_{n-1}) alpha, 0]``.
    The ``I'`` atoms are the long ones.
    """

    arc: Arc
    kind: str
    k: int | None

    @property
    def long(self) -> bool:
        return self.kind == "I'"


@dataclass
class OrbitPartition:
    n: int
    direction: int
    atoms: list[Atom] = field(default_factory=list)

    def count(self, kind: str) -> int:
        return sum(1 for a in self.atoms if a.kind == kind)


def orbit_partition(cf: CFExpansion, n: int, direction: int = 1) -> OrbitPartition:
    """Partition of T cut at ``0, s, 2s, ..., (q_n - 1)s`` with ``s = direction * alpha``.

    ``direction=+1`` gives the points ``k alpha``; ``direction=-1`` the points
    ``-k alpha`` (the mirror image).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    a = cf.alpha
    m = a.modulus
    qn, qm = cf.qn(n), cf.q[n - 1]
    step = a.num if direction == 1 else (-a.num) % m
    pts = sorted(((k * step) % m, k) for k in range(qn))
    short_len = abs(qm * a.num - cf.p[n - 1] * m)
    atoms = []
    for idx, (u, i) in enumerate(pts):
        v, j = pts[(idx + 1) % qn]
        length = (v - u) % m or m
        kind = "I" if length == short_len else "I'"
        span = qm if kind == "I" else qn - qm
        k = min(i, j) if abs(i - j) == span else None
        start = CirclePoint(u, a.prec, i * a.err_ulps)
        atoms.append(Atom(Arc(start, length, (i + j) * a.err_ulps), kind, k))
    return OrbitPartition(n, direction, atoms)


def orbit_points(cf: CFExpansion, n: int, direction: int = 1) -> list[int]:
    """Sorted numerators of ``k * direction * alpha`` for ``0 <= k < q_n`` (cached on ``cf``)."""
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    cache = cf.__dict__.setdefault("_orbit_points", {})
    key = (n, direction)
    if key not in cache:
        a = cf.alpha
        m = a.modulus
        step = a.num if direction == 1 else (-a.num) % m
        cache[key] = sorted((k * step) % m for k in range(cf.qn(n)))
    return cache[key]


def scale_index(cf: CFExpansion, dist, beta, M) -> int:
    """The unique ``n`` with ``beta/(200 M q_{n+1}) < dist <= beta/(200 M q_n)``."""
    if isinstance(dist, Dist):
        d_lo, d_hi = dist.lower, dist.upper
    else:
        d_lo = d_hi = to_fraction(dist)
    if d_hi <= 0:
        raise ValueError("distance must be positive")
    c = to_fraction(beta) / (200 * to_fraction(M))
    if d_lo > c:
        raise PairTooFar(f"distance exceeds beta/(200 M) = {float(c):.3g}")
    if d_hi > c:
        raise PrecisionExhausted("distance sits on the beta/(200 M) boundary")
    n = 0
    while True:
        b = c / cf.qn(n + 1)
        if d_lo > b:
            return n
        if d_hi > b:
            raise PrecisionExhausted(f"distance sits on the scale boundary at n={n}")
        n += 1
