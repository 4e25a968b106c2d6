"""Parabolic divergence of nearby orbits.

For ``x, y`` close enough the orbit of the arc ``[x, y]`` either hits the
discontinuity within ``q_n`` steps (case A), or avoids it for ``q_{n+1}/6``
steps forward (case B) or backward (case C). Each case comes with a window
``J`` of times on which the Birkhoff sums of ``x`` and ``y`` stay within
``50 M / L`` of each other, and a sub-window ``U`` on which they are at least
``beta L / (10^6 M^2)`` apart. Everything here checks those statements by
brute force; windows are built in exact rational arithmetic.
"""
from __future__ import annotations

import bisect
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .cfrac import CFExpansion, orbit_points, scale_index
from .circle import CirclePoint, Dist, Verdict, shortest_arc, to_fraction
from .errors import (
    AmbiguousComparison,
    DecayNotObserved,
    DistancePreconditionViolated,
    EmptyU,
    PairTooFar,
    PrecisionExhausted,
    RescaleRequired,
    StepBudgetExceeded,
    TrichotomyFailure,
)
from .flow import SpecialFlow
from .roof import c1_decay_estimate, diff_scan, hit_scan

PASS, FAIL, UNDECIDABLE = "pass", "fail", "undecidable"


def check_beta(beta) -> Fraction:
    b = to_fraction(beta)
    if not 0 < b <= 1:
        raise ValueError(f"beta must lie in (0, 1], got {beta}")
    return b


# ---------------------------------------------------------------------------
# trichotomy


@dataclass(frozen=True)
class Classification:
    """Outcome of the three-way case analysis at scale ``n``.

    ``case`` is the first of a, b, c that holds. ``hit_k`` is the first
    ``0 <= k < q_n`` with ``0 in R^k [x, y]`` (case a only). ``holds`` lists
    every case verified by the scans, and ``predicted`` the cases implied by
    the geometric argument (far endpoint of the containing atom and the sign
    of ``q_n alpha - p_n``).
    """

    case: str
    n: int
    hit_k: int | None
    holds: tuple[str, ...]
    predicted: tuple[str, ...]
    reach: int

    @property
    def prediction_consistent(self) -> bool:
        return all(c in self.holds for c in self.predicted)


def _gaps(cf: CFExpansion, arc, n: int, direction: int):
    """Distances from ``[x, y]`` to the two ends of the atom of the partition by
    ``0, d alpha, ..., (q_n - 1) d alpha`` (``d = direction``) that contains it,
    or ``None`` if some partition point lies on ``[x, y]``."""
    m = arc.start.modulus
    pts = orbit_points(cf, n, direction)
    i = bisect.bisect_right(pts, arc.start.num) - 1
    left, right = pts[i % len(pts)], pts[(i + 1) % len(pts)]
    length = (right - left) % m or m
    off = (arc.start.num - left) % m
    if off + arc.length_ulps <= length:
        return Fraction(off, m), Fraction(length - off - arc.length_ulps, m)
    return None


def _predict(cf: CFExpansion, arc, n: int) -> tuple[str, ...]:
    """Cases implied by the far-endpoint argument.

    Orbit points of one sign enter the atom containing ``[x, y]`` only from
    the end that the shift by ``q_n alpha - p_n`` moves inward; if that end is
    farther than ``1/(6 q_n)`` the corresponding case follows. Negative times
    use the partition by ``-k alpha``, positive times its mirror by ``k alpha``.
    """
    m = arc.start.modulus
    a, p_n, q_n = cf.alpha, cf.pn(n), cf.qn(n)
    sign = q_n * a.num - p_n * m
    far = Fraction(1, 6 * q_n)
    out = []
    g = _gaps(cf, arc, n, -1)
    # negative times k = i - j q_n drift by -j (q_n alpha - p_n)
    if g is not None and (g[0] if sign < 0 else g[1]) > far:
        out.append("b")
    g = _gaps(cf, arc, n, 1)
    # positive times k = i + j q_n drift by +j (q_n alpha - p_n)
    if g is not None and (g[1] if sign < 0 else g[0]) > far:
        out.append("c")
    return tuple(out)


def classify_pair(cf: CFExpansion, x: CirclePoint, y: CirclePoint, n: int) -> Classification:
    """Which of the three orbit cases holds for ``[x, y]`` at scale ``n``."""
    arc = shortest_arc(x, y)
    q_n = cf.qn(n)
    v = arc.dist.lt(Fraction(1, 6 * q_n))
    if v is Verdict.UNDECIDABLE:
        raise AmbiguousComparison("||x - y|| is within the error budget of 1/(6 q_n)")
    if v is Verdict.NO:
        raise DistancePreconditionViolated(f"||x - y|| >= 1/(6 q_{n}) with q_{n} = {q_n}")
    reach = cf.qn(n + 1) // 6
    hits = hit_scan(cf, arc, 0, q_n)
    if hits.any():
        k = int(np.argmax(hits))
        return Classification("a", n, k, ("a",), (), reach)
    holds = []
    if not hit_scan(cf, arc, 0, reach + 1).any():
        holds.append("b")
    if not hit_scan(cf, arc, -reach, 1).any():
        holds.append("c")
    if not holds:
        raise TrichotomyFailure(f"no case holds at n={n} for {x!r}, {y!r}")
    return Classification(holds[0], n, None, tuple(holds), _predict(cf, arc, n), reach)


# ---------------------------------------------------------------------------
# delta_0


@dataclass(frozen=True)
class Delta0Estimate:
    """``delta_0`` and its ingredients.

    ``uniform`` is ``eps / C`` with ``C`` the n-independent Lipschitz constant
    of every ``g^(n)`` (rigorous for trigonometric polynomials); ``heuristic``
    is ``eps / (n_eps sup|g'|)`` from the empirical cancellation index.
    """

    value: float
    cap: float
    eps: float
    n_eps: int | None
    heuristic: float | None
    uniform: float | None
    decay_observed: bool
    branch: str

    def to_record(self) -> dict:
        return {k: getattr(self, k) for k in
                ("value", "cap", "eps", "n_eps", "heuristic", "uniform", "decay_observed", "branch")}


def epsilon(flow: SpecialFlow, beta) -> float:
    """The fixed ``eps = beta L / (2 * 10^6 M^2)``."""
    b = float(check_beta(beta))
    return 0.5 * b * flow.roof.L / (1e6 * flow.roof.M ** 2)


def find_n_eps(flow: SpecialFlow, eps: float, grid_size: int = 256, run: int = 3) -> int:
    """Smallest dyadic ``n`` whose decay estimate and the next ``run - 1`` dyadic
    ones are all below ``eps``; probes stop at the step budget."""
    good = 0
    j = 0
    while (1 << j) <= flow.step_budget:
        if c1_decay_estimate(flow.roof, flow.cf, 1 << j, grid_size) < eps:
            good += 1
            if good == run:
                return 1 << (j - run + 1)
        else:
            good = 0
        j += 1
    raise DecayNotObserved(f"no {run} consecutive dyadic probes below eps={eps:.3g} "
                           f"up to the step budget {flow.step_budget}")


def delta0_estimate(flow: SpecialFlow, beta, strict: bool = False) -> Delta0Estimate:
    roof = flow.roof
    b = float(check_beta(beta))
    cap = b * roof.L / (1e5 * roof.M ** 2)
    eps = epsilon(flow, beta)
    g = roof.g
    if g.is_zero:
        return Delta0Estimate(cap, cap, eps, 1, None, None, True, "cap")
    uniform = eps / g.uniform_cancellation(flow.alpha.value)
    try:
        n_eps = find_n_eps(flow, eps)
        heuristic = eps / (n_eps * g.sup_deriv)
        observed = True
    except DecayNotObserved:
        if strict:
            raise
        n_eps, heuristic, observed = None, None, False
    best = max(uniform, heuristic or 0.0)
    value = min(cap, best)
    if value == cap:
        branch = "cap"
    else:
        branch = "uniform" if best == uniform else "n_eps"
    return Delta0Estimate(value, cap, eps, n_eps, heuristic, uniform, observed, branch)


# ---------------------------------------------------------------------------
# windows


@dataclass(frozen=True)
class DivergenceWindows:
    """``J`` and ``U`` as closed integer intervals ``(lo, hi)``."""

    case: str
    n: int
    q_n: int
    J: tuple[int, int]
    U: tuple[int, int]
    beta: Fraction
    dist: Fraction
    classification: Classification | None = None

    @property
    def size_J(self) -> int:
        return self.J[1] - self.J[0] + 1

    @property
    def size_U(self) -> int:
        return max(0, self.U[1] - self.U[0] + 1)

    def to_record(self) -> dict:
        return {"case": self.case, "n": self.n, "q_n": self.q_n, "J": list(self.J),
                "U": list(self.U), "size_J": self.size_J, "size_U": self.size_U}


def _check_slope(flow: SpecialFlow):
    if flow.roof.A != 1:
        raise RescaleRequired(f"slope A = {flow.roof.A}; rescale time by 1/A so that A = 1")


def build_windows(flow: SpecialFlow, x: CirclePoint, y: CirclePoint, beta,
                  delta0: float | None = None) -> DivergenceWindows:
    _check_slope(flow)
    b = check_beta(beta)
    roof, cf = flow.roof, flow.cf
    arc = shortest_arc(x, y, distinct=True)
    d = arc.dist
    if delta0 is not None and d.lt(to_fraction(delta0)) is not Verdict.YES:
        raise PairTooFar(f"||x - y|| = {d.value:.3g} is not below delta_0 = {delta0:.3g}")
    L, M = to_fraction(roof.L), to_fraction(roof.M)
    n = scale_index(cf, d, b, M)
    cls = classify_pair(cf, x, y, n)
    q_n = cf.qn(n)
    dist = d.fraction
    if cls.case == "a":
        return DivergenceWindows("A", n, q_n, (0, 2 * q_n - 1), (q_n, 2 * q_n - 1), b, dist, cls)
    k_real = b * L / (10 ** 5 * M * M * dist)
    K = math.floor(k_real)
    lo_u = math.ceil(k_real / 2)
    if lo_u > K:
        raise EmptyU(f"U is empty: beta L/(10^5 M^2 ||x-y||) = {float(k_real):.3g}")
    if cls.case == "b":
        return DivergenceWindows("B", n, q_n, (0, K), (lo_u, K), b, dist, cls)
    return DivergenceWindows("C", n, q_n, (-K, 0), (-K, -lo_u), b, dist, cls)


# ---------------------------------------------------------------------------
# certificate


@dataclass
class PropCertificate:
    windows: DivergenceWindows
    check_i: str
    check_ii: str
    check_iii: str
    margins: dict
    witnesses: dict
    extras: dict
    precision: int
    worst_err: float
    series: dict = field(default_factory=dict, repr=False)

    @property
    def verdict(self) -> str:
        checks = [self.check_i, self.check_ii, self.check_iii] + \
            [v for k, v in self.extras.items() if k.endswith("_check")]
        if FAIL in checks:
            return FAIL
        if UNDECIDABLE in checks:
            return UNDECIDABLE
        return PASS

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    def to_record(self) -> dict:
        return {
            "windows": self.windows.to_record(),
            "verdicts": {"i": self.check_i, "ii": self.check_ii, "iii": self.check_iii},
            "verdict": self.verdict,
            "margins": self.margins,
            "witnesses": self.witnesses,
            "extras": self.extras,
            "precision_used": self.precision,
            "worst_error": self.worst_err,
        }


def _verdict(margin_lower: float, margin_upper: float) -> str:
    if margin_lower > 0:
        return PASS
    if margin_upper < 0:
        return FAIL
    return UNDECIDABLE


def verify_prop(flow: SpecialFlow, x: CirclePoint, y: CirclePoint, beta,
                w: DivergenceWindows) -> PropCertificate:
    """Check the three assertions on the given windows by direct evaluation."""
    _check_slope(flow)
    b = check_beta(beta)
    roof = flow.roof
    L, M = to_fraction(roof.L), to_fraction(roof.M)
    d = shortest_arc(x, y).dist
    extras: dict = {}

    # (i): 0 in J and max |J| <= beta / (100 M ||x - y||), exactly
    J, Uw = w.J, w.U
    top = max(abs(J[0]), abs(J[1]))
    rhs_lo = b / (100 * M * d.upper) if d.upper > 0 else None
    rhs_hi = b / (100 * M * d.lower) if d.lower > 0 else None
    contains0 = J[0] <= 0 <= J[1]
    if not contains0 or (rhs_hi is not None and top > rhs_hi):
        check_i = FAIL
    elif rhs_lo is not None and top <= rhs_lo:
        check_i = PASS
    else:
        check_i = UNDECIDABLE
    margin_i = float(rhs_lo - top) if rhs_lo is not None else None

    u_inside = J[0] <= Uw[0] and Uw[1] <= J[1] and w.size_U > 0
    extras["U_size_check"] = PASS if u_inside and 10 * w.size_U > w.size_J else FAIL
    extras["size_J"], extras["size_U"] = w.size_J, w.size_U

    # (ii) and (iii) on one scan over the integer points of (10 M / L) J
    c = 10 * M / L
    lo, hi = math.ceil(c * J[0]), math.floor(c * J[1])
    direction = 1 if hi > 0 or lo == 0 else -1
    N = hi if direction == 1 else -lo
    if N > flow.step_budget:
        raise StepBudgetExceeded(f"window needs {N} steps, budget is {flow.step_budget}")
    scan = diff_scan(roof, flow.cf, x, y, N, direction, flow.step_budget)
    ns, delta, err = scan.ns, scan.delta, scan.err
    # restrict to the integer window [lo, hi]
    sel = (ns >= lo) & (ns <= hi)
    bound_ii = float(50 * M / L)
    absd = np.abs(delta)
    m2_lo = bound_ii - (absd + err)
    m2_hi = bound_ii - (absd - err)
    i2 = int(np.argmin(np.where(sel, m2_lo, np.inf)))
    check_ii = _verdict(float(m2_lo[i2]), float(np.min(np.where(sel, m2_hi, np.inf))))

    bound_iii = float(b * L / (10 ** 6 * M * M))
    selU = (ns >= Uw[0]) & (ns <= Uw[1])
    if selU.any():
        m3_lo = absd - err - bound_iii
        m3_hi = absd + err - bound_iii
        i3 = int(np.argmin(np.where(selU, m3_lo, np.inf)))
        check_iii = _verdict(float(m3_lo[i3]), float(np.min(np.where(selU, m3_hi, np.inf))))
        margin_iii, n_iii = float(m3_lo[i3]), int(ns[i3])
    else:
        check_iii, margin_iii, n_iii = FAIL, None, None
    if scan.undecidable:
        check_ii = UNDECIDABLE if check_ii == PASS else check_ii
        check_iii = UNDECIDABLE if check_iii == PASS else check_iii
    extras["undecidable_terms"] = scan.undecidable

    # hit counts D_n along the scan (forward time only carries the case-A bounds)
    hits = scan.hits
    extras["max_hits"] = int(hits[sel].max()) if sel.any() else 0
    if w.case == "A":
        bound_dm = 40 * M / L
        extras["D_n_bound_check"] = PASS if extras["max_hits"] <= bound_dm else FAIL
        min_u = int(hits[selU].min()) if selU.any() else 0
        extras["min_hits_on_U"] = min_u
        extras["D_n_on_U_check"] = PASS if min_u >= 1 else FAIL

    return PropCertificate(
        windows=w,
        check_i=check_i,
        check_ii=check_ii,
        check_iii=check_iii,
        margins={"i": margin_i, "ii": float(m2_lo[i2]), "iii": margin_iii},
        witnesses={"ii_n": int(ns[i2]), "iii_n": n_iii, "scan_range": [int(lo), int(hi)]},
        extras=extras,
        precision=x.prec,
        worst_err=float(err[sel].max()) if sel.any() else 0.0,
        series={"n": ns, "delta": delta, "err": err, "hits": hits},
    )


# ---------------------------------------------------------------------------
# pair sampling


def admissible_distance(flow: SpecialFlow, beta, d: float) -> bool:
    """Distances for which every window fits the step budget."""
    L = flow.roof.L
    return d > 0 and float(check_beta(beta)) / (10 * L * d) <= flow.step_budget


def sample_pair(flow: SpecialFlow, beta, delta0: float, rng: random.Random,
                case_a_fraction: float = 0.0, max_tries: int = 1000) -> tuple[CirclePoint, CirclePoint]:
    """A pair with ``0 < ||x - y|| < delta0`` drawn from ``rng``.

    ``x`` is uniform at the working precision and ``||x - y|| = delta0 * u``
    with ``u`` uniform. With probability ``case_a_fraction`` the pair is
    instead placed so that some ``-k alpha`` (``0 <= k < q_n``) lies inside
    ``[x, y]``, with ``||x - y||`` uniform in ``[delta0/10, delta0)``.
    """
    P = flow.prec
    m = 1 << P
    a = flow.alpha
    M = flow.roof.M
    for _ in range(max_tries):
        targeted = case_a_fraction > 0 and rng.random() < case_a_fraction
        u = rng.random()
        d = delta0 * (0.1 + 0.9 * u) if targeted else delta0 * u
        d_ulps = int(Fraction(d) * m)
        if d_ulps <= 0 or not admissible_distance(flow, beta, d):
            continue
        if targeted:
            try:
                n = scale_index(flow.cf, Fraction(d_ulps, m), beta, M)
            except (PairTooFar, PrecisionExhausted):
                continue
            k = rng.randrange(flow.cf.qn(n))
            off = rng.randrange(d_ulps + 1)
            xn = (-k * a.num - off) % m
        else:
            xn = rng.getrandbits(P)
        x = CirclePoint(xn, P)
        y = CirclePoint((xn + d_ulps) % m, P)
        return x, y
    raise PairTooFar("could not sample an admissible pair")


def distance_of(x: CirclePoint, y: CirclePoint) -> Dist:
    return shortest_arc(x, y).dist


__all__ = [
    "Classification", "Delta0Estimate", "DivergenceWindows", "PropCertificate",
    "classify_pair", "build_windows", "verify_prop", "delta0_estimate", "epsilon",
    "find_n_eps", "sample_pair", "admissible_distance", "check_beta", "distance_of",
    "PASS", "FAIL", "UNDECIDABLE",
]
