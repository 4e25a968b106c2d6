from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from vnflow.circle import (
    Approx,
    Arc,
    CirclePoint,
    Verdict,
    arc_contains,
    check_precision,
    default_precision,
    digits_ge,
    digits_ge_const,
    digits_near,
    dist_to_int,
    frac,
    orbit_digits,
    shortest_arc,
)
from vnflow.errors import AmbiguousComparison, ArcTooLong, DegenerateArc, PrecisionExhausted

P = 256
M = 1 << P
nums = st.integers(min_value=0, max_value=M - 1)


def cp(x, err=0):
    return CirclePoint.from_real(x, P, err)


@pytest.mark.parametrize("x, want", [(1.25, 0.25), (-0.3, 0.7), (0, 0.0)])
def test_frac_examples(x, want):
    assert frac(x).value == pytest.approx(want, abs=1e-15)


def test_frac_of_exact_input_is_exact():
    assert frac(Fraction(5, 4)).fraction == Fraction(1, 4)
    assert frac(Fraction(5, 4)).err_ulps == 0
    assert frac("-0.3").err_ulps == 1


@pytest.mark.parametrize("x, want", [(0.4, 0.4), (0.75, 0.25), (3.0, 0.0)])
def test_dist_to_int_examples(x, want):
    assert dist_to_int(x) == pytest.approx(want, abs=1e-16)
    assert dist_to_int(Fraction(x)) == Fraction(want)


def test_shortest_arc_examples():
    a = shortest_arc(cp(0.1), cp(0.2))
    assert a.start.value == pytest.approx(0.1) and a.length == pytest.approx(0.1)

    w = shortest_arc(cp(0.95), cp(0.05))
    assert w.start.value == pytest.approx(0.95)
    assert w.length == pytest.approx(0.1)
    assert arc_contains(w, cp(0)) is Verdict.YES

    z = shortest_arc(cp(0.3), cp(0.3))
    assert z.length_ulps == 0
    assert arc_contains(z, cp(0.3)) is Verdict.YES


def test_shortest_arc_errors():
    with pytest.raises(ArcTooLong):
        shortest_arc(CirclePoint(0, P), CirclePoint(M // 2, P))
    with pytest.raises(AmbiguousComparison):
        shortest_arc(CirclePoint(0, P, 5), CirclePoint(M // 2 + 2, P))
    with pytest.raises(DegenerateArc):
        shortest_arc(cp(0.3), cp(0.3), distinct=True)


def test_arc_contains_examples():
    a = shortest_arc(cp(0.1), cp(0.2))
    assert arc_contains(a, cp(0.15)) is Verdict.YES
    assert arc_contains(a, cp(0.5)) is Verdict.NO
    # closed arc: exact endpoints belong to it
    exact = shortest_arc(CirclePoint(M // 8, P), CirclePoint(M // 4, P))
    assert arc_contains(exact, CirclePoint(M // 4, P)) is Verdict.YES
    assert arc_contains(exact, CirclePoint(M // 8, P)) is Verdict.YES
    assert arc_contains(exact, CirclePoint(M // 4 + 1, P)) is Verdict.NO


def test_arc_contains_undecidable_near_endpoint():
    a = Arc(CirclePoint(M // 8, P), M // 8, err_ulps=3)
    assert arc_contains(a, CirclePoint(M // 4 + 2, P)) is Verdict.UNDECIDABLE
    assert arc_contains(a, CirclePoint(M // 4 + 4, P)) is Verdict.NO


def test_verdict_has_no_truth_value():
    with pytest.raises(TypeError):
        bool(Verdict.UNDECIDABLE)


def test_approx_is_three_valued():
    a = Approx(1.0, 0.1)
    assert a.lt(1.2) is Verdict.YES
    assert a.lt(0.8) is Verdict.NO
    assert a.lt(1.05) is Verdict.UNDECIDABLE
    assert a.gt(0.85) is Verdict.YES
    assert a.gt(1.05) is Verdict.UNDECIDABLE


@pytest.mark.parametrize("prec", [32, 48, 100, 200])
def test_bad_precision(prec):
    with pytest.raises(ValueError):
        check_precision(prec)


def test_error_budget_guard():
    CirclePoint(0, 64, (1 << 32) - 1)
    with pytest.raises(PrecisionExhausted):
        CirclePoint(0, 64, 1 << 32)


def test_default_precision_env(monkeypatch):
    monkeypatch.setenv("VNFLOW_PRECISION", "320")
    assert default_precision() == 320
    monkeypatch.setenv("VNFLOW_PRECISION", "lots")
    with pytest.raises(ValueError):
        default_precision()
    monkeypatch.delenv("VNFLOW_PRECISION")
    assert default_precision() == 256


def test_from_real_rounds_to_half_ulp():
    x = CirclePoint.from_real(Fraction(1, 3), 64)
    assert abs(x.fraction - Fraction(1, 3)) <= Fraction(1, 2 ** 65)
    assert x.err_ulps == 1


@given(nums, nums)
def test_addition_is_exact(a, b):
    x, y = CirclePoint(a, P), CirclePoint(b, P)
    assert ((x + y) - y).num == a
    assert (x - y).fraction == (x.fraction - y.fraction) % 1


@given(nums, nums, st.integers(-10 ** 6, 10 ** 6))
def test_rotation_round_trip(a, s, k):
    x, alpha = CirclePoint(a, P), CirclePoint(s, P, 1)
    back = x.rotate(alpha, k).rotate(alpha, -k)
    assert back.num == a
    assert back.err_ulps == 2 * abs(k)


@given(nums)
def test_norm_matches_exact_distance(a):
    x = CirclePoint(a, P)
    assert x.norm().fraction == dist_to_int(x.fraction)


@given(nums, nums)
def test_precision_round_trip(a, e):
    x = CirclePoint(a, P, e % 1000)
    up = x.with_precision(P + 64)
    assert up.fraction == x.fraction
    down = up.with_precision(P)
    assert down.num == a and down.err_ulps >= x.err_ulps


@given(nums, nums, st.integers(1, 200))
def test_orbit_digits_match_big_integers(start, step, count):
    d = orbit_digits(start, step, count, P)
    for j in (0, count // 2, count - 1):
        v = (start + j * step) % M
        got = sum(int(d[t, j]) << (32 * t) for t in range(d.shape[0]))
        assert got == v


@given(nums, nums, st.integers(1, 1 << 40))
def test_digit_comparisons(start, c, budget):
    count = 64
    step = (start * 7 + 12345) % M
    d = orbit_digits(start, step, count, P)
    vals = [(start + j * step) % M for j in range(count)]
    assert list(digits_ge_const(d, c)) == [v >= c for v in vals]
    near = digits_near(d, c, budget, P)
    want = [min((v - c) % M, (c - v) % M) <= budget for v in vals]
    assert list(near) == want
    d2 = orbit_digits(c, step, count, P)
    vals2 = [(c + j * step) % M for j in range(count)]
    assert list(digits_ge(d, d2)) == [u >= v for u, v in zip(vals, vals2)]


@given(st.floats(0, 1, exclude_max=True), st.floats(0, 0.49))
def test_shortest_arc_length_is_distance(x, d):
    a, b = cp(x), cp(x + d)
    arc = shortest_arc(a, b)
    assert arc.dist.fraction == (a - b).norm().fraction
    assert arc_contains(arc, a) is not Verdict.NO
    assert arc_contains(arc, b) is not Verdict.NO


def test_orbit_digits_reject_huge_blocks():
    with pytest.raises(ValueError):
        orbit_digits(0, 1, (1 << 31) + 1, 64)


def test_digit_arrays_are_uint64():
    assert orbit_digits(1, 2, 3, 64).dtype == np.uint64
