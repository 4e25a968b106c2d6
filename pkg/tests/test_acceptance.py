"""Acceptance checks, one test per criterion.

Each test prints a single ``criterion N PASS`` or ``criterion N FAIL`` line
(visible with or without ``-s``) together with its wall-clock time.
Run alone with ``pytest tests/test_acceptance.py -v``.
"""
import math
import random
import time
import warnings
from contextlib import contextmanager
from fractions import Fraction

import mpmath as mp
import numpy as np
import pytest
import yaml

from oracles import FloatOrbit, mp_alpha, norm, sampled_distance, sampled_hamming
from vnflow.cfrac import expand, min_orbit_gap, qn_alpha_norm
from vnflow.circle import CirclePoint
from vnflow.cli import deterministic_view, dumps_report, run_c1decay, run_certify, run_trichotomy
from vnflow.config import load_config
from vnflow.divergence import PASS, delta0_estimate
from vnflow.flow import FlowPoint, flow_eval, flow_metric, make_flow
from vnflow.profile import (
    GridPartition,
    check_gamma_density,
    close_at_time_pair,
    closeness_profile,
    delta_threshold,
    hamming_distance,
)
from vnflow.roof import birkhoff, make_roof, roof_eval

pytestmark = pytest.mark.acceptance

P = 256
MOD = 1 << P
ALPHAS = {"golden": "golden", "sqrt2m1": "sqrt2m1", "cf123": {"quotients": [], "periodic": [1, 2, 3]}}
DEMO = [(1, 0.0, 0.05)]


@contextmanager
def criterion(num, title, capsys, limit=None):
    t0 = time.perf_counter()
    notes = {}
    try:
        yield notes
        elapsed = time.perf_counter() - t0
        if limit is not None:
            assert elapsed < limit, f"took {elapsed:.1f} s, limit {limit} s"
    except BaseException as e:
        elapsed = time.perf_counter() - t0
        with capsys.disabled():
            print(f"\ncriterion {num} FAIL  {title}  ({elapsed:.1f} s)  {type(e).__name__}: {e}")
        raise
    extra = "  " + ", ".join(f"{k}={v}" for k, v in notes.items()) if notes else ""
    with capsys.disabled():
        print(f"\ncriterion {num} PASS  {title}  ({elapsed:.1f} s){extra}")


def test_continued_fraction_sandwich(capsys):
    with criterion(1, "continued-fraction sandwich", capsys, limit=1.0) as notes:
        count = 0
        for spec in ALPHAS.values():
            cf = expand(spec, 22, P)
            for n in range(21):
                d = qn_alpha_norm(cf, n)
                assert Fraction(1, 2 * cf.qn(n + 1)) < d.lower, (spec, n)
                assert d.upper < Fraction(1, cf.qn(n + 1)), (spec, n)
                count += 1
        notes["certified"] = count
    # the certified values themselves against the high-precision oracle
    for spec in ALPHAS.values():
        cf = expand(spec, 22, P)
        alpha = mp_alpha(spec)
        for n in range(21):
            ref = abs(cf.qn(n) * alpha - cf.pn(n))
            assert abs(mp.mpf(qn_alpha_norm(cf, n).ulps) / MOD - ref) < mp.mpf(2) ** -200


def _min_pair_gap(points, m):
    pts = sorted(points)
    gaps = [b - a for a, b in zip(pts, pts[1:])] + [pts[0] + m - pts[-1]]
    return min(gaps)


def test_three_distance_minimum(capsys):
    with criterion(2, "three-distance minimum gap", capsys, limit=30.0) as notes:
        checked = 0
        for spec in ALPHAS.values():
            cf = expand(spec, 30, P)
            alpha = mp_alpha(spec)
            a = cf.alpha.num
            n = 1
            while cf.qn(n) <= 5000:
                q = cf.qn(n)
                if q < 2:
                    # no pairs i < j < q_n
                    n += 1
                    continue
                # ||i alpha - j alpha|| = ||(j - i) alpha||: every difference 1 <= k < q_n
                by_diff = min(min(k * a % MOD, MOD - k * a % MOD) for k in range(1, q))
                # and the same minimum from the sorted orbit points themselves
                by_sort = _min_pair_gap([k * a % MOD for k in range(q)], MOD)
                assert by_diff == by_sort
                if q <= 200:
                    pts = [k * a % MOD for k in range(q)]
                    allpairs = min(min((u - v) % MOD, (v - u) % MOD)
                                   for i, u in enumerate(pts) for v in pts[i + 1:])
                    assert allpairs == by_diff
                ref = norm(cf.qn(n - 1) * alpha)
                assert abs(mp.mpf(by_diff) / MOD - ref) < mp.mpf(2) ** -200
                gap = min_orbit_gap(cf, n)
                assert abs(mp.mpf(gap.ulps) / MOD - ref) < mp.mpf(2) ** -200
                assert gap.lower > Fraction(1, 2 * q)
                checked += 1
                n += 1
        notes["scales"] = checked


def test_cocycle_identity_and_growth(capsys):
    flow = make_flow(make_roof(DEMO, 1.0, 0.7), expand("golden", 0))
    roof, cf = flow.roof, flow.cf
    rng = random.Random(2024)
    with criterion(3, "cocycle identity and linear growth", capsys, limit=10.0) as notes:
        worst = 0.0
        for _ in range(1000):
            x = CirclePoint(rng.getrandbits(P), P)
            n, m = rng.randint(-1000, 1000), rng.randint(-1000, 1000)
            lhs = birkhoff(roof, cf, x, n + m)
            fn = birkhoff(roof, cf, x, n)
            fm = birkhoff(roof, cf, x.rotate(cf.alpha, n), m)
            diff = abs(lhs.value - (fn.value + fm.value))
            worst = max(worst, diff)
            assert diff <= 1e-12
            # certified |f^(n)(x)| >= |n| L from the enclosure
            assert abs(fn.value) - fn.err >= abs(n) * roof.L
        notes["worst_diff"] = f"{worst:.2e}"


def _bracket_independently(roof, alpha, x, n, tau):
    """Check f^(n)(x) <= tau < f^(n+1)(x) from exact positions and fsum."""
    def F(k):
        if k == 0:
            return 0.0
        ks = range(k) if k > 0 else range(k, 0)
        xs = np.array([((x.num + i * alpha.num) % MOD) / MOD for i in ks])
        s = math.fsum(roof(xs))
        return s if k > 0 else -s
    lo, hi = F(n), F(n + 1)
    tol = 1e-9
    return lo - tol <= tau < hi + tol


def test_flow_group_law_and_inversion(capsys):
    flow = make_flow(make_roof(DEMO, 1.0, 0.7), expand("golden", 0))
    rng = random.Random(77)

    def canon(pt):
        # (x, f(x)) is glued to (x + alpha, 0)
        if roof_eval(flow.roof, pt.x).value - pt.s < 1e-9:
            return FlowPoint(pt.x.rotate(flow.alpha, 1), 0.0)
        return pt

    def same(a, b):
        return flow_metric(canon(a), canon(b)).value <= 1e-10

    with criterion(4, "flow group law and inversion", capsys, limit=30.0) as notes:
        brackets = 0
        for _ in range(1000):
            x = CirclePoint(rng.getrandbits(P), P)
            p = flow.point(x, rng.random() * roof_eval(flow.roof, x).lower)
            t, u = rng.uniform(-1e3, 1e3), rng.uniform(-1e3, 1e3)
            a, n1 = flow_eval(flow, p, t)
            b, n2 = flow_eval(flow, a, u)
            c, n3 = flow_eval(flow, p, t + u)
            back, n4 = flow_eval(flow, a, -t)
            assert same(b, c) and same(back, p)
            for start, dt, k in ((p, t, n1), (a, u, n2), (p, t + u, n3)):
                assert _bracket_independently(flow.roof, flow.alpha, start.x, k, start.s + dt)
                brackets += 1
        notes["brackets"] = brackets


def _rescan(rec, cf, scale):
    """Independent integer scan of one classification record."""
    x, y = int(rec["x"]["num_hex"], 16), int(rec["y"]["num_hex"], 16)
    a = cf.alpha.num
    start, length = (x, (y - x) % MOD) if (y - x) % MOD <= MOD // 2 else (y, (x - y) % MOD)

    def hit(k):
        return (-(start + k * a)) % MOD <= length

    n = scale["n"]
    q_n, reach = cf.qn(n), cf.qn(n + 1) // 6
    first = next((k for k in range(q_n) if hit(k)), None)
    if scale["case"] == "a":
        return first == scale["hit_k"]
    if first is not None:
        return False
    holds = []
    if not any(hit(k) for k in range(reach + 1)):
        holds.append("b")
    if not any(hit(-k) for k in range(reach + 1)):
        holds.append("c")
    return holds == scale["holds"]


def test_trichotomy(configs_dir, capsys):
    with criterion(5, "three-case orbit classification", capsys, limit=60.0) as notes:
        total = {}
        for name in ("golden_demo", "sqrt2m1", "cf123"):
            spec = load_config(configs_dir / f"{name}.yaml")
            report, code = run_trichotomy(spec, pairs=500, seed=0, depth=12)
            s = report["summary"]
            assert s["trichotomy_failures"] == 0 and s["undecidable"] == 0 and code == 0
            cf = spec.build_flow().cf
            cf.ensure(14)
            for rec in report["records"]:
                for sc in rec["scales"]:
                    assert _rescan(rec, cf, sc), (name, rec["index"], sc)
            total[name] = s["classified"]
        notes.update(total)


def test_divergence_certification(configs_dir, capsys):
    spec = load_config(configs_dir / "golden_demo.yaml")
    with criterion(6, "divergence windows on 500 pairs", capsys, limit=300.0) as notes:
        report, code = run_certify(spec, pairs=500, seed=0, beta=1.0)
        recs = report["records"]
        assert len(recs) == 500
        assert code == 0 and all(r["verdict"] == PASS for r in recs)
        for r in recs:
            assert all(r["margins"][k] > 0 for k in ("i", "ii", "iii")), r["index"]
            assert r["extras"]["U_size_check"] == PASS
            if r["case"] == "A":
                assert r["extras"]["D_n_bound_check"] == PASS
                assert r["extras"]["D_n_on_U_check"] == PASS
        notes["cases"] = report["summary"]["cases"]
        notes["min_margins"] = {k: f"{v:.3g}" for k, v in report["summary"]["min_margins"].items()}


def _profile_pairs(configs_dir):
    doc = yaml.safe_load((configs_dir / "profile_pairs.yaml").read_text())
    cf = expand("golden", 0)
    for e in doc["pairs"]:
        r = doc["roofs"][e["roof"]]
        yield e, r, make_flow(make_roof(r["g"], r["A"], r["c"]), cf)


def test_profile_exactness(configs_dir, capsys):
    alpha = mp_alpha("golden")
    with criterion(7, "profiles against the sampling oracle", capsys, limit=60.0) as notes:
        worst_far = worst_ham = worst_val = 0.0
        bound_checked = 0
        for e, r, flow in _profile_pairs(configs_dir):
            p, q = flow.point(*e["p"]), flow.point(*e["q"])
            H, delta = e["horizon"], e["delta"]
            part = GridPartition(e["partition"]["m"], e["partition"]["eta"])
            prof = closeness_profile(flow, p, q, H, delta)
            hd = hamming_distance(flow, part, p, q, H)
            assert prof.lam_close + prof.lam_far == Fraction(H)

            op = FloatOrbit(r["g"], r["A"], r["c"], alpha, p.x.value, p.s, H)
            oq = FloatOrbit(r["g"], r["A"], r["c"], alpha, q.x.value, q.s, H)
            ts = np.arange(0.0, H, 1e-4)
            ref = sampled_distance(op, oq, ts)
            brk = np.array([float(b) for b in prof.breaks])
            idx = np.searchsorted(brk, ts, side="right") - 1
            near = np.abs(ts - brk[idx]) < 1e-6
            nxt = np.minimum(idx + 1, len(brk) - 1)
            near |= np.abs(brk[nxt] - ts) < 1e-6
            vals = np.asarray(prof.values)[np.minimum(idx, len(prof) - 1)]
            worst_val = max(worst_val, float(np.max(np.abs(vals - ref)[~near])))
            worst_far = max(worst_far, abs(float(np.mean(ref >= delta)) - float(prof.lam_far) / H))
            worst_ham = max(worst_ham, abs(hd - sampled_hamming(op, oq, ts, part.m, part.eta)))
            if part.diameter < delta:
                assert hd >= float(prof.lam_far) / H
                bound_checked += 1
        assert worst_val <= 1e-3 and worst_far <= 1e-3 and worst_ham <= 1e-3
        assert bound_checked >= 5
        notes.update(worst_value=f"{worst_val:.1e}", worst_far=f"{worst_far:.1e}",
                     worst_hamming=f"{worst_ham:.1e}", hamming_bound_pairs=bound_checked)


def test_density_of_far_times(capsys):
    flow = make_flow(make_roof(DEMO, 1.0, 0.7), expand("golden", 0))
    d0 = delta0_estimate(flow, 1.0).value
    th = delta_threshold(flow, flow.cf, 1.0, d0)
    delta = 0.99 * th.value
    rng = random.Random(8)
    with criterion(8, "far-time density on I_t for 20 pairs", capsys, limit=60.0) as notes:
        margins = []
        for _ in range(20):
            s = close_at_time_pair(flow, 1.0, delta, rng, d0)
            assert delta < th.value
            assert s.H / 4 <= s.t <= 3 * s.H / 4
            assert s.windows.size_J <= s.H / (5 * flow.roof.M)
            prof = closeness_profile(flow, s.p, s.q, s.H, delta)
            assert prof.is_close_at(s.t)
            g = check_gamma_density(flow, s.p, s.q, s.t, s.H, delta, 1.0, profile=prof, delta0=d0)
            assert g.passed and g.margin > 0
            margins.append(g.margin)
        notes["min_margin"] = f"{min(margins):.3g}"


def test_averaged_derivative_decay(configs_dir, capsys):
    spec = load_config(configs_dir / "golden_demo.yaml")
    with criterion(9, "averaged derivative decay (soft)", capsys, limit=30.0) as notes:
        report, _, _ = run_c1decay(spec)
        s = report["summary"]
        ests = [r["estimate"] for r in report["rows"]]
        notes["final_ratio"] = f"{report['rows'][-1]['ratio']:.3g}"
        if not (s["weakly_decreasing_after_max"] and s["final_below_10pct"]):
            # soft criterion: report and ask for investigation, do not fail the suite
            warnings.warn(f"decay criterion not met: {ests}")
            notes["soft_violation"] = True
        assert len(ests) == 10


def test_certify_determinism(configs_dir, capsys):
    spec = load_config(configs_dir / "golden_demo.yaml")
    with criterion(10, "byte-identical certify reports", capsys) as notes:
        texts = []
        for workers in (1, 1, 2, 3):
            report, _ = run_certify(spec, pairs=60, seed=5, workers=workers)
            texts.append(dumps_report(deterministic_view(report)))
        assert len(set(texts)) == 1
        notes["runs"] = "workers 1, 1, 2, 3"
