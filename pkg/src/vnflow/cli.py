"""Command line drivers.

Subcommands: ``certify``, ``trichotomy``, ``profile``, ``c1decay``.
Exit codes: 0 pass, 2 certified failure, 3 undecidable at the working
precision, 4 configuration or contract violation.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import random
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from fractions import Fraction

import numpy as np

from .circle import CirclePoint, check_precision, shortest_arc, to_fraction
from .config import FlowSpec, load_config
from .divergence import (
    FAIL,
    PASS,
    UNDECIDABLE,
    build_windows,
    check_beta,
    classify_pair,
    delta0_estimate,
    sample_pair,
    verify_prop,
)
from .errors import (
    ConfigError,
    DistancePreconditionViolated,
    InsufficientPrecision,
    NonIrrational,
    NonPositiveIntegral,
    NonPositiveRoof,
    PairTooFar,
    PrecisionExhausted,
    RescaleRequired,
    StepBudgetExceeded,
    TrichotomyFailure,
    VNFlowError,
    WindowOutOfHorizon,
)
from .profile import GridPartition, check_gamma_density, closeness_profile, hamming_distance
from .roof import c1_decay_estimate

EXIT_PASS, EXIT_FAIL, EXIT_UNDECIDABLE, EXIT_CONTRACT = 0, 2, 3, 4
CONTRACT_ERRORS = (ConfigError, RescaleRequired, NonIrrational, InsufficientPrecision,
                   NonPositiveRoof, NonPositiveIntegral, PairTooFar, DistancePreconditionViolated,
                   WindowOutOfHorizon, StepBudgetExceeded, ValueError)


def _jsonable(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Fraction):
        return str(o)
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def dumps_report(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, default=_jsonable) + "\n"


def deterministic_view(report: dict) -> dict:
    """The report without its timing block (the part covered by the determinism contract)."""
    return {k: v for k, v in report.items() if k != "timing"}


def _point_record(p: CirclePoint) -> dict:
    return {"value": p.value, "num_hex": hex(p.num), "err_ulps": p.err_ulps}


def _code(verdicts) -> int:
    verdicts = list(verdicts)
    if FAIL in verdicts:
        return EXIT_FAIL
    if UNDECIDABLE in verdicts:
        return EXIT_UNDECIDABLE
    return EXIT_PASS


def _base_report(experiment: str, spec: FlowSpec, flow) -> dict:
    return {
        "experiment": experiment,
        "config": spec.echo(),
        "alpha": {"label": flow.cf.label, "value": flow.alpha.value},
        "roof": {"L": flow.roof.L, "M": flow.roof.M, "normalized": flow.roof.normalized},
        "precision": flow.prec,
    }


# ---------------------------------------------------------------------------
# certify

_WORKER_FLOW = None


def _init_worker(spec: FlowSpec):
    global _WORKER_FLOW
    _WORKER_FLOW = spec.build_flow()


def _certify_one(job) -> dict:
    index, x_num, y_num, beta, delta0 = job
    flow = _WORKER_FLOW
    P = flow.prec
    x, y = CirclePoint(x_num, P), CirclePoint(y_num, P)
    rec = {"index": index, "x": _point_record(x), "y": _point_record(y),
           "dist": shortest_arc(x, y).dist.value, "precision_used": P}
    try:
        w = build_windows(flow, x, y, beta, delta0)
        cert = verify_prop(flow, x, y, beta, w)
    except PrecisionExhausted as e:
        rec.update(verdict=UNDECIDABLE, error=f"{type(e).__name__}: {e}", worst_error=None)
        return rec
    except (RescaleRequired, ValueError):
        raise
    except VNFlowError as e:
        rec.update(verdict=FAIL, error=f"{type(e).__name__}: {e}", worst_error=None)
        return rec
    out = cert.to_record()
    rec.update(case=w.case, n=w.n, J=list(w.J), U=list(w.U), margins=out["margins"],
               verdicts=out["verdicts"], verdict=out["verdict"], extras=out["extras"],
               witnesses=out["witnesses"], worst_error=out["worst_error"],
               prediction=list(w.classification.predicted) if w.classification else [])
    return rec


def _pairs_from_spec(spec: FlowSpec, flow, count: int, seed: int, beta, delta0: float,
                     explicit) -> list[tuple[int, int]]:
    P = flow.prec
    if explicit:
        out = []
        for i, pair in enumerate(explicit):
            if not isinstance(pair, list) or len(pair) != 2:
                raise ConfigError(f"certify.explicit[{i}]: expected [x, y]")
            x = CirclePoint.from_real(to_fraction(pair[0]), P)
            y = CirclePoint.from_real(to_fraction(pair[1]), P)
            out.append((x.num, y.num))
        return out
    out = []
    for i in range(count):
        rng = random.Random(f"certify:{seed}:{i}")
        x, y = sample_pair(flow, beta, delta0, rng, spec.certify.case_a_fraction)
        out.append((x.num, y.num))
    return out


def run_certify(spec: FlowSpec, pairs: int | None = None, seed: int | None = None,
                beta: float | None = None, workers: int | None = None) -> tuple[dict, int]:
    t0 = time.perf_counter()
    cfg = spec.certify
    count = cfg.pairs if pairs is None else pairs
    seed = cfg.seed if seed is None else seed
    beta = cfg.beta if beta is None else beta
    workers = cfg.workers if workers is None else workers
    if count < 0:
        raise ConfigError("certify.pairs: must be non-negative")
    check_beta(beta)
    flow = spec.build_flow()
    if flow.roof.A != 1:
        raise RescaleRequired(f"roof.A = {flow.roof.A}; the certificate needs slope A = 1 "
                              f"(rescale time by 1/A)")
    d0 = delta0_estimate(flow, beta)
    jobs = [(i, xn, yn, beta, d0.value) for i, (xn, yn) in
            enumerate(_pairs_from_spec(spec, flow, count, seed, beta, d0.value, cfg.explicit))]
    if workers and workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                                 initargs=(spec,)) as ex:
            records = list(ex.map(_certify_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        _init_worker(spec)
        records = [_certify_one(j) for j in jobs]
    records.sort(key=lambda r: r["index"])
    verdicts = [r["verdict"] for r in records]
    cases: dict = {}
    for r in records:
        cases[r.get("case", "?")] = cases.get(r.get("case", "?"), 0) + 1
    mins = {}
    for key in ("i", "ii", "iii"):
        vals = [r["margins"][key] for r in records if "margins" in r and r["margins"][key] is not None]
        mins[key] = min(vals) if vals else None
    errs = [r["worst_error"] for r in records if r.get("worst_error") is not None]
    report = _base_report("certify", spec, flow)
    report.update(
        seed=seed, beta=beta, pairs=len(records),
        delta0=d0.to_record(), records=records,
        summary={
            "verdict": {0: PASS, 2: FAIL, 3: UNDECIDABLE}[_code(verdicts)],
            "pass": verdicts.count(PASS), "fail": verdicts.count(FAIL),
            "undecidable": verdicts.count(UNDECIDABLE), "cases": cases, "min_margins": mins,
        },
        precision_exhaustion_count=verdicts.count(UNDECIDABLE),
        worst_error=max(errs) if errs else 0.0,
        timing={"wall_clock_s": time.perf_counter() - t0,
                "timestamp": datetime.now(timezone.utc).isoformat()},
    )
    return report, _code(verdicts)


def certify_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "x", "y", "case", "n", "J_lo", "J_hi", "U_lo", "U_hi",
                "margin_i", "margin_ii", "margin_iii", "verdict"])
    for r in report["records"]:
        m = r.get("margins", {})
        J, U = r.get("J", [None, None]), r.get("U", [None, None])
        w.writerow([r["index"], repr(r["x"]["value"]), repr(r["y"]["value"]), r.get("case", ""),
                    r.get("n", ""), J[0], J[1], U[0], U[1], m.get("i"), m.get("ii"), m.get("iii"),
                    r["verdict"]])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# trichotomy


def _trichotomy_pairs(flow, count: int, seed: int, depth: int, explicit):
    P = flow.prec
    if explicit:
        for i, pair in enumerate(explicit):
            if not isinstance(pair, list) or len(pair) != 2:
                raise ConfigError(f"trichotomy.explicit[{i}]: expected [x, y]")
            yield (CirclePoint.from_real(to_fraction(pair[0]), P),
                   CirclePoint.from_real(to_fraction(pair[1]), P))
        return
    lo = math.log10(1 / (6 * flow.cf.qn(depth))) - 3
    hi = math.log10(1 / 12)
    for i in range(count):
        rng = random.Random(f"trichotomy:{seed}:{i}")
        x = rng.getrandbits(P)
        d = 10 ** rng.uniform(lo, hi)
        d_ulps = max(1, int(Fraction(d) * (1 << P)))
        yield CirclePoint(x, P), CirclePoint((x + d_ulps) % (1 << P), P)


def classify_scales(flow, x: CirclePoint, y: CirclePoint, depth: int) -> list[dict]:
    """Classify the pair at every ``n <= depth`` with ``||x - y|| < 1/(6 q_n)``."""
    d = shortest_arc(x, y).dist
    out = []
    for n in range(depth + 1):
        if not d.upper < Fraction(1, 6 * flow.cf.qn(n)):
            continue
        try:
            c = classify_pair(flow.cf, x, y, n)
            out.append({"n": n, "case": c.case, "hit_k": c.hit_k, "holds": list(c.holds),
                        "predicted": list(c.predicted),
                        "prediction_consistent": c.prediction_consistent})
        except TrichotomyFailure as e:
            out.append({"n": n, "case": None, "failure": str(e)})
        except PrecisionExhausted as e:
            out.append({"n": n, "case": None, "undecidable": str(e)})
    return out


def run_trichotomy(spec: FlowSpec, pairs: int | None = None, seed: int | None = None,
                   depth: int | None = None) -> tuple[dict, int]:
    t0 = time.perf_counter()
    cfg = spec.trichotomy
    count = cfg.pairs if pairs is None else pairs
    seed = cfg.seed if seed is None else seed
    depth = cfg.depth if depth is None else depth
    if depth < 0 or count < 0:
        raise ConfigError("trichotomy: depth and pairs must be non-negative")
    flow = spec.build_flow()
    flow.cf.ensure(depth + 1)
    records = []
    n_fail = n_undec = n_checked = n_incons = 0
    cases = {"a": 0, "b": 0, "c": 0}
    for i, (x, y) in enumerate(_trichotomy_pairs(flow, count, seed, depth, cfg.explicit)):
        scales = classify_scales(flow, x, y, depth)
        for s in scales:
            n_checked += 1
            if "failure" in s:
                n_fail += 1
            elif "undecidable" in s:
                n_undec += 1
            else:
                cases[s["case"]] += 1
                n_incons += not s["prediction_consistent"]
        records.append({"index": i, "x": _point_record(x), "y": _point_record(y),
                        "dist": shortest_arc(x, y).dist.value, "scales": scales})
    code = EXIT_FAIL if n_fail else (EXIT_UNDECIDABLE if n_undec else EXIT_PASS)
    report = _base_report("trichotomy", spec, flow)
    report.update(
        seed=seed, depth=depth, pairs=len(records), records=records,
        summary={"classified": n_checked, "trichotomy_failures": n_fail, "undecidable": n_undec,
                 "cases": cases, "prediction_inconsistencies": n_incons,
                 "verdict": {0: PASS, 2: FAIL, 3: UNDECIDABLE}[code]},
        precision_exhaustion_count=n_undec,
        worst_error=0.0,
        timing={"wall_clock_s": time.perf_counter() - t0,
                "timestamp": datetime.now(timezone.utc).isoformat()},
    )
    return report, code


def trichotomy_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "x", "y", "n", "case", "hit_k", "holds", "predicted", "consistent"])
    for r in report["records"]:
        for s in r["scales"]:
            w.writerow([r["index"], repr(r["x"]["value"]), repr(r["y"]["value"]), s["n"],
                        s.get("case") or ("failure" if "failure" in s else "undecidable"),
                        "" if s.get("hit_k") is None else s["hit_k"], "".join(s.get("holds", [])),
                        "".join(s.get("predicted", [])), int(s.get("prediction_consistent", False))])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# profile


def _flow_point(flow, raw, field_name):
    if not isinstance(raw, list) or len(raw) != 2:
        raise ConfigError(f"profile.{field_name}: expected [x, s]")
    x = CirclePoint.from_real(to_fraction(raw[0]), flow.prec)
    try:
        return flow.point(x, float(to_fraction(raw[1])))
    except ValueError as e:
        raise ConfigError(f"profile.{field_name}: {e}") from e


def run_profile(spec: FlowSpec, horizon: float | None = None, delta: float | None = None,
                partition: tuple[int, float] | None = None, check_gamma: float | None = None,
                beta: float | None = None) -> tuple[dict, str, int]:
    t0 = time.perf_counter()
    cfg = spec.profile
    flow = spec.build_flow()
    H = cfg.horizon if horizon is None else horizon
    delta = cfg.delta if delta is None else delta
    if H <= 0 or delta <= 0:
        raise ConfigError("profile: horizon and delta must be positive")
    p = _flow_point(flow, cfg.p, "p")
    q = _flow_point(flow, cfg.q, "q")
    prof = closeness_profile(flow, p, q, H, delta)
    report = _base_report("profile", spec, flow)
    summary = {"segments": len(prof), "lambda_close": float(prof.lam_close),
               "lambda_far": float(prof.lam_far), "horizon": H, "delta": delta,
               "partition_sum_exact": prof.lam_close + prof.lam_far == prof.horizon,
               "ambiguous_segments": prof.ambiguous}
    part = partition
    if part is None and cfg.partition:
        try:
            part = (int(cfg.partition["m"]), float(cfg.partition["eta"]))
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError("profile.partition: expected {m: int, eta: float}") from e
    if part is not None:
        gp = GridPartition(*part)
        hd = hamming_distance(flow, gp, p, q, H)
        summary["hamming"] = {"m": gp.m, "eta": gp.eta, "diameter": gp.diameter, "value": hd,
                              "lower_bound_far_fraction": float(prof.lam_far) / H,
                              "bound_applies": gp.diameter < delta}
    gt = check_gamma
    gbeta = beta
    if gt is None and cfg.check_gamma:
        gt = cfg.check_gamma.get("t")
        gbeta = cfg.check_gamma.get("beta", gbeta)
    if gt is not None:
        gbeta = 1.0 if gbeta is None else gbeta
        d0 = delta0_estimate(flow, gbeta).value
        g = check_gamma_density(flow, p, q, float(gt), H, delta, gbeta, profile=prof, delta0=d0)
        summary["gamma_check"] = dict(g.to_record(), t=float(gt), beta=gbeta)
    code = EXIT_PASS
    if "gamma_check" in summary and not summary["gamma_check"]["passed"]:
        code = EXIT_FAIL
    report.update(
        p={"x": _point_record(p.x), "s": p.s}, q={"x": _point_record(q.x), "s": q.s},
        summary=summary,
        segments=[[float(a), float(b), v, bool(f)] for a, b, v, f in prof.segments()],
        precision_exhaustion_count=0,
        worst_error=max(prof.errs, default=0.0),
        timing={"wall_clock_s": time.perf_counter() - t0,
                "timestamp": datetime.now(timezone.utc).isoformat()},
    )
    return report, prof.to_csv(), code


# ---------------------------------------------------------------------------
# c1decay


def run_c1decay(spec: FlowSpec, n_list: list[int] | None = None,
                grid: int | None = None) -> tuple[dict, str, int]:
    t0 = time.perf_counter()
    cfg = spec.c1decay
    grid = cfg.grid if grid is None else grid
    if grid < 2:
        raise ConfigError(f"c1decay.grid: grid_size must be >= 2, got {grid}")
    flow = spec.build_flow()
    rows = []
    if n_list is None and cfg.n:
        n_list = [int(v) for v in cfg.n]
    if n_list is None:
        lo, hi = cfg.q_range
        labels = [f"q{k}" for k in range(lo, hi + 1)]
        n_list = [flow.cf.qn(k) for k in range(lo, hi + 1)]
    else:
        labels = [""] * len(n_list)
    sup = flow.roof.g.sup_deriv
    for lab, n in zip(labels, n_list):
        if n <= 0:
            raise ConfigError(f"c1decay.n: entries must be positive, got {n}")
        est = c1_decay_estimate(flow.roof, flow.cf, n, grid)
        rows.append({"label": lab, "n": n, "estimate": est, "sup_g_prime": sup,
                     "ratio": est / sup if sup else 0.0})
    ests = [r["estimate"] for r in rows]
    peak = int(np.argmax(ests)) if ests else 0
    tail_ok = all(ests[i + 1] <= ests[i] for i in range(peak, len(ests) - 1))
    final_ok = (not ests) or sup == 0 or ests[-1] < 0.1 * sup
    report = _base_report("c1decay", spec, flow)
    report.update(grid=grid, rows=rows,
                  summary={"weakly_decreasing_after_max": tail_ok, "final_below_10pct": final_ok},
                  precision_exhaustion_count=0, worst_error=0.0,
                  timing={"wall_clock_s": time.perf_counter() - t0,
                          "timestamp": datetime.now(timezone.utc).isoformat()})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["label", "n", "estimate", "sup_g_prime", "ratio"])
    for r in rows:
        w.writerow([r["label"], r["n"], repr(r["estimate"]), repr(r["sup_g_prime"]), repr(r["ratio"])])
    return report, buf.getvalue(), EXIT_PASS


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vnflow", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="YAML config file")
        p.add_argument("--precision", type=int, help="working precision in bits")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--format", choices=["json", "csv"])
        p.add_argument("--seed", type=int)
        p.add_argument("--beta", type=float)
        p.add_argument("--pairs", type=int)
        p.add_argument("--depth", type=int)

    p = sub.add_parser("certify", help="certify the divergence windows on sampled pairs")
    common(p)
    p.add_argument("--workers", type=int, help="worker processes")
    p = sub.add_parser("trichotomy", help="audit the three-case orbit classification")
    common(p)
    p = sub.add_parser("profile", help="closeness profile, Hamming distance, density check")
    common(p)
    p.add_argument("--horizon", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--partition", help="grid partition as M,ETA")
    p.add_argument("--check-gamma", type=float, metavar="T", help="run the density check at time T")
    p = sub.add_parser("c1decay", help="decay of the averaged derivative cocycle")
    common(p)
    p.add_argument("--n", help="comma-separated list of n (default: q_k over the configured range)")
    p.add_argument("--grid", type=int, help="grid size (>= 2)")
    return ap


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = load_config(args.config)
        if args.precision is not None:
            spec.precision = args.precision
        spec = _revalidated(spec)
        fmt = args.format
        if args.command == "certify":
            report, code = run_certify(spec, args.pairs, args.seed, args.beta, args.workers)
            _emit(certify_csv(report) if fmt == "csv" else dumps_report(report), args.out)
        elif args.command == "trichotomy":
            report, code = run_trichotomy(spec, args.pairs, args.seed, args.depth)
            _emit(trichotomy_csv(report) if fmt == "csv" else dumps_report(report), args.out)
        elif args.command == "profile":
            part = None
            if args.partition:
                try:
                    m, eta = args.partition.split(",")
                    part = (int(m), float(eta))
                except ValueError as e:
                    raise ConfigError("--partition: expected M,ETA") from e
            report, text, code = run_profile(spec, args.horizon, args.delta, part,
                                             args.check_gamma, args.beta)
            if fmt == "json":
                _emit(dumps_report(report), args.out)
            else:
                _emit(text, args.out)
                summary = json.dumps(report["summary"], sort_keys=True, default=_jsonable)
                if args.out:
                    with open(args.out + ".report.json", "w") as fh:
                        fh.write(dumps_report(report))
                print(summary, file=sys.stderr)
        else:
            n_list = None
            if args.n:
                try:
                    n_list = [int(v) for v in args.n.split(",")]
                except ValueError as e:
                    raise ConfigError("--n: expected comma-separated integers") from e
            report, text, code = run_c1decay(spec, n_list, args.grid)
            _emit(dumps_report(report) if fmt == "json" else text, args.out)
        return code
    except CONTRACT_ERRORS as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_CONTRACT
    except PrecisionExhausted as e:
        print(f"undecidable: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_UNDECIDABLE
    except VNFlowError as e:
        print(f"failure: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_FAIL


def _revalidated(spec: FlowSpec) -> FlowSpec:
    try:
        check_precision(spec.precision)
    except ValueError as e:
        raise ConfigError(f"--precision: {e}") from e
    return spec


if __name__ == "__main__":
    sys.exit(main())
