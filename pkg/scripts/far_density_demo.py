"""Build pairs that are delta-close at a time t and check that far times
still fill a fixed fraction of the window I_t around t.

    python scripts/far_density_demo.py --pairs 10
"""
import argparse
import random

from vnflow import (
    check_gamma_density,
    close_at_time_pair,
    closeness_profile,
    delta0_estimate,
    delta_threshold,
    expand,
    make_flow,
    make_roof,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pairs", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--beta", type=float, default=1.0)
    args = ap.parse_args()

    flow = make_flow(make_roof([(1, 0.0, 0.05)], 1.0, 0.7), expand("golden", 0))
    d0 = delta0_estimate(flow, args.beta).value
    th = delta_threshold(flow, flow.cf, args.beta, d0)
    delta = 0.99 * th.value
    print(f"delta0 = {d0:.4g}, threshold = {th.value:.4g}, delta = {delta:.4g}")
    print(f"{'case':>4} {'|J|':>5} {'t':>9} {'H':>9} {'lambda(I_t)':>12} {'far ratio':>10} {'gamma':>7}  ok")
    rng = random.Random(args.seed)
    failures = 0
    for _ in range(args.pairs):
        s = close_at_time_pair(flow, args.beta, delta, rng, d0)
        prof = closeness_profile(flow, s.p, s.q, s.H, delta)
        g = check_gamma_density(flow, s.p, s.q, s.t, s.H, delta, args.beta, profile=prof, delta0=d0)
        failures += not g.passed
        print(f"{s.windows.case:>4} {s.windows.size_J:>5} {s.t:>9.2f} {s.H:>9.2f} {g.lam_It:>12.3f} "
              f"{g.ratio:>10.3f} {g.gamma:>7.4f}  {g.passed}")
    return 2 if failures else 0


if __name__ == "__main__":
    raise SystemExit(main())
