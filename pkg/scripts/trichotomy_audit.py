"""Audit the three-case orbit classification over several rotation numbers.

    python scripts/trichotomy_audit.py --pairs 200 --depth 12
"""
import argparse
from pathlib import Path

from vnflow.cli import run_trichotomy
from vnflow.config import load_config

ROOT = Path(__file__).resolve().parent.parent
CONFIGS = ["golden_demo", "sqrt2m1", "cf123"]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pairs", type=int, default=200)
    ap.add_argument("--depth", type=int, default=12)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    worst = 0
    print(f"{'config':<12} {'scales':>7} {'a':>6} {'b':>6} {'c':>4} {'fail':>5} {'undec':>6} {'incons':>7}")
    for name in CONFIGS:
        report, code = run_trichotomy(load_config(ROOT / "configs" / f"{name}.yaml"),
                                      args.pairs, args.seed, args.depth)
        s = report["summary"]
        c = s["cases"]
        print(f"{name:<12} {s['classified']:>7} {c['a']:>6} {c['b']:>6} {c['c']:>4} "
              f"{s['trichotomy_failures']:>5} {s['undecidable']:>6} {s['prediction_inconsistencies']:>7}")
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    raise SystemExit(main())
