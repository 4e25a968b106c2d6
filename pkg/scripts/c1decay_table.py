"""Print the averaged derivative decay at n = q_3 .. q_12 as a table.

    python scripts/c1decay_table.py --config configs/golden_demo.yaml
"""
import argparse
from pathlib import Path

from vnflow.cli import run_c1decay
from vnflow.config import load_config

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(ROOT / "configs" / "golden_demo.yaml"))
    ap.add_argument("--grid", type=int)
    args = ap.parse_args()

    report, _, code = run_c1decay(load_config(args.config), grid=args.grid)
    print(f"{'label':>6} {'n':>6} {'estimate':>12} {'/ sup|g_prime|':>15}")
    for r in report["rows"]:
        print(f"{r['label']:>6} {r['n']:>6} {r['estimate']:>12.4e} {r['ratio']:>15.4e}")
    s = report["summary"]
    print(f"weakly decreasing after the maximum: {s['weakly_decreasing_after_max']}")
    print(f"final value below 10% of sup|g'|:    {s['final_below_10pct']}")
    return code


if __name__ == "__main__":
    raise SystemExit(main())
