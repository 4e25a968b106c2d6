"""Certify the divergence windows on sampled pairs and print a summary table.

    python scripts/certify_demo.py --config configs/golden_demo.yaml --pairs 100
"""
import argparse
import json
from pathlib import Path

from vnflow.cli import dumps_report, run_certify
from vnflow.config import load_config

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(ROOT / "configs" / "golden_demo.yaml"))
    ap.add_argument("--pairs", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", help="also write the full JSON report here")
    args = ap.parse_args()

    report, code = run_certify(load_config(args.config), args.pairs, args.seed, workers=args.workers)
    s = report["summary"]
    print(f"delta0 = {report['delta0']['value']:.4g} ({report['delta0']['branch']})")
    print(f"pairs {report['pairs']}: pass {s['pass']}, fail {s['fail']}, undecidable {s['undecidable']}")
    print("cases:", json.dumps(s["cases"], sort_keys=True))
    print("smallest margins:", {k: (None if v is None else f"{v:.3g}") for k, v in s["min_margins"].items()})
    print(f"{'idx':>4} {'case':>4} {'n':>3} {'|J|':>7} {'|U|':>7}  verdict")
    for r in report["records"][:15]:
        print(f"{r['index']:>4} {r.get('case', '?'):>4} {r.get('n', ''):>3} "
              f"{r['extras']['size_J']:>7} {r['extras']['size_U']:>7}  {r['verdict']}")
    if args.out:
        Path(args.out).write_text(dumps_report(report))
    return code


if __name__ == "__main__":
    raise SystemExit(main())
