"""Run the acceptance battery and write a summary JSON.

    python3 scripts/run_acceptance.py [--only 1 4 9] [--out results/acceptance.json]
"""
import argparse
import sys
import time
from pathlib import Path

from qaap.checks import run_all
from qaap.report import report_render, write_json


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--only", type=int, nargs="+")
    ap.add_argument("--out", default="results/acceptance.json")
    args = ap.parse_args()

    results = []
    for cid in args.only or range(1, 11):
        t0 = time.perf_counter()
        r = run_all([cid])[0]
        print(f"{r.line()}  [{time.perf_counter() - t0:.1f}s]", flush=True)
        for c in r.failures():
            print(f"    {c.name}: value={c.value!r} tolerance={c.tolerance!r}")
        results.append(r)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_json(report_render(results, {"suite": "acceptance"}), out)
    print(f"summary -> {out}")
    sys.exit(0 if all(r.passed for r in results) else 2)


if __name__ == "__main__":
    main()
