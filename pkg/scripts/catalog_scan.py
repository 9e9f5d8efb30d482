"""Classify every catalog entry against its stored labels.

Writes a CSV table (entry, class, label, verdict, chosen_L, n_witnesses).
Labels that are not a scan class (bounded, Stepanov_p_AP, ...) are skipped.
"""
import argparse
import csv
from pathlib import Path

import numpy as np

from qaap import catalog as cat
from qaap.classify import ScanConfig, classify, test_sap_omega

SCANNED = {"AP", "QAAP", "SP_QAAP"}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--epsilon", type=float, default=0.1)
    ap.add_argument("--step", type=float, default=0.01)
    ap.add_argument("--out", default="results/catalog_scan.csv")
    args = ap.parse_args()

    rows = []
    for name, e in sorted(cat.CATALOG.items()):
        if name == "c0_sequence":
            continue
        f = e.render(*e.window, args.step)
        for label, want in sorted(e.labels.items()):
            if label in SCANNED:
                rep = classify(f, ScanConfig.default(f, args.epsilon), label)
            elif label.startswith("SAP_"):
                omega = float(label.split("_")[1])
                rep = test_sap_omega(f, omega, args.epsilon, np.geomspace(1, 0.75 * e.window[1], 20))
            else:
                continue
            rows.append([name, label, want, rep.verdict, rep.chosen_L, len(rep.witnesses)])
            agree = (rep.verdict == "supported") == bool(want) or rep.verdict == "inconclusive"
            print(f"{name:22s} {label:10s} label={want!s:5s} verdict={rep.verdict:12s}"
                  f"{'' if agree else '  <-- disagrees'}")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["entry", "class", "label", "verdict", "chosen_L", "n_witnesses"])
        w.writerows(rows)
    print(f"table -> {out}")


if __name__ == "__main__":
    main()
