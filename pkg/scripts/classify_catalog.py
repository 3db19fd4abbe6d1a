"""Isochrony verdict and stability classification for every built-in model.

    python3 scripts/classify_catalog.py [--out results/catalog]
"""
import argparse
import csv
from pathlib import Path

from isocenter import builtin_catalog
from isocenter.hill import classify_equilibrium
from isocenter.isochrony import isochrony_report


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("results/catalog"))
    ap.add_argument("--rungs", type=int, default=8)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    rows = []
    for m in builtin_catalog():
        rep = isochrony_report(m)
        v = classify_equilibrium(m, n_amplitudes=args.rungs)
        rates = [r.growth_rate for r in v.ladder]
        rows.append((m.name, rep.verdict, rep.nc4_residual, rep.nc6_residual, v.classification, len(v.witness_amplitudes), max(map(abs, rates))))
        print(f"{m.name:14s} {rep.verdict:16s} nc4={rep.nc4_residual:+.3e} {v.classification:18s} witnesses={len(v.witness_amplitudes)}")

    with open(args.out / "classification.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["model", "isochrony", "nc4", "nc6", "classification", "witnesses", "max_abs_growth_rate"])
        w.writerows(rows)


if __name__ == "__main__":
    main()
