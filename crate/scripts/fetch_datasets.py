#!/usr/bin/env python3
"""Fetch the four datasets into data/ as headered CSV files.

Wine and Digits come from scikit-learn's bundled copies of the UCI data.
Parkinson's and the Framingham heart study are downloaded from their public
sources; pass --parkinsons/--framingham to use local copies instead.
"""

import argparse
import csv
import shutil
import sys
import urllib.request
from pathlib import Path

PARKINSONS_URL = (
    "https://archive.ics.uci.edu/ml/machine-learning-databases/parkinsons/parkinsons.data"
)
FRAMINGHAM_URL = (
    "https://raw.githubusercontent.com/GauravPadawe/Framingham-Heart-Study/master/framingham.csv"
)


def write_sklearn(loader, path, label):
    bunch = loader()
    names = [str(n).replace(" ", "_") for n in bunch.feature_names]
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(names + [label])
        for row, y in zip(bunch.data, bunch.target):
            w.writerow([repr(float(v)) for v in row] + [int(y)])
    print(f"wrote {path} ({len(bunch.target)} rows)")


def fetch(url, local, path):
    if local:
        shutil.copy(local, path)
        print(f"copied {local} -> {path}")
        return True
    try:
        with urllib.request.urlopen(url, timeout=30) as r:
            path.write_bytes(r.read())
        print(f"downloaded {url} -> {path}")
        return True
    except Exception as e:
        print(f"could not fetch {url}: {e}", file=sys.stderr)
        return False


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=Path(__file__).resolve().parent.parent / "data", type=Path)
    ap.add_argument("--parkinsons", help="local copy of parkinsons.data")
    ap.add_argument("--framingham", help="local copy of framingham.csv")
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    from sklearn.datasets import load_digits, load_wine

    write_sklearn(load_wine, args.out / "wine.csv", "class")
    write_sklearn(load_digits, args.out / "digits.csv", "target")
    ok = fetch(PARKINSONS_URL, args.parkinsons, args.out / "parkinsons.csv")
    ok &= fetch(FRAMINGHAM_URL, args.framingham, args.out / "framingham.csv")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
