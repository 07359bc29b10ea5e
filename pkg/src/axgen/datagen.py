"""Deterministic synthetic tabular datasets.

This environment has no network access, so the two benchmark tables are
generated locally with matching shape, class balance and rough difficulty:
a 683x10 two-class screening table (integer features 1..10, about 65/35
split) and a 1599x11 six-class quality table whose classes follow the
familiar heavily imbalanced 3..8 grade distribution. Both come from fixed
seeds, so every run writes byte-identical CSVs.
"""

from __future__ import annotations

import argparse
import csv
import os

import numpy as np

# class counts for the quality table, grades 3..8
_QUALITY_COUNTS = {3: 9, 4: 53, 5: 681, 6: 638, 7: 199, 8: 19}

_SCREEN_BENIGN = 444
_SCREEN_MALIGNANT = 239


def screening_table(seed: int = 20260819):
    """683 rows, 10 integer features in 1..10, labels benign/malignant."""
    rng = np.random.default_rng(np.random.SeedSequence((seed, 1)))
    # per-feature informativeness; low values dilute toward noise
    gain = np.array([1.0, 0.95, 0.9, 0.9, 0.85, 0.8, 0.8, 0.75, 0.7, 0.55])
    rows = []
    for label, n, mu, sd in (
        ("benign", _SCREEN_BENIGN, 0.15, 0.08),
        ("malignant", _SCREEN_MALIGNANT, 0.62, 0.15),
    ):
        sev = np.clip(rng.normal(mu, sd, size=n), 0.0, 1.0)
        noise = rng.normal(0.0, 0.12, size=(n, 10))
        vals = np.clip(sev[:, None] * gain[None, :] + noise, 0.0, 1.0)
        ints = np.floor(1 + 9 * vals + 0.5).astype(np.int64)
        ints = np.clip(ints, 1, 10)
        for r in ints:
            rows.append([*map(int, r), label])
    order = rng.permutation(len(rows))
    header = [f"f{i + 1:02d}" for i in range(10)] + ["class"]
    return header, [rows[i] for i in order]


def quality_table(seed: int = 20260819):
    """1599 rows, 11 float features, grades 3..8 with real-world imbalance.

    A single latent grade drives a couple of strongly informative columns,
    a few weak ones and outright noise, which keeps the best reachable
    accuracy modest and concentrates confusion between grades 5 and 6.
    """
    rng = np.random.default_rng(np.random.SeedSequence((seed, 2)))
    gain = np.array([0.95, -0.75, 0.45, -0.35, 0.25, 0.2, -0.15, 0.1, 0.05, 0.0, 0.0])
    sigma = np.array([0.16, 0.22, 0.30, 0.34, 0.38, 0.40, 0.42, 0.45, 0.5, 0.5, 0.5])
    base = np.array([0.4, 0.55, 0.5, 0.45, 0.5, 0.35, 0.6, 0.5, 0.4, 0.5, 0.55])
    rows = []
    for grade, n in _QUALITY_COUNTS.items():
        q = (grade - 3) / 5.0
        vals = base[None, :] + gain[None, :] * (q - 0.5) + rng.normal(
            0.0, 1.0, size=(n, 11)
        ) * sigma[None, :]
        vals = np.clip(vals, -0.5, 1.5)
        for r in vals:
            rows.append([*(round(float(v), 4) for v in r), str(grade)])
    order = rng.permutation(len(rows))
    header = [f"f{i + 1:02d}" for i in range(11)] + ["class"]
    return header, [rows[i] for i in order]


def blobs_table(
    n_per_class: int = 20, n_features: int = 4, n_classes: int = 3, seed: int = 7
):
    """Small well-separated gaussian blobs; handy for fast end-to-end runs."""
    rng = np.random.default_rng(np.random.SeedSequence((seed, 3)))
    centers = rng.uniform(0.15, 0.85, size=(n_classes, n_features))
    rows = []
    for c in range(n_classes):
        pts = rng.normal(centers[c], 0.06, size=(n_per_class, n_features))
        for r in np.clip(pts, 0.0, 1.0):
            rows.append([*(round(float(v), 4) for v in r), f"c{c}"])
    order = rng.permutation(len(rows))
    header = [f"f{i + 1}" for i in range(n_features)] + ["class"]
    return header, [rows[i] for i in order]


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


GENERATORS = {
    "breast_cancer": screening_table,
    "redwine": quality_table,
}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="axgen.datagen", description="write the bundled synthetic CSVs"
    )
    ap.add_argument("--out-dir", default="data")
    ap.add_argument(
        "--only", choices=sorted(GENERATORS), help="generate a single dataset"
    )
    args = ap.parse_args(argv)
    os.makedirs(args.out_dir, exist_ok=True)
    names = [args.only] if args.only else sorted(GENERATORS)
    for name in names:
        header, rows = GENERATORS[name]()
        out = os.path.join(args.out_dir, f"{name}.csv")
        write_csv(out, header, rows)
        print(f"wrote {out} ({len(rows)} rows)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
