"""Deterministic synthetic thyroid-disease source file.

The original Garavan/UCI merge behind the 7142-record dataset is not
reconstructable (provenance is unrecorded and this environment has no
access to the archive), so the pipeline ships a synthetic stand-in with
the same class mix: 6385 Negative / 582 Hyperthyroid / 175 Hypothyroid
after missing-value rows are dropped.

Clinical shape, loosely after reference ranges: hyperthyroid pairs a
suppressed TSH with elevated T3/TT4/FTI; hypothyroid pairs an elevated TSH
with depressed TT4/FTI. A deliberate borderline band (subclinical
hypothyroid vs. high-normal TSH negatives) keeps the rare class genuinely
harder than the majority class.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .schema import FEATURE_NAMES

DEFAULT_DATA_SEED = 108
CLEAN_COUNTS = (6385, 582, 175)   # Negative, Hyperthyroid, Hypothyroid
DROPPED_COUNTS = (384, 35, 11)    # extra rows that carry missing markers

_CLASS_NAMES = ("negative", "hyperthyroid", "hypothyroid")

# P(flag == 1) per class, order: Negative, Hyperthyroid, Hypothyroid
_FLAG_RATES = {
    "on_thyroxine": (0.10, 0.03, 0.12),
    "on_antithyroid_meds": (0.01, 0.06, 0.005),
    "sick": (0.03, 0.04, 0.05),
    "pregnant": (0.04, 0.05, 0.02),       # applied only when sex == 1
    "thyroid_surgery": (0.01, 0.03, 0.04),
    "I131_treatment": (0.005, 0.04, 0.02),
    "query_hypothyroid": (0.05, 0.03, 0.25),
    "query_hyperthyroid": (0.04, 0.25, 0.03),
    "lithium": (0.004, 0.005, 0.02),
    "goitre": (0.005, 0.04, 0.01),
    "tumor": (0.02, 0.03, 0.02),
    "psych": (0.04, 0.03, 0.05),
}
_SEX_RATES = (0.66, 0.75, 0.70)
_HYPOPIT_RATES = (0.002, 0.002, 0.01)
_AGE_MEANS = (52.0, 45.0, 58.0)


def _clipped_normal(rng, mean, sd, lo, hi, n):
    return np.clip(rng.normal(mean, sd, size=n), lo, hi)


def _labs_negative(rng, n):
    tsh = np.exp(rng.normal(np.log(1.6), 0.55, size=n))
    # low-TSH-but-otherwise-normal tail and a high-normal band
    low = rng.random(n) < 0.05
    tsh[low] = rng.uniform(0.02, 0.4, size=low.sum())
    high = (~low) & (rng.random(n) < 0.02)
    tsh[high] = rng.uniform(4.5, 7.0, size=high.sum())
    return {
        "TSH": np.clip(tsh, 0.01, 7.0),
        "T3": _clipped_normal(rng, 2.0, 0.45, 0.4, 4.2, n),
        "TT4": _clipped_normal(rng, 105, 17, 55, 190, n),
        "T4U": _clipped_normal(rng, 0.98, 0.12, 0.55, 1.6, n),
        "FTI": _clipped_normal(rng, 107, 16, 55, 200, n),
    }


def _labs_hyperthyroid(rng, n):
    labs = {
        "TSH": np.clip(np.exp(rng.normal(np.log(0.06), 0.8, size=n)), 0.005, 0.45),
        "T3": _clipped_normal(rng, 4.8, 1.1, 2.6, 10.0, n),
        "TT4": _clipped_normal(rng, 165, 25, 110, 260, n),
        "T4U": _clipped_normal(rng, 1.05, 0.13, 0.6, 1.7, n),
        "FTI": _clipped_normal(rng, 160, 25, 105, 280, n),
    }
    mild = rng.random(n) < 0.08
    m = mild.sum()
    labs["T3"][mild] = _clipped_normal(rng, 3.2, 0.5, 2.2, 5.0, m)
    labs["TT4"][mild] = _clipped_normal(rng, 130, 15, 100, 180, m)
    labs["FTI"][mild] = _clipped_normal(rng, 125, 15, 95, 175, m)
    return labs


def _labs_hypothyroid(rng, n):
    labs = {
        "TSH": np.clip(np.exp(rng.normal(np.log(25.0), 0.8, size=n)), 6.5, 200.0),
        "T3": _clipped_normal(rng, 1.2, 0.4, 0.2, 2.4, n),
        "TT4": _clipped_normal(rng, 60, 15, 15, 95, n),
        "T4U": _clipped_normal(rng, 0.95, 0.12, 0.55, 1.5, n),
        "FTI": _clipped_normal(rng, 55, 14, 12, 90, n),
    }
    # subclinical band: mildly raised TSH, near-normal peripheral labs
    sub = rng.random(n) < 0.25
    m = sub.sum()
    labs["TSH"][sub] = rng.uniform(4.5, 9.0, size=m)
    labs["T3"][sub] = _clipped_normal(rng, 1.7, 0.4, 0.6, 3.0, m)
    labs["TT4"][sub] = _clipped_normal(rng, 92, 12, 60, 120, m)
    labs["FTI"][sub] = _clipped_normal(rng, 90, 12, 60, 120, m)
    return labs


_LAB_SAMPLERS = (_labs_negative, _labs_hyperthyroid, _labs_hypothyroid)
_LAB_DECIMALS = {"TSH": 3, "T3": 1, "TT4": 1, "T4U": 2, "FTI": 1}


def _sample_class_rows(rng, cls: int, n: int) -> list[list]:
    age = np.clip(np.round(rng.normal(_AGE_MEANS[cls], 19.0, size=n)), 1, 94)
    sex = (rng.random(n) < _SEX_RATES[cls]).astype(int)
    flags = {name: (rng.random(n) < rates[cls]).astype(int)
             for name, rates in _FLAG_RATES.items()}
    flags["pregnant"] &= sex  # no pregnancy for sex == 0
    hypopit = np.where(rng.random(n) < _HYPOPIT_RATES[cls], 1.0, 0.0)
    labs = _LAB_SAMPLERS[cls](rng, n)
    labs = {k: np.round(v, _LAB_DECIMALS[k]) for k, v in labs.items()}

    columns = {"age": age.astype(int), "sex": sex, "hypopituitary": hypopit, **flags, **labs}
    rows = []
    for i in range(n):
        row = []
        for name in FEATURE_NAMES:
            v = columns[name][i]
            if name == "hypopituitary":
                row.append(f"{float(v):.1f}")
            elif name in _LAB_DECIMALS:
                row.append(f"{float(v):.{_LAB_DECIMALS[name]}f}")
            else:
                row.append(str(int(v)))
        row.append(_CLASS_NAMES[cls])
        rows.append(row)
    return rows


def generate_source_csv(path: "str | Path", seed: int = DEFAULT_DATA_SEED) -> dict:
    """Write the synthetic source file; returns a small summary dict.

    Byte-deterministic for a given seed: same rows, same order, same text.
    """
    rng = np.random.default_rng(seed)
    rows: list[list] = []
    for cls, n in enumerate(CLEAN_COUNTS):
        rows.extend(_sample_class_rows(rng, cls, n))

    # rows that ingestion must drop: knock out 1-3 cells with missing markers
    for cls, n in enumerate(DROPPED_COUNTS):
        damaged = _sample_class_rows(rng, cls, n)
        for row in damaged:
            n_holes = int(rng.integers(1, 4))
            holes = rng.choice(len(FEATURE_NAMES), size=n_holes, replace=False)
            for h in holes:
                row[h] = "?" if rng.random() < 0.9 else ""
        rows.extend(damaged)

    order = rng.permutation(len(rows))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(FEATURE_NAMES) + ["diagnosis"])
        for i in order:
            writer.writerow(rows[i])
    return {"path": str(path), "rows_written": len(rows),
            "clean_counts": list(CLEAN_COUNTS), "dropped_rows": sum(DROPPED_COUNTS)}


def main(argv: list[str] | None = None) -> None:
    import argparse

    parser = argparse.ArgumentParser(description="Regenerate the synthetic thyroid source CSV")
    parser.add_argument("--out", default="data/thyroid.csv")
    parser.add_argument("--seed", type=int, default=DEFAULT_DATA_SEED)
    args = parser.parse_args(argv)
    summary = generate_source_csv(args.out, seed=args.seed)
    print(f"wrote {summary['rows_written']} rows to {summary['path']} "
          f"({summary['dropped_rows']} carry missing markers)")


if __name__ == "__main__":
    main()
