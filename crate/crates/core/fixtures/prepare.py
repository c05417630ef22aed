"""Recompute the pinned values in MANIFEST.toml from the fixture files.

Standalone: uses only the standard library, nothing from the Rust crate.
"""
import csv
import itertools
import statistics

NUM = ["age", "bili", "albumin", "alk.phos", "ast", "protime"]
CAT = ["sex", "edema", "stage", "ascites", "hepato", "spiders"]
LABS = ["chol", "copper", "trig", "platelet"]


def rows(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def sd(xs):
    return statistics.stdev(xs) if len(xs) > 1 else 0.0


def imbalance(data, arm1, alpha=1.0, w=1.0):
    """max over the single arm pair of d_num + alpha * d_cat."""
    n = len(data)
    a = [data[i] for i in range(n) if i not in arm1]
    b = [data[i] for i in arm1]
    total = 0.0
    for c in NUM:
        scale = sd([float(r[c]) for r in data])
        if scale == 0.0:
            continue
        xa = [float(r[c]) for r in a]
        xb = [float(r[c]) for r in b]
        total += (abs(statistics.fmean(xa) - statistics.fmean(xb)) + w * abs(sd(xa) - sd(xb))) / scale
    for c in CAT:
        labels = {r[c] for r in data}
        tv = 0.5 * sum(
            abs(sum(r[c] == l for r in a) / len(a) - sum(r[c] == l for r in b) / len(b)) for l in labels
        )
        total += alpha * tv
    return total


def main():
    full = rows("pbc.csv")
    complete = [r for r in full if all(r[c] not in ("", "NA") for c in NUM + CAT + LABS)]
    print(f"rows = {len(full)}")
    print(f"labs_complete_cases = {len(complete)}")
    small = rows("pbc10.csv")
    best = min(imbalance(small, set(s)) for s in itertools.combinations(range(10), 5))
    print(f"pbc10_exact_objective = {best!r}")


if __name__ == "__main__":
    main()
