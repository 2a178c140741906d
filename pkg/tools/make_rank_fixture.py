"""Builds the committed 100-anchor rank-metrics fixture.

Constructs a 100x100 cosine matrix whose first five categories (the
fruit_and_vegetables group) realize a prescribed within-group rank pattern:

            apple  mushroom  sweet_pepper  orange  pear
apple          0       7          1          27      2
mushroom       7       0          4          23     34
sweet_pepper   1      11          0          32     10
orange         4      10          3           0      2
pear           2      30          3           6      0

Group rank sum 219, top-5 ratio 14/25. The remaining 95 categories fill the
in-between rank slots. The matrix is kept strictly diagonally dominant (so it
is positive definite), factored with an eigendecomposition into 100 unit
vectors, and written to fixtures/ together with the supercategory map.

Run from the repository root:  python tools/make_rank_fixture.py
"""

import json
from pathlib import Path

import numpy as np

from abat.evaluation import rank_metrics
from abat.geometry import AnchorSet
from abat.io import save_anchor_file

GROUP = ["apple", "mushroom", "sweet_pepper", "orange", "pear"]

# Target within-group rank pattern (row category ranks column category).
TARGET_RANKS = np.array([
    [0, 7, 1, 27, 2],
    [7, 0, 4, 23, 34],
    [1, 11, 0, 32, 10],
    [4, 10, 3, 0, 2],
    [2, 30, 3, 6, 0],
])

# Symmetric in-group cosines (pre-scale) realizing each row's ordering.
IN_GROUP = {
    ("apple", "mushroom"): 0.72,
    ("apple", "sweet_pepper"): 0.90,
    ("apple", "orange"): 0.65,
    ("apple", "pear"): 0.85,
    ("mushroom", "sweet_pepper"): 0.78,
    ("mushroom", "orange"): 0.60,
    ("mushroom", "pear"): 0.55,
    ("sweet_pepper", "orange"): 0.70,
    ("sweet_pepper", "pear"): 0.80,
    ("orange", "pear"): 0.75,
}

# Out-group fillers per constrained row: (count, lo, hi) strictly inside the
# open interval, placing the in-group values at exactly the target ranks.
FILLERS = {
    "apple": [(4, 0.72, 0.85), (19, 0.65, 0.72)],
    "mushroom": [(3, 0.78, 0.95), (2, 0.72, 0.78), (15, 0.60, 0.72),
                 (10, 0.55, 0.60)],
    "sweet_pepper": [(8, 0.80, 0.90), (20, 0.70, 0.78)],
    "orange": [(1, 0.75, 0.95), (5, 0.60, 0.65)],
    "pear": [(1, 0.85, 0.95), (2, 0.75, 0.80), (23, 0.55, 0.75)],
}

SCALE = 0.03  # keeps every row diagonally dominant
N = 100


def build_cosine_matrix():
    cos = np.eye(N)
    idx = {name: i for i, name in enumerate(GROUP)}
    for (a, b), value in IN_GROUP.items():
        cos[idx[a], idx[b]] = cos[idx[b], idx[a]] = SCALE * value

    for row_name, spans in FILLERS.items():
        i = idx[row_name]
        col = 5  # out-group categories start here
        used = 0
        for count, lo, hi in spans:
            values = lo + (hi - lo) * (np.arange(count) + 1.0) / (count + 1.0)
            for v in values:
                cos[i, col] = cos[col, i] = SCALE * v
                col += 1
            used += count
        # everything else in this row sits strictly below the lowest
        # in-group value, keeping the remaining ranks out of the way
        rest = N - 5 - used
        floor_values = 0.01 + 0.09 * (np.arange(rest) + 1.0) / (rest + 1.0)
        for v in floor_values:
            cos[i, col] = cos[col, i] = SCALE * v
            col += 1
        assert col == N
    return cos


def factor_to_unit_rows(cos):
    # strict diagonal dominance guarantees positive definiteness
    row_mass = np.abs(cos).sum(axis=1) - 1.0
    assert np.all(row_mass < 1.0), f"not diagonally dominant: {row_mass.max():.3f}"
    eigvals, eigvecs = np.linalg.eigh(cos)
    assert eigvals.min() > 0, f"matrix not positive definite: {eigvals.min():.2e}"
    rows = eigvecs * np.sqrt(eigvals)
    rows /= np.linalg.norm(rows, axis=1, keepdims=True)
    return rows


def main():
    root = Path(__file__).resolve().parents[1]
    out_dir = root / "fixtures"
    out_dir.mkdir(exist_ok=True)

    cos = build_cosine_matrix()
    rows = factor_to_unit_rows(cos)
    realized = rows @ rows.T
    assert np.max(np.abs(realized - cos)) < 1e-9

    labels = GROUP + [f"other_{i:02d}" for i in range(N - 5)]
    anchors = AnchorSet(labels=labels, vectors=rows, source="rank-fixture")
    mapping = {name: "fruit_and_vegetables" for name in GROUP}
    for i in range(N - 5):
        mapping[f"other_{i:02d}"] = f"filler_{i // 5:02d}"

    metrics = rank_metrics(anchors, mapping)
    entry = metrics.per_supercategory["fruit_and_vegetables"]
    assert entry["sum_of_ranks"] == int(TARGET_RANKS.sum()) == 219, entry
    assert entry["top5_ratio"] == np.mean(TARGET_RANKS <= 4), entry

    # double-check the full within-group rank pattern, not just the sums
    pairwise = realized
    for r, row_name in enumerate(GROUP):
        order = np.argsort(-pairwise[r], kind="stable")
        ranks = np.empty(N, dtype=int)
        ranks[order] = np.arange(N)
        got = [ranks[c] for c in range(5)]
        assert got == TARGET_RANKS[r].tolist(), (row_name, got)

    save_anchor_file(out_dir / "rank_fixture_100.json", anchors)
    (out_dir / "rank_fixture_groups.json").write_text(
        json.dumps(mapping, indent=1, sort_keys=True))
    print(f"wrote {out_dir / 'rank_fixture_100.json'}")
    print(f"wrote {out_dir / 'rank_fixture_groups.json'}")
    print(f"group sum {entry['sum_of_ranks']}, top-5 ratio {entry['top5_ratio']}")


if __name__ == "__main__":
    main()
