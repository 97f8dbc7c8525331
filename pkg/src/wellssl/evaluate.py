"""Clustering metrics and frozen-embedding classification probes."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.cluster.hierarchy import cut_tree, linkage
from sklearn.linear_model import LogisticRegression
from sklearn.neural_network import MLPClassifier
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import StandardScaler

PROBES = ("linear", "fc3")


class EvalError(ValueError):
    pass


@dataclass
class EmbeddingMatrix:
    vectors: np.ndarray
    well_ids: list[str]
    depth_start: np.ndarray = None
    depth_end: np.ndarray = None
    well_index: np.ndarray = None
    geo_class: np.ndarray = None
    row_ids: np.ndarray = field(default=None)

    def __post_init__(self):
        n = len(self.vectors)
        self.vectors = np.asarray(self.vectors, dtype=float)
        if len(self.well_ids) != n:
            raise EvalError("provenance length differs from number of embeddings")
        if not np.all(np.isfinite(self.vectors)):
            raise EvalError("non-finite embedding values")
        fill = lambda a, v: np.full(n, v) if a is None else np.asarray(a)  # noqa: E731
        self.depth_start = fill(self.depth_start, np.nan)
        self.depth_end = fill(self.depth_end, np.nan)
        self.well_index = fill(self.well_index, -1).astype(np.int64)
        self.geo_class = fill(self.geo_class, -1).astype(np.int64)
        self.row_ids = np.arange(n) if self.row_ids is None else np.asarray(self.row_ids)

    def __len__(self):
        return len(self.vectors)

    @classmethod
    def from_intervals(cls, vectors, intervals):
        """Pair embeddings with the provenance of an IntervalSet (or Interval list)."""
        if hasattr(intervals, "well_ids"):
            s = intervals
            return cls(vectors, list(s.well_ids), s.depth_start, s.depth_end, s.well_index, s.geo_class)
        return cls(
            vectors,
            [iv.well_id for iv in intervals],
            np.array([iv.depth_start for iv in intervals]),
            np.array([iv.depth_end for iv in intervals]),
            np.array([iv.well_index for iv in intervals]),
            np.array([iv.geo_class for iv in intervals]),
        )

    def to_csv(self, path) -> None:
        dim = self.vectors.shape[1]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["row_id", "well_id", "depth_start", "depth_end", "well_index", "geo_class"]
                       + [f"e{j}" for j in range(dim)])
            for i in range(len(self)):
                w.writerow(
                    [int(self.row_ids[i]), self.well_ids[i], repr(float(self.depth_start[i])),
                     repr(float(self.depth_end[i])), int(self.well_index[i]), int(self.geo_class[i])]
                    + [repr(float(v)) for v in self.vectors[i]]
                )

    @classmethod
    def from_csv(cls, path) -> EmbeddingMatrix:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        ecols = [i for i, h in enumerate(header) if h.startswith("e") and h[1:].isdigit()]
        col = {h: i for i, h in enumerate(header)}
        if not body:
            raise EvalError(f"{path}: no embeddings")
        return cls(
            vectors=np.array([[float(r[i]) for i in ecols] for r in body]),
            well_ids=[r[col["well_id"]] for r in body],
            depth_start=np.array([float(r[col["depth_start"]]) for r in body]),
            depth_end=np.array([float(r[col["depth_end"]]) for r in body]),
            well_index=np.array([int(r[col["well_index"]]) for r in body]),
            geo_class=np.array([int(r[col["geo_class"]]) for r in body]),
            row_ids=np.array([int(r[col["row_id"]]) for r in body]),
        )


# ---------------------------------------------------------------- clustering


def canonical(labels) -> np.ndarray:
    """Relabel to 0..k-1 in order of first appearance."""
    _, first, inv = np.unique(np.asarray(labels), return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))
    return order[inv]


def agglomerative_cluster(vectors, k: int) -> np.ndarray:
    """Ward-linkage agglomerative clustering cut at ``k`` clusters."""
    x = np.asarray(getattr(vectors, "vectors", vectors), dtype=float)
    n = len(x)
    if not 1 <= k <= n:
        raise EvalError(f"k must lie in [1, {n}], got {k}")
    if n == 1:
        return np.zeros(1, dtype=int)
    tree = linkage(x, method="ward", metric="euclidean")
    return canonical(cut_tree(tree, n_clusters=k)[:, 0])


def contingency(pred, truth) -> np.ndarray:
    pred, truth = np.asarray(pred), np.asarray(truth)
    if pred.shape != truth.shape:
        raise EvalError(f"partitions differ in length: {pred.shape} vs {truth.shape}")
    _, p = np.unique(pred, return_inverse=True)
    _, t = np.unique(truth, return_inverse=True)
    table = np.zeros((p.max(initial=-1) + 1, t.max(initial=-1) + 1), dtype=np.int64)
    np.add.at(table, (p, t), 1)
    return table


def _pairs(x):
    return x * (x - 1) / 2.0


def ari(pred, truth) -> float:
    table = contingency(pred, truth)
    n = table.sum()
    sum_ij = _pairs(table).sum()
    sum_a = _pairs(table.sum(axis=1)).sum()
    sum_b = _pairs(table.sum(axis=0)).sum()
    expected = sum_a * sum_b / _pairs(n) if n > 1 else 0.0
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        # both partitions trivial in the same way
        return 1.0
    return float((sum_ij - expected) / (max_index - expected))


def purity(pred, truth) -> float:
    table = contingency(pred, truth)
    return float(table.max(axis=1).sum() / table.sum())


def pairwise_f_score(pred, truth) -> float:
    table = contingency(pred, truth)
    tp = _pairs(table).sum()
    fp = _pairs(table.sum(axis=1)).sum() - tp
    fn = _pairs(table.sum(axis=0)).sum() - tp
    if tp == 0:
        # no co-clustered pairs on either side (all singletons) is perfect agreement
        return 1.0 if fp == 0 and fn == 0 else 0.0
    precision, recall = tp / (tp + fp), tp / (tp + fn)
    return float(2 * precision * recall / (precision + recall))


def cluster_metrics(pred, truth) -> dict[str, float]:
    return {"ari": ari(pred, truth), "purity": purity(pred, truth), "f_score": pairwise_f_score(pred, truth)}


# ---------------------------------------------------------------- probes


def build_pair_dataset(vectors, well_ids, n_pairs: int, rng):
    """Balanced same-well (1) / different-well (0) pairs.

    Feature of a pair is [e1, e2, |e1 - e2|]. Returns (X, y, index pairs).
    """
    x = np.asarray(vectors, dtype=float)
    rng = np.random.default_rng(rng)
    wells = np.asarray(well_ids)
    groups = {w: np.flatnonzero(wells == w) for w in sorted(set(well_ids))}
    multi = [w for w, idx in groups.items() if len(idx) >= 2]
    if len(groups) < 2 or not multi:
        raise EvalError("pair dataset needs >= 2 wells and at least one well with >= 2 intervals")
    names = list(groups)
    n_pos = n_pairs // 2
    pairs = []
    for _ in range(n_pos):
        idx = groups[multi[rng.integers(len(multi))]]
        a, b = rng.choice(idx, 2, replace=False)
        pairs.append((a, b, 1))
    for _ in range(n_pairs - n_pos):
        wa, wb = rng.choice(len(names), 2, replace=False)
        pairs.append((rng.choice(groups[names[wa]]), rng.choice(groups[names[wb]]), 0))
    ij = np.array([(a, b) for a, b, _ in pairs], dtype=int)
    y = np.array([lab for *_, lab in pairs], dtype=int)
    e1, e2 = x[ij[:, 0]], x[ij[:, 1]]
    return np.hstack([e1, e2, np.abs(e1 - e2)]), y, ij


def make_probe(kind: str, seed: int = 0):
    if kind == "linear":
        clf = LogisticRegression(max_iter=2000)
    elif kind == "fc3":
        clf = MLPClassifier(hidden_layer_sizes=(128, 64), activation="relu", max_iter=500, random_state=seed)
    else:
        raise EvalError(f"unknown probe kind {kind!r}; expected one of {PROBES}")
    return make_pipeline(StandardScaler(), clf)


def group_split(groups, test_fraction: float, seed: int):
    """Seeded split of row indices with whole groups on one side."""
    groups = np.asarray(groups)
    names = np.array(sorted(set(groups.tolist())))
    if len(names) < 2:
        raise EvalError("need at least two groups to split by group")
    perm = np.random.default_rng(seed).permutation(len(names))
    n_test = min(max(int(round(test_fraction * len(names))), 1), len(names) - 1)
    test = np.isin(groups, names[perm[:n_test]])
    return np.flatnonzero(~test), np.flatnonzero(test)


def row_split(labels, test_fraction: float, seed: int):
    """Seeded per-class split of row indices (every class keeps >= 1 training row)."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    train, test = [], []
    for c in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == c))
        n_test = min(int(round(test_fraction * len(idx))), len(idx) - 1)
        test.extend(idx[:n_test])
        train.extend(idx[n_test:])
    return np.sort(train), np.sort(test)


@dataclass
class ProbeResult:
    model: object
    accuracy: float
    n_train: int
    n_test: int


def train_probe(x_train, y_train, x_test, y_test, kind: str = "linear", seed: int = 0) -> ProbeResult:
    """Fit a probe on fixed features and report held-out accuracy."""
    y_train = np.asarray(y_train)
    if len(np.unique(y_train)) < 2:
        raise EvalError("probe training data contains a single class")
    model = make_probe(kind, seed)
    model.fit(np.asarray(x_train, dtype=float), y_train)
    acc = float(np.mean(model.predict(np.asarray(x_test, dtype=float)) == np.asarray(y_test)))
    return ProbeResult(model, acc, len(y_train), len(y_test))


def geo_task(emb: EmbeddingMatrix, kind: str, seed: int, test_fraction: float = 0.3) -> ProbeResult:
    """Predict the interval's geological class; held-out wells."""
    tr, te = group_split(emb.well_ids, test_fraction, seed)
    return train_probe(emb.vectors[tr], emb.geo_class[tr], emb.vectors[te], emb.geo_class[te], kind, seed)


def well_task(emb: EmbeddingMatrix, kind: str, seed: int, test_fraction: float = 0.3) -> ProbeResult:
    """Predict which well an interval comes from; held-out intervals of the same wells."""
    labels = np.asarray(emb.well_ids)
    tr, te = row_split(labels, test_fraction, seed)
    return train_probe(emb.vectors[tr], labels[tr], emb.vectors[te], labels[te], kind, seed)


def binary_task(emb: EmbeddingMatrix, kind: str, seed: int, n_pairs: int = 2000,
                test_fraction: float = 0.3) -> ProbeResult:
    """Same-well vs different-well pairs; train and test pairs come from disjoint wells."""
    tr, te = group_split(emb.well_ids, test_fraction, seed)
    wells = np.asarray(emb.well_ids)
    xa, ya, _ = build_pair_dataset(emb.vectors[tr], wells[tr], n_pairs, [seed, 1])
    xb, yb, _ = build_pair_dataset(emb.vectors[te], wells[te], max(n_pairs // 2, 2), [seed, 2])
    return train_probe(xa, ya, xb, yb, kind, seed)


TASKS = {"geo": geo_task, "well": well_task, "binary": binary_task}


def write_results(rows: list[dict], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["task", "probe", "metric", "value", "seed"])
        for r in rows:
            w.writerow([r["task"], r["probe"], r["metric"], repr(float(r["value"])), r["seed"]])


def write_assignments(pred, truth, path, row_ids=None) -> None:
    row_ids = np.arange(len(pred)) if row_ids is None else row_ids
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row_id", "cluster", "truth"])
        for i, p, t in zip(row_ids, pred, truth):
            w.writerow([int(i), int(p), int(t)])
