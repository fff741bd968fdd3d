"""Random forest binary classifier, built from scratch.

CART trees with Gini impurity, bootstrap sampling and random feature
subsets per split, combined by majority vote.  Determinism rules:

* each tree grows from its own generator seeded by ``(seed, tree_index)``
  (see :mod:`favmap.rng`), so training is bit-identical for any thread count;
* split thresholds are midpoints between consecutive distinct sorted values,
  giving a finite candidate set that an exhaustive oracle can enumerate;
* ties are broken toward the lower feature index, then lower threshold;
* a leaf tie votes the positive class, a forest-level tie predicts the
  negative class.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import DataError


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_features: int | None = None  # None: ceil(sqrt(d)) at fit time
    min_samples_leaf: int = 1
    max_depth: int | None = None
    seed: int = 0
    bootstrap: bool = True  # test hook; disabling makes a single tree deterministic CART

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise DataError(f"n_trees must be >= 1, got {self.n_trees}")
        if self.min_samples_leaf < 1:
            raise DataError(f"min_samples_leaf must be >= 1, got {self.min_samples_leaf}")
        if self.max_features is not None and self.max_features < 1:
            raise DataError(f"max_features must be >= 1, got {self.max_features}")
        if self.max_depth is not None and self.max_depth < 0:
            raise DataError(f"max_depth must be >= 0, got {self.max_depth}")


@dataclass(frozen=True)
class Leaf:
    n_neg: int
    n_pos: int

    @property
    def vote(self) -> int:
        # tie goes to the positive class
        return 1 if self.n_pos >= self.n_neg else 0


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    left: "Split | Leaf"
    right: "Split | Leaf"


@dataclass(frozen=True)
class Forest:
    trees: tuple["Split | Leaf", ...]
    config: ForestConfig
    dimension: int


def gini(counts: tuple[int, int]) -> float:
    """Gini impurity 1 - p0^2 - p1^2 of a two-class count pair."""
    n_neg, n_pos = counts
    total = n_neg + n_pos
    if total < 1:
        raise DataError("gini of an empty node is undefined")
    p0 = n_neg / total
    p1 = n_pos / total
    return 1.0 - p0 * p0 - p1 * p1


def best_split(
    X: np.ndarray,
    y: np.ndarray,
    feature_indices,
    min_leaf: int = 1,
) -> tuple[int, float, float] | None:
    """Best (feature, threshold, gain) over the given features, or None.

    Candidate thresholds are midpoints between consecutive distinct sorted
    values; the winner maximizes the Gini impurity decrease.  Splits leaving
    a child below ``min_leaf`` samples are not considered.
    """
    n = len(y)
    if n < 2:
        return None
    n_pos_total = int(y.sum())
    parent = gini((n - n_pos_total, n_pos_total))
    best: tuple[float, int, float] | None = None  # (gain, feature, threshold)

    for fi in sorted(int(f) for f in feature_indices):
        xs = X[:, fi]
        order = np.argsort(xs, kind="stable")
        sx = xs[order]
        sy = y[order]
        # boundaries between distinct consecutive values
        cut = np.nonzero(sx[1:] > sx[:-1])[0]
        if cut.size == 0:
            continue
        left_n = cut + 1
        right_n = n - left_n
        if min_leaf > 1:
            ok = (left_n >= min_leaf) & (right_n >= min_leaf)
            cut, left_n, right_n = cut[ok], left_n[ok], right_n[ok]
            if cut.size == 0:
                continue
        pos_prefix = np.cumsum(sy)
        left_pos = pos_prefix[cut]
        right_pos = n_pos_total - left_pos
        gl = 1.0 - ((left_n - left_pos) / left_n) ** 2 - (left_pos / left_n) ** 2
        gr = 1.0 - ((right_n - right_pos) / right_n) ** 2 - (right_pos / right_n) ** 2
        gains = parent - (left_n * gl + right_n * gr) / n
        k = int(np.argmax(gains))  # first max: lowest threshold wins ties
        gain = float(gains[k])
        if gain <= 0.0:
            continue
        lo, hi = float(sx[cut[k]]), float(sx[cut[k] + 1])
        thr = lo + (hi - lo) / 2.0
        if thr >= hi:  # midpoint rounded onto the upper value; keep the split valid
            thr = lo
        if best is None or gain > best[0]:  # strict: lower feature index wins ties
            best = (gain, fi, thr)

    if best is None:
        return None
    gain, fi, thr = best
    return fi, thr, gain


def _grow(
    X: np.ndarray,
    y: np.ndarray,
    gen: np.random.Generator,
    config: ForestConfig,
    max_features: int,
    depth: int,
) -> Split | Leaf:
    n_pos = int(y.sum())
    counts = (len(y) - n_pos, n_pos)
    if (
        n_pos == 0
        or n_pos == len(y)
        or len(y) < 2 * config.min_samples_leaf
        or (config.max_depth is not None and depth >= config.max_depth)
    ):
        return Leaf(*counts)
    subset = gen.choice(X.shape[1], size=max_features, replace=False)
    found = best_split(X, y, subset, config.min_samples_leaf)
    if found is None:
        return Leaf(*counts)
    fi, thr, _ = found
    mask = X[:, fi] <= thr
    left = _grow(X[mask], y[mask], gen, config, max_features, depth + 1)
    right = _grow(X[~mask], y[~mask], gen, config, max_features, depth + 1)
    return Split(fi, thr, left, right)


def fit(X: np.ndarray, y: np.ndarray, config: ForestConfig, threads: int = 1) -> Forest:
    """Train a forest of ``config.n_trees`` CART trees.

    Each tree uses a bootstrap sample of size n (unless the bootstrap hook is
    off) and a fresh generator derived from ``(seed, tree_index)``; the
    result is therefore identical whether trees are grown sequentially or on
    any number of threads.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or len(X) != len(y):
        raise DataError(f"X must be n x d matching y; got {X.shape} and {len(y)}")
    n, d = X.shape
    if n < 2:
        raise DataError(f"need at least 2 samples, got {n}")
    if d < 1:
        raise DataError("need at least one feature")
    classes = np.unique(y)
    if not np.isin(classes, (0, 1)).all():
        raise DataError(f"labels must be 0/1, got {classes.tolist()}")
    if classes.size < 2:
        raise DataError("training set contains a single class")
    max_features = config.max_features if config.max_features is not None else math.isqrt(d - 1) + 1
    if max_features > d:
        raise DataError(f"max_features={max_features} exceeds dimension {d}")
    y01 = (y == 1).astype(np.int64)

    def grow_one(index: int) -> Split | Leaf:
        gen = rng.generator(config.seed, index)
        if config.bootstrap:
            idx = gen.integers(0, n, size=n)
            Xb, yb = X[idx], y01[idx]
        else:
            Xb, yb = X, y01
        return _grow(Xb, yb, gen, config, max_features, 0)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trees = tuple(pool.map(grow_one, range(config.n_trees)))
    else:
        trees = tuple(grow_one(i) for i in range(config.n_trees))
    return Forest(trees, config, d)


def _tree_votes(node: Split | Leaf, X: np.ndarray) -> np.ndarray:
    if isinstance(node, Leaf):
        return np.full(len(X), node.vote, dtype=np.int64)
    out = np.empty(len(X), dtype=np.int64)
    mask = X[:, node.feature] <= node.threshold
    if mask.any():
        out[mask] = _tree_votes(node.left, X[mask])
    if not mask.all():
        out[~mask] = _tree_votes(node.right, X[~mask])
    return out


def _as_matrix(forest: Forest, x: np.ndarray) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != forest.dimension:
        raise DataError(f"expected {forest.dimension}-dimensional input, got shape {arr.shape}")
    return arr, single


def predict_proba(forest: Forest, x: np.ndarray):
    """Fraction of trees voting the positive class (in {0, 1/n, ..., 1})."""
    arr, single = _as_matrix(forest, x)
    votes = np.zeros(len(arr), dtype=np.int64)
    for tree in forest.trees:
        votes += _tree_votes(tree, arr)
    proba = votes / len(forest.trees)
    return float(proba[0]) if single else proba


def predict(forest: Forest, x: np.ndarray):
    """Majority-vote class; an exact tie predicts the negative class."""
    arr, single = _as_matrix(forest, x)
    votes = np.zeros(len(arr), dtype=np.int64)
    for tree in forest.trees:
        votes += _tree_votes(tree, arr)
    labels = (2 * votes > len(forest.trees)).astype(np.int8)
    return int(labels[0]) if single else labels


# ---------------------------------------------------------------------------
# Inspection dump (not a stability-guaranteed format)
# ---------------------------------------------------------------------------


def _node_to_dict(node: Split | Leaf) -> dict:
    if isinstance(node, Leaf):
        return {"counts": [node.n_neg, node.n_pos]}
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "left": _node_to_dict(node.left),
        "right": _node_to_dict(node.right),
    }


def forest_to_dict(forest: Forest) -> dict:
    cfg = forest.config
    return {
        "config": {
            "n_trees": cfg.n_trees,
            "max_features": cfg.max_features,
            "min_samples_leaf": cfg.min_samples_leaf,
            "max_depth": cfg.max_depth,
            "seed": cfg.seed,
            "bootstrap": cfg.bootstrap,
        },
        "dimension": forest.dimension,
        "trees": [_node_to_dict(t) for t in forest.trees],
    }


def dump_forest(forest: Forest, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(forest_to_dict(forest), fh, indent=1, sort_keys=True)
        fh.write("\n")
