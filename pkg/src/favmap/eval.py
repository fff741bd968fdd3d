"""Balanced repeated cross-validation.

Protocol: partition the labeled tiles into k folds at random, balance each
fold by random undersampling of the majority class, then rotate: train a
fresh forest on k-1 balanced folds, test on the held-out balanced fold.
The whole procedure is repeated (5 x 5-fold by default), yielding k*repeats
(precision, recall, F1) rows that are aggregated as mean and sample
standard deviation.

Every random decision in cell (repeat, fold) derives from the master seed
and the cell coordinates alone, so any cell can be recomputed in isolation.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import rng
from .errors import DataError
from .features import FeatureSet, assemble
from .forest import ForestConfig, fit, predict

_PARTITION, _BALANCE, _TRAIN = 0, 1, 2  # derivation-path tags


@dataclass(frozen=True)
class CvConfig:
    k: int = 5
    repeats: int = 5
    seed: int = 0
    forest: ForestConfig = field(default_factory=ForestConfig)

    def __post_init__(self) -> None:
        if self.k < 2:
            raise DataError(f"k must be >= 2, got {self.k}")
        if self.repeats < 1:
            raise DataError(f"repeats must be >= 1, got {self.repeats}")


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise DataError("confusion counts must be non-negative")


@dataclass(frozen=True)
class CvRow:
    repeat: int
    fold: int
    precision: float
    recall: float
    f1: float
    confusion: Confusion


@dataclass
class CvReport:
    rows: list[CvRow]
    summary: dict[str, dict[str, float]]
    per_repeat_means: list[dict[str, float]]
    config: dict


def kfold_split(ids: list, k: int, gen: np.random.Generator) -> list[list]:
    """Random partition into k folds whose sizes differ by at most one."""
    n = len(ids)
    if n < k:
        raise DataError(f"cannot split {n} ids into {k} folds")
    order = gen.permutation(n)
    base, extra = divmod(n, k)
    folds = []
    start = 0
    for f in range(k):
        size = base + (1 if f < extra else 0)
        folds.append([ids[i] for i in order[start : start + size]])
        start += size
    return folds


def undersample(fold_ids: list, labels: dict, gen: np.random.Generator) -> list:
    """Balance one fold: keep the whole minority class plus an equal-size
    uniform random subset of the majority class.  Input order is preserved,
    so an already balanced fold comes back unchanged."""
    pos = [i for i in fold_ids if labels[i] == 1]
    neg = [i for i in fold_ids if labels[i] == 0]
    if not pos or not neg:
        raise DataError(
            "fold contains a single class; reseed the split or enlarge the dataset"
        )
    if len(pos) == len(neg):
        return list(fold_ids)
    minority, majority = (pos, neg) if len(pos) < len(neg) else (neg, pos)
    chosen = gen.choice(len(majority), size=len(minority), replace=False)
    keep = set(minority) | {majority[i] for i in chosen}
    return [i for i in fold_ids if i in keep]


def metrics(conf: Confusion) -> tuple[float, float, float]:
    """(precision, recall, f1); any zero denominator yields 0 by convention."""
    precision = conf.tp / (conf.tp + conf.fp) if conf.tp + conf.fp else 0.0
    recall = conf.tp / (conf.tp + conf.fn) if conf.tp + conf.fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def aggregate(values) -> tuple[float, float]:
    """Mean and sample standard deviation (n-1 denominator; n=1 gives 0)."""
    vals = list(values)
    if not vals:
        raise DataError("cannot aggregate an empty sequence")
    mean = math.fsum(vals) / len(vals)
    if len(vals) == 1:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in vals) / (len(vals) - 1)
    return mean, math.sqrt(var)


def confusion_from_pairs(y_true: np.ndarray, y_pred: np.ndarray) -> Confusion:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    return Confusion(
        tp=int(np.count_nonzero((y_true == 1) & (y_pred == 1))),
        fp=int(np.count_nonzero((y_true == 0) & (y_pred == 1))),
        fn=int(np.count_nonzero((y_true == 1) & (y_pred == 0))),
        tn=int(np.count_nonzero((y_true == 0) & (y_pred == 0))),
    )


def _balanced_folds(ids: list, labels: dict, cfg: CvConfig, repeat: int) -> list[list]:
    folds = kfold_split(ids, cfg.k, rng.generator(cfg.seed, repeat, _PARTITION))
    balanced = []
    for f, fold in enumerate(folds):
        try:
            balanced.append(undersample(fold, labels, rng.generator(cfg.seed, repeat, _BALANCE, f)))
        except DataError as bad:
            raise DataError(f"repeat {repeat}, fold {f}: {bad}") from bad
    return balanced


def run_cell(
    X: np.ndarray,
    y: np.ndarray,
    ids: list,
    cfg: CvConfig,
    repeat: int,
    fold: int,
    threads: int = 1,
) -> tuple[CvRow, np.ndarray, np.ndarray]:
    """Train and evaluate one (repeat, fold) cell from scratch.

    Reproduces exactly the row that run_cv emits for the same cell; returns
    the row plus the raw (y_true, y_pred) pair for independent checking.
    """
    labels = {tid: int(lab) for tid, lab in zip(ids, y)}
    index = {tid: i for i, tid in enumerate(ids)}
    balanced = _balanced_folds(ids, labels, cfg, repeat)
    test_ids = balanced[fold]
    train_ids = [tid for f, part in enumerate(balanced) if f != fold for tid in part]
    train_idx = np.asarray([index[t] for t in train_ids])
    test_idx = np.asarray([index[t] for t in test_ids])
    forest_cfg = replace(cfg.forest, seed=rng.derive_seed(cfg.seed, repeat, _TRAIN, fold))
    try:
        forest = fit(X[train_idx], y[train_idx], forest_cfg, threads=threads)
    except DataError as bad:
        raise DataError(f"repeat {repeat}, fold {fold}: {bad}") from bad
    y_true = y[test_idx]
    y_pred = predict(forest, X[test_idx])
    conf = confusion_from_pairs(y_true, y_pred)
    precision, recall, f1 = metrics(conf)
    return CvRow(repeat, fold, precision, recall, f1, conf), y_true, y_pred


def run_cv(dataset, features: FeatureSet, cfg: CvConfig | None = None,
           threads: int = 1) -> CvReport:
    """The full evaluation protocol over a labeled dataset.

    Deterministic under (dataset, features, cfg.seed), whatever the thread
    count.  Errors from balancing or training carry their (repeat, fold)
    context.
    """
    cfg = cfg or CvConfig()
    X, y, ids = assemble(dataset, features)
    if len(set(y.tolist())) < 2:
        raise DataError("dataset has a single class; cross-validation needs both")

    rows: list[CvRow] = []
    for repeat in range(cfg.repeats):
        for fold in range(cfg.k):
            row, _, _ = run_cell(X, y, ids, cfg, repeat, fold, threads=threads)
            rows.append(row)

    summary = {}
    for name in ("precision", "recall", "f1"):
        mean, std = aggregate(getattr(r, name) for r in rows)
        summary[name] = {"mean": mean, "std": std}
    per_repeat = []
    for repeat in range(cfg.repeats):
        chunk = [r for r in rows if r.repeat == repeat]
        per_repeat.append(
            {
                "repeat": repeat,
                **{name: aggregate(getattr(r, name) for r in chunk)[0]
                   for name in ("precision", "recall", "f1")},
            }
        )
    config_echo = {
        "k": cfg.k,
        "repeats": cfg.repeats,
        "seed": cfg.seed,
        "forest": {
            "n_trees": cfg.forest.n_trees,
            "max_features": cfg.forest.max_features,
            "min_samples_leaf": cfg.forest.min_samples_leaf,
            "max_depth": cfg.forest.max_depth,
            "bootstrap": cfg.forest.bootstrap,
            "seed": "derived per (repeat, fold) from the master seed",
        },
        "feature_source": features.source,
        "feature_dimension": features.dimension,
    }
    return CvReport(rows, summary, per_repeat, config_echo)


# ---------------------------------------------------------------------------
# Serialization and rendering
# ---------------------------------------------------------------------------


def report_to_dict(report: CvReport) -> dict:
    return {
        "config": report.config,
        "per_fold": [
            {
                "repeat": r.repeat,
                "fold": r.fold,
                "precision": r.precision,
                "recall": r.recall,
                "f1": r.f1,
                "confusion": asdict(r.confusion),
            }
            for r in report.rows
        ],
        "per_repeat_means": report.per_repeat_means,
        "summary": report.summary,
    }


def write_report(report: CvReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report_to_dict(report), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _cell(stats: dict[str, float]) -> str:
    return f"{stats['mean']:.2f} ± {stats['std']:.2f}"


def render_table(entries: list[tuple[str, dict]]) -> str:
    """Text table of (method, summary) pairs, one row per method, with
    mean +/- std cells formatted to two decimals."""
    header = ["Method", "Precision", "Recall", "F1-score"]
    rows = [
        [method, _cell(summary["precision"]), _cell(summary["recall"]), _cell(summary["f1"])]
        for method, summary in entries
    ]
    widths = [max(len(header[c]), *(len(r[c]) for r in rows)) if rows else len(header[c])
              for c in range(4)]
    lines = [" | ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
    lines.append("-+-".join("-" * w for w in widths))
    for r in rows:
        lines.append(" | ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip())
    return "\n".join(lines) + "\n"
