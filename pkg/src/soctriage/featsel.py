"""Hybrid feature selection: five scorers fused into one ranking.

Statistical (chi-square, ANOVA F), information-theoretic (plug-in mutual
information in nats), and model-based (decision-tree gain, recursive feature
elimination) scores are min-max normalized and averaged into a unified
importance ranking. Numeric features are discretized into corpus quartiles
for the contingency-table methods.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .classifiers import fit_tree
from .errors import DegenerateLabelError, UsageError
from .ingest import FeatureMatrix

METHODS = ("chi2", "anova_f", "mutual_info", "tree_importance", "rfe")

TREE_SCORE_DEPTH = 5


@dataclass(frozen=True)
class FeatureScores:
    method: str
    scores: dict[str, float]

    def __post_init__(self):
        if self.method not in METHODS:
            raise UsageError(f"unknown scoring method {self.method!r}")
        for name, value in self.scores.items():
            if not np.isfinite(value):
                raise UsageError(f"non-finite score for feature {name!r}")


def _check_labels(X: FeatureMatrix) -> np.ndarray:
    if X.labels is None:
        raise UsageError("feature scoring requires labels")
    y = X.labels.astype(int)
    if y.min() == y.max():
        raise DegenerateLabelError("label vector is constant")
    return y


def _discretize(col: np.ndarray) -> np.ndarray:
    """Map a column to small integer categories: raw values when there are at
    most 4 distinct ones, otherwise corpus-quartile bins."""
    distinct = np.unique(col)
    if len(distinct) <= 4:
        return np.searchsorted(distinct, col)
    edges = np.quantile(col, [0.25, 0.5, 0.75])
    return np.searchsorted(edges, col, side="left")


def _chi2(col: np.ndarray, y: np.ndarray) -> float:
    bins = _discretize(col)
    stat = 0.0
    n = len(y)
    for b in np.unique(bins):
        row = bins == b
        row_total = row.sum()
        for c in (0, 1):
            observed = float((row & (y == c)).sum())
            expected = row_total * float((y == c).sum()) / n
            if expected > 0:
                stat += (observed - expected) ** 2 / expected
    return stat


def _anova_f(col: np.ndarray, y: np.ndarray) -> float:
    groups = [col[y == c] for c in (0, 1)]
    grand = col.mean()
    n = len(col)
    k = 2
    msb = sum(len(g) * (g.mean() - grand) ** 2 for g in groups) / (k - 1)
    msw = sum(((g - g.mean()) ** 2).sum() for g in groups) / (n - k)
    if msb == 0.0:
        return 0.0
    return float(msb / max(msw, 1e-12))


def _mutual_info(col: np.ndarray, y: np.ndarray) -> float:
    bins = _discretize(col)
    n = len(y)
    mi = 0.0
    for b in np.unique(bins):
        p_b = float((bins == b).sum()) / n
        for c in (0, 1):
            p_bc = float(((bins == b) & (y == c)).sum()) / n
            p_c = float((y == c).sum()) / n
            if p_bc > 0:
                mi += p_bc * np.log(p_bc / (p_b * p_c))
    return max(mi, 0.0)


def _tree_importance(X: FeatureMatrix, y: np.ndarray) -> dict[str, float]:
    _, gains = fit_tree(X.rows, y.astype(np.float64), max_depth=TREE_SCORE_DEPTH)
    return {name: float(g) for name, g in zip(X.feature_names, gains)}


def score_features(X: FeatureMatrix, method: str) -> FeatureScores:
    """Score every feature by one method; higher means more label-relevant."""
    y = _check_labels(X)
    if method == "tree_importance":
        return FeatureScores(method=method, scores=_tree_importance(X, y))
    if method == "chi2":
        scorer = _chi2
    elif method == "anova_f":
        scorer = _anova_f
    elif method == "mutual_info":
        scorer = _mutual_info
    elif method == "rfe":
        raise UsageError("rfe is computed via rfe_ranks, not score_features")
    else:
        raise UsageError(f"unknown scoring method {method!r}")
    scores = {name: float(scorer(X.rows[:, j], y)) for j, name in enumerate(X.feature_names)}
    return FeatureScores(method=method, scores=scores)


def _rank_order(scores: dict[str, float]) -> list[str]:
    # Best first; ties prefer the lexicographically smaller name.
    return [name for name, _ in sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))]


def rfe_ranks(X: FeatureMatrix, base_scorer: str = "tree_importance", keep: int = 1) -> FeatureScores:
    """Recursive feature elimination, re-scoring after each drop.

    The returned scores are rank-derived: the feature eliminated first gets 1
    and the best surviving feature gets the feature count, so "last eliminated
    = highest" holds by construction.
    """
    names = list(X.feature_names)
    if not 1 <= keep <= len(names):
        raise UsageError(f"keep must lie in [1, {len(names)}]")
    if base_scorer == "rfe":
        raise UsageError("rfe cannot be its own base scorer")
    _check_labels(X)

    remaining = list(names)
    matrix = X
    eliminated: list[str] = []
    while len(remaining) > keep:
        round_scores = score_features(matrix, base_scorer).scores
        # Ties on the low score drop the lexicographically greater name first,
        # so smaller names end up ranked higher, matching the fusion tie rule.
        low = min(round_scores.values())
        loser = max(n for n, s in round_scores.items() if s == low)
        eliminated.append(loser)
        remaining = [n for n in remaining if n != loser]
        cols = [i for i, n in enumerate(matrix.feature_names) if n != loser]
        matrix = FeatureMatrix(
            feature_names=[matrix.feature_names[i] for i in cols],
            rows=matrix.rows[:, cols],
            labels=matrix.labels,
        )

    survivor_order = _rank_order(score_features(matrix, base_scorer).scores)
    ordering = survivor_order + list(reversed(eliminated))  # best -> worst
    total = len(names)
    return FeatureScores(
        method="rfe",
        scores={name: float(total - pos) for pos, name in enumerate(ordering)},
    )


def _minmax(scores: dict[str, float]) -> dict[str, float]:
    values = list(scores.values())
    lo, hi = min(values), max(values)
    if hi == lo:
        return {name: 0.5 for name in scores}
    return {name: (value - lo) / (hi - lo) for name, value in scores.items()}


def unified_ranking(score_sets: list[FeatureScores]) -> list[tuple[str, float]]:
    """Min-max normalize each score set and average into one descending ranking."""
    if not score_sets:
        raise UsageError("need at least one score set")
    universe = set(score_sets[0].scores)
    for s in score_sets[1:]:
        if set(s.scores) != universe:
            raise UsageError("score sets cover different feature universes")
    normalized = [_minmax(s.scores) for s in score_sets]
    fused = {
        name: sum(norm[name] for norm in normalized) / len(normalized)
        for name in universe
    }
    return sorted(fused.items(), key=lambda kv: (-kv[1], kv[0]))


def select_top_k(ranking: list[tuple[str, float]], k: int) -> list[str]:
    if not 1 <= k <= len(ranking):
        raise UsageError(f"k must lie in [1, {len(ranking)}]")
    return [name for name, _ in ranking[:k]]


def export_ranking_csv(score_sets: list[FeatureScores]) -> str:
    """CSV of per-method normalized scores plus the fused score, best first."""
    ranking = unified_ranking(score_sets)
    normalized = {s.method: _minmax(s.scores) for s in score_sets}
    methods = [s.method for s in score_sets]
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["feature", *methods, "fused"])
    for name, fused in ranking:
        writer.writerow([name, *(f"{normalized[m][name]:.6f}" for m in methods), f"{fused:.6f}"])
    return buf.getvalue()
