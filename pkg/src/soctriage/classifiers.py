"""Native traditional-ML baseline suite for binary criticality detection.

Four model families implemented from scratch on numpy: logistic regression
(batch gradient descent on L2-regularized cross-entropy), Gaussian naive
Bayes with a variance floor, a greedy Gini decision tree, and discrete
AdaBoost over depth-1 trees. Everything is deterministic under a fixed seed;
fitted models are immutable and safe for concurrent prediction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from typing import Any

import numpy as np

from .errors import DegenerateLabelError, UsageError
from .ingest import FeatureMatrix

KINDS = ("logreg", "naive_bayes", "decision_tree", "adaboost")

_DEFAULT_HYPERPARAMS: dict[str, dict[str, float]] = {
    "logreg": {"learning_rate": 0.5, "epochs": 400, "l2": 1e-4},
    "naive_bayes": {"var_floor": 1e-9},
    "decision_tree": {"max_depth": 6},
    "adaboost": {"n_stumps": 50},
}


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    hyperparams: dict[str, float] = dc_field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise UsageError(f"unknown model kind {self.kind!r}")
        merged = dict(_DEFAULT_HYPERPARAMS[self.kind])
        merged.update(self.hyperparams)
        for name, value in merged.items():
            if value <= 0:
                raise UsageError(f"hyperparameter {name} must be positive, got {value}")
        object.__setattr__(self, "hyperparams", merged)


@dataclass(frozen=True)
class FittedModel:
    spec: ModelSpec
    parameters: dict[str, Any]
    feature_names: tuple[str, ...]

    def to_json(self) -> str:
        return json.dumps({
            "format_version": 1,
            "spec": {"kind": self.spec.kind, "hyperparams": self.spec.hyperparams, "seed": self.spec.seed},
            "parameters": self.parameters,
            "feature_names": list(self.feature_names),
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "FittedModel":
        doc = json.loads(text)
        if doc.get("format_version") != 1:
            raise UsageError(f"unsupported model document version {doc.get('format_version')!r}")
        spec = ModelSpec(kind=doc["spec"]["kind"], hyperparams=doc["spec"]["hyperparams"], seed=doc["spec"]["seed"])
        return cls(spec=spec, parameters=doc["parameters"], feature_names=tuple(doc["feature_names"]))


def _check_trainable(X: FeatureMatrix) -> tuple[np.ndarray, np.ndarray]:
    if X.labels is None:
        raise UsageError("training requires labels")
    y = X.labels.astype(np.float64)
    if y.sum() < 2 or (1 - y).sum() < 2:
        raise DegenerateLabelError("need at least 2 examples of each class")
    return X.rows, y


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logreg_gradient(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, l2: float) -> tuple[np.ndarray, float]:
    """Analytic gradient of mean cross-entropy + (l2/2)||w||^2 (bias unpenalized)."""
    p = _sigmoid(X @ w + b)
    diff = p - y
    grad_w = X.T @ diff / len(y) + l2 * w
    grad_b = float(diff.mean())
    return grad_w, grad_b


def logreg_loss(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, l2: float) -> float:
    z = X @ w + b
    # log(1 + e^z) - y z, computed stably
    ce = np.logaddexp(0.0, z) - y * z
    return float(ce.mean() + 0.5 * l2 * np.dot(w, w))


def _fit_logreg(X: np.ndarray, y: np.ndarray, hp: dict[str, float]) -> dict[str, Any]:
    w = np.zeros(X.shape[1])
    b = 0.0
    lr, l2 = hp["learning_rate"], hp["l2"]
    for _ in range(int(hp["epochs"])):
        grad_w, grad_b = logreg_gradient(w, b, X, y, l2)
        w -= lr * grad_w
        b -= lr * grad_b
    return {"weights": w.tolist(), "bias": b}


def _fit_naive_bayes(X: np.ndarray, y: np.ndarray, hp: dict[str, float]) -> dict[str, Any]:
    floor = hp["var_floor"]
    params: dict[str, Any] = {"prior_pos": float(y.mean())}
    for name, mask in (("pos", y == 1), ("neg", y == 0)):
        sub = X[mask]
        params[f"mean_{name}"] = sub.mean(axis=0).tolist()
        params[f"var_{name}"] = np.maximum(sub.var(axis=0), floor).tolist()
    return params


def _gini(weights_pos: float, weights_neg: float) -> float:
    total = weights_pos + weights_neg
    if total <= 0:
        return 0.0
    p = weights_pos / total
    return 2.0 * p * (1.0 - p)


class _TreeBuilder:
    """Greedy weighted-Gini tree. Split ties break to the lowest feature
    index, then the lowest threshold; gain attribution for importance is
    shared equally among features tied at the best gain."""

    def __init__(self, max_depth: int, n_features: int):
        self.max_depth = max_depth
        self.importance = np.zeros(n_features)

    def build(self, X: np.ndarray, y: np.ndarray, w: np.ndarray, depth: int = 0) -> dict[str, Any]:
        w_pos = float(w[y == 1].sum())
        w_neg = float(w[y == 0].sum())
        total = w_pos + w_neg
        prob = w_pos / total if total > 0 else 0.5
        node_impurity = _gini(w_pos, w_neg)
        if depth >= self.max_depth or node_impurity == 0.0 or len(y) < 2:
            return {"leaf": True, "prob": prob}

        best_gain = 0.0
        best: tuple[int, float] | None = None
        tied_features: set[int] = set()
        for j in range(X.shape[1]):
            col = X[:, j]
            order = np.argsort(col, kind="stable")
            sorted_col = col[order]
            distinct = np.unique(sorted_col)
            if len(distinct) < 2:
                continue
            thresholds = (distinct[:-1] + distinct[1:]) / 2.0
            for t in thresholds:
                left = col <= t
                wl_pos = float(w[left & (y == 1)].sum())
                wl_neg = float(w[left & (y == 0)].sum())
                wr_pos = w_pos - wl_pos
                wr_neg = w_neg - wl_neg
                wl, wr = wl_pos + wl_neg, wr_pos + wr_neg
                if wl <= 0 or wr <= 0:
                    continue
                child = (wl * _gini(wl_pos, wl_neg) + wr * _gini(wr_pos, wr_neg)) / total
                gain = node_impurity - child
                if gain > best_gain + 1e-12:
                    best_gain = gain
                    best = (j, float(t))
                    tied_features = {j}
                elif best is not None and abs(gain - best_gain) <= 1e-12:
                    tied_features.add(j)

        if best is None or best_gain <= 1e-12:
            return {"leaf": True, "prob": prob}

        j, t = best
        share = best_gain * total / max(len(tied_features), 1)
        for feat in tied_features:
            self.importance[feat] += share
        left_mask = X[:, j] <= t
        return {
            "leaf": False,
            "feature": j,
            "threshold": t,
            "left": self.build(X[left_mask], y[left_mask], w[left_mask], depth + 1),
            "right": self.build(X[~left_mask], y[~left_mask], w[~left_mask], depth + 1),
        }


def fit_tree(
    X: np.ndarray, y: np.ndarray, max_depth: int, sample_weight: np.ndarray | None = None
) -> tuple[dict[str, Any], np.ndarray]:
    """Fit a weighted Gini tree; returns (node structure, per-feature gain)."""
    w = sample_weight if sample_weight is not None else np.full(len(y), 1.0 / len(y))
    builder = _TreeBuilder(max_depth=max_depth, n_features=X.shape[1])
    root = builder.build(X, y.astype(np.float64), w.astype(np.float64))
    return root, builder.importance


def tree_predict_proba(node: dict[str, Any], X: np.ndarray) -> np.ndarray:
    out = np.empty(len(X))
    for i, row in enumerate(X):
        cur = node
        while not cur["leaf"]:
            cur = cur["left"] if row[cur["feature"]] <= cur["threshold"] else cur["right"]
        out[i] = cur["prob"]
    return out


def _fit_adaboost(X: np.ndarray, y: np.ndarray, hp: dict[str, float]) -> dict[str, Any]:
    n = len(y)
    w = np.full(n, 1.0 / n)
    y_signed = 2.0 * y - 1.0
    stumps: list[dict[str, Any]] = []
    alphas: list[float] = []
    for _ in range(int(hp["n_stumps"])):
        stump, _ = fit_tree(X, y, max_depth=1, sample_weight=w)
        pred = (tree_predict_proba(stump, X) >= 0.5).astype(np.float64)
        err = float(w[pred != y].sum())
        # A stump no better than chance cannot reduce exponential loss; stop.
        assert err <= 0.5 + 1e-12, f"stump weighted error {err} exceeds 0.5"
        if err >= 0.5 - 1e-12:
            break
        err = max(err, 1e-10)
        alpha = 0.5 * np.log((1.0 - err) / err)
        stumps.append(stump)
        alphas.append(float(alpha))
        pred_signed = 2.0 * pred - 1.0
        w = w * np.exp(-alpha * y_signed * pred_signed)
        w /= w.sum()
        if err <= 1e-10:
            break
    if not stumps:
        stump, _ = fit_tree(X, y, max_depth=1)
        stumps, alphas = [stump], [0.0]
    return {"stumps": stumps, "alphas": alphas}


def fit(spec: ModelSpec, X: FeatureMatrix) -> FittedModel:
    """Train a model; deterministic for a fixed (spec, corpus)."""
    rows, y = _check_trainable(X)
    hp = spec.hyperparams
    if spec.kind == "logreg":
        params = _fit_logreg(rows, y, hp)
    elif spec.kind == "naive_bayes":
        params = _fit_naive_bayes(rows, y, hp)
    elif spec.kind == "decision_tree":
        root, gains = fit_tree(rows, y, max_depth=int(hp["max_depth"]))
        params = {"root": root, "feature_gain": gains.tolist()}
    else:
        params = _fit_adaboost(rows, y, hp)
    return FittedModel(spec=spec, parameters=params, feature_names=tuple(X.feature_names))


def predict_proba(model: FittedModel, X: FeatureMatrix) -> np.ndarray:
    """Per-row probability of the critical class."""
    if tuple(X.feature_names) != model.feature_names:
        raise UsageError("feature schema does not match the training schema")
    rows = X.rows
    kind = model.spec.kind
    params = model.parameters
    if kind == "logreg":
        w = np.asarray(params["weights"])
        return _sigmoid(rows @ w + params["bias"])
    if kind == "naive_bayes":
        prior_pos = min(max(params["prior_pos"], 1e-12), 1 - 1e-12)
        log_odds = np.full(len(rows), np.log(prior_pos) - np.log(1 - prior_pos))
        for name, sign in (("pos", 1.0), ("neg", -1.0)):
            mean = np.asarray(params[f"mean_{name}"])
            var = np.asarray(params[f"var_{name}"])
            ll = -0.5 * (np.log(2 * np.pi * var) + (rows - mean) ** 2 / var)
            log_odds += sign * ll.sum(axis=1)
        return _sigmoid(log_odds)
    if kind == "decision_tree":
        return tree_predict_proba(params["root"], rows)
    margins = np.zeros(len(rows))
    for stump, alpha in zip(params["stumps"], params["alphas"]):
        pred_signed = 2.0 * (tree_predict_proba(stump, rows) >= 0.5) - 1.0
        margins += alpha * pred_signed
    return _sigmoid(margins)


def predict(model: FittedModel, X: FeatureMatrix, threshold: float = 0.5) -> np.ndarray:
    if not 0.0 <= threshold <= 1.0:
        raise UsageError(f"threshold {threshold} outside [0, 1]")
    return predict_proba(model, X) >= threshold
