"""Per-joint random forests over perturbation features, with path explanations.

Each of the 24 joints gets its own ensemble of binary CART trees (Gini
impurity, bootstrap resampling, ceil(sqrt(72)) candidate features per split).
Trees are stored as flat arrays so they serialize exactly and predict in
vectorized form.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import AXES, JOINTS, N_FEATURES, N_JOINTS
from .errors import InvalidInputError, ParseError

MODEL_FORMAT = "motioncoach-forest"
MODEL_VERSION = 1
LEAF = -1
DEFAULT_THRESHOLD = 0.5
ADOPTED_CONFIG = (5, None)
DEFAULT_GRID = ((5, None), (10, None), (20, None), (5, 1), (5, 3), (5, 5))


@dataclass(frozen=True, eq=False)
class Tree:
    """Flat binary tree. ``feature[k] == -1`` marks a leaf.

    Samples with ``x[feature] <= threshold`` go left.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    def depth(self) -> int:
        best = 0
        stack = [(0, 0)]
        while stack:
            k, d = stack.pop()
            if self.feature[k] == LEAF:
                best = max(best, d)
            else:
                stack.append((int(self.left[k]), d + 1))
                stack.append((int(self.right[k]), d + 1))
        return best

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of X."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            f = self.feature[node]
            internal = f != LEAF
            if not internal.any():
                return node
            r = rows[internal]
            n = node[internal]
            go_left = X[r, f[internal]] <= self.threshold[n]
            node[r] = np.where(go_left, self.left[n], self.right[n])

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def leaf_of(self, x) -> int:
        """Leaf reached by a single feature vector (plain traversal, no array ops)."""
        feature, threshold, left, right = self._lists()
        k = 0
        while feature[k] != LEAF:
            k = left[k] if x[feature[k]] <= threshold[k] else right[k]
        return k

    def _lists(self):
        cached = self.__dict__.get("_as_lists")
        if cached is None:
            cached = (self.feature.tolist(), self.threshold.tolist(), self.left.tolist(), self.right.tolist())
            object.__setattr__(self, "_as_lists", cached)
        return cached

    def decision_path(self, x: np.ndarray) -> tuple[list[tuple[int, str, float]], int]:
        """Conditions (feature, comparator, threshold) on the path of x, and the leaf."""
        conds = []
        k = 0
        while self.feature[k] != LEAF:
            f = int(self.feature[k])
            thr = float(self.threshold[k])
            if x[f] <= thr:
                conds.append((f, "<=", thr))
                k = int(self.left[k])
            else:
                conds.append((f, ">", thr))
                k = int(self.right[k])
        return conds, k

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            np.asarray(d["feature"], dtype=np.int64),
            np.asarray(d["threshold"], dtype=float),
            np.asarray(d["left"], dtype=np.int64),
            np.asarray(d["right"], dtype=np.int64),
            np.asarray(d["value"], dtype=float),
        )

    @classmethod
    def stump(cls, feature: int, threshold: float, left_value: float, right_value: float) -> "Tree":
        return cls(
            np.array([feature, LEAF, LEAF]),
            np.array([threshold, 0.0, 0.0]),
            np.array([1, LEAF, LEAF]),
            np.array([2, LEAF, LEAF]),
            np.array([0.0, left_value, right_value]),
        )

    @classmethod
    def leaf(cls, value: float) -> "Tree":
        return cls(np.array([LEAF]), np.array([0.0]), np.array([LEAF]), np.array([LEAF]), np.array([value]))


def n_candidate_features(n_features: int = N_FEATURES) -> int:
    return math.ceil(math.sqrt(n_features))


def _best_split(X, y, idx, rng, n_candidates):
    """Best Gini split among randomly drawn non-constant features.

    Features are visited in random order until ``n_candidates`` non-constant
    ones have been evaluated; constant features do not count toward the quota.
    """
    n = idx.size
    ys_all = y[idx]
    best = None  # (impurity, feature, threshold, left_mask)
    visited = 0
    for f in rng.permutation(X.shape[1]):
        if visited >= n_candidates:
            break
        v = X[idx, f]
        order = np.argsort(v, kind="stable")
        vs = v[order]
        valid = vs[1:] > vs[:-1]
        if not valid.any():
            continue
        visited += 1
        ys = ys_all[order].astype(float)
        n_left = np.arange(1, n, dtype=float)
        n_right = n - n_left
        pos_left = np.cumsum(ys)[:-1]
        pos_right = ys.sum() - pos_left
        pl = pos_left / n_left
        pr = pos_right / n_right
        gini_left = 2.0 * pl * (1.0 - pl)
        gini_right = 2.0 * pr * (1.0 - pr)
        impurity = (n_left * gini_left + n_right * gini_right) / n
        impurity = np.where(valid, impurity, np.inf)
        k = int(np.argmin(impurity))
        if best is None or impurity[k] < best[0]:
            lo, hi = vs[k], vs[k + 1]
            thr = lo + (hi - lo) / 2.0
            if not lo <= thr < hi:
                thr = lo
            best = (float(impurity[k]), int(f), float(thr))
    return best


def grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    rng: np.random.Generator,
    max_depth: int | None = None,
    n_candidates: int | None = None,
    min_samples_leaf: int = 1,
) -> Tree:
    """CART on (X, y) grown until pure, ``max_depth``, or no valid split remains."""
    if n_candidates is None:
        n_candidates = n_candidate_features(X.shape[1])
    y = np.asarray(y, dtype=bool)
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(idx):
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(float(y[idx].mean()))
        return len(feature) - 1

    root = new_node(np.arange(X.shape[0]))
    stack = [(root, np.arange(X.shape[0]), 0)]
    while stack:
        k, idx, depth = stack.pop()
        frac = value[k]
        if frac == 0.0 or frac == 1.0 or idx.size < 2 * min_samples_leaf:
            continue
        if max_depth is not None and depth >= max_depth:
            continue
        split = _best_split(X, y, idx, rng, n_candidates)
        if split is None:
            continue
        _, f, thr = split
        go_left = X[idx, f] <= thr
        li, ri = idx[go_left], idx[~go_left]
        if li.size < min_samples_leaf or ri.size < min_samples_leaf:
            continue
        feature[k] = f
        threshold[k] = thr
        left[k] = new_node(li)
        right[k] = new_node(ri)
        # right pushed first so the left subtree is expanded first
        stack.append((right[k], ri, depth + 1))
        stack.append((left[k], li, depth + 1))
    return Tree(
        np.asarray(feature, dtype=np.int64),
        np.asarray(threshold, dtype=float),
        np.asarray(left, dtype=np.int64),
        np.asarray(right, dtype=np.int64),
        np.asarray(value, dtype=float),
    )


@dataclass(eq=False)
class ForestModel:
    trees: list[list[Tree]]
    n_estimators: int
    max_depth: int | None
    seed: int
    min_samples_leaf: int = 1
    feature_subsample: int = field(default_factory=n_candidate_features)
    threshold: float = DEFAULT_THRESHOLD

    def joint_scores(self, X: np.ndarray) -> np.ndarray:
        """Mean leaf positive fraction per joint, shape (n, 24)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.empty((X.shape[0], len(self.trees)))
        for j, ensemble in enumerate(self.trees):
            out[:, j] = np.mean([t.predict_value(X) for t in ensemble], axis=0)
        return out

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        return self.joint_scores(X) >= self.threshold

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "hyperparameters": {
                "n_estimators": self.n_estimators,
                "max_depth": self.max_depth,
                "min_samples_leaf": self.min_samples_leaf,
                "feature_subsample": self.feature_subsample,
                "threshold": self.threshold,
            },
            "seed": self.seed,
            "joints": [
                {"joint": JOINTS[j].name, "trees": [t.to_dict() for t in ensemble]}
                for j, ensemble in enumerate(self.trees)
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ForestModel":
        if d.get("format") != MODEL_FORMAT or d.get("version") != MODEL_VERSION:
            raise ParseError("not a version-1 motioncoach forest model")
        hp = d["hyperparameters"]
        trees = [[Tree.from_dict(t) for t in entry["trees"]] for entry in d["joints"]]
        return cls(
            trees,
            int(hp["n_estimators"]),
            None if hp["max_depth"] is None else int(hp["max_depth"]),
            int(d["seed"]),
            int(hp["min_samples_leaf"]),
            int(hp["feature_subsample"]),
            float(hp["threshold"]),
        )

    def dumps(self) -> str:
        # json writes floats with repr, which round-trips exactly
        return json.dumps(self.to_dict(), separators=(",", ":")) + "\n"

    @classmethod
    def loads(cls, text: str) -> "ForestModel":
        return cls.from_dict(json.loads(text))


def save_model(model: ForestModel, path: str | os.PathLike) -> None:
    Path(path).write_text(model.dumps(), encoding="utf-8")


def load_model(path: str | os.PathLike) -> ForestModel:
    try:
        return ForestModel.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise ParseError(f"unreadable model: {exc}", str(path)) from None
    except ParseError as exc:
        raise ParseError(str(exc), str(path)) from None


def tree_rng(seed: int, joint: int, tree: int) -> np.random.Generator:
    return np.random.default_rng([seed, joint, tree])


def train_forest(
    dataset,
    n_estimators: int = 5,
    max_depth: int | None = None,
    seed: int = 0,
    min_samples_leaf: int = 1,
) -> ForestModel:
    """Train 24 per-joint ensembles on the dataset's train split."""
    X = np.asarray(dataset.train_x, dtype=float)
    Y = np.asarray(dataset.train_y, dtype=bool)
    if X.shape[0] == 0:
        raise InvalidInputError("train split is empty")
    if n_estimators < 1:
        raise InvalidInputError("n_estimators must be at least 1")
    if max_depth is not None and max_depth < 1:
        raise InvalidInputError("max_depth must be positive or None")
    n = X.shape[0]
    n_cand = n_candidate_features(X.shape[1])
    trees = []
    for j in range(Y.shape[1]):
        ensemble = []
        for k in range(n_estimators):
            rng = tree_rng(seed, j, k)
            boot = rng.integers(0, n, n)
            ensemble.append(grow_tree(X[boot], Y[boot, j], rng, max_depth, n_cand, min_samples_leaf))
        trees.append(ensemble)
    return ForestModel(trees, n_estimators, max_depth, seed, min_samples_leaf, n_cand)


def predict(model: ForestModel, x) -> tuple[np.ndarray, np.ndarray]:
    """(24 booleans, 24 scores) for one feature vector."""
    xs = np.asarray(x, dtype=float).reshape(-1).tolist()
    # same reduction layout as joint_scores, so both give bitwise-equal scores
    values = np.array([[[t.value[t.leaf_of(xs)]] for t in ensemble] for ensemble in model.trees])
    scores = values.mean(axis=1)[:, 0]
    return scores >= model.threshold, scores


# ---------------------------------------------------------------- explanation


@dataclass(frozen=True)
class Condition:
    feature: int
    comparator: str
    threshold: float
    vote_count: int
    trees: tuple[int, ...]

    @property
    def joint(self) -> int:
        return self.feature // 3

    @property
    def axis(self) -> int:
        return self.feature % 3

    def holds(self, x) -> bool:
        v = x[self.feature]
        return bool(v <= self.threshold) if self.comparator == "<=" else bool(v > self.threshold)

    def to_record(self) -> dict:
        return {
            "joint": JOINTS[self.joint].name,
            "axis": AXES[self.axis],
            "comparator": self.comparator,
            "threshold": self.threshold,
            "vote_count": self.vote_count,
            "trees": list(self.trees),
        }


@dataclass(frozen=True)
class JointExplanation:
    joint: int
    score: float
    conditions: tuple[Condition, ...]

    def to_record(self) -> dict:
        return {
            "joint": JOINTS[self.joint].name,
            "score": self.score,
            "conditions": [c.to_record() for c in self.conditions],
        }


@dataclass(frozen=True)
class PathExplanation:
    """Explanations for predicted-positive joints, most confident first."""

    joints: tuple[JointExplanation, ...]

    def for_joint(self, j: int) -> JointExplanation | None:
        for e in self.joints:
            if e.joint == j:
                return e
        return None

    def to_record(self) -> list:
        return [e.to_record() for e in self.joints]


def explain(model: ForestModel, x) -> PathExplanation:
    """Merge the decision paths of every positively voting tree, per positive joint.

    Conditions on the same (feature, comparator) keep the tightest threshold
    and count one vote per tree. Each joint's conditions are ranked by votes,
    then by |x[feature]|. Joints are ranked by score, then by the largest
    magnitude among their own three features.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    positive, scores = predict(model, x)
    out = []
    for j in np.flatnonzero(positive):
        merged: dict[tuple[int, str], list] = {}
        for k, tree in enumerate(model.trees[j]):
            conds, leaf = tree.decision_path(x)
            if tree.value[leaf] < model.threshold:
                continue
            seen = set()
            for f, comp, thr in conds:
                key = (f, comp)
                entry = merged.setdefault(key, [thr, []])
                # tightest bound: smallest upper bound, largest lower bound
                entry[0] = min(entry[0], thr) if comp == "<=" else max(entry[0], thr)
                if key not in seen:
                    entry[1].append(k)
                    seen.add(key)
        conditions = [
            Condition(f, comp, thr, len(trees), tuple(trees)) for (f, comp), (thr, trees) in merged.items()
        ]
        conditions.sort(key=lambda c: (-c.vote_count, -abs(x[c.feature]), c.feature, c.comparator))
        out.append(JointExplanation(int(j), float(scores[j]), tuple(conditions)))
    # equal scores: the joint whose own deviation is largest comes first
    out.sort(key=lambda e: (-e.score, -float(np.abs(x[3 * e.joint : 3 * e.joint + 3]).max()), e.joint))
    return PathExplanation(tuple(out))


# ---------------------------------------------------------------- evaluation


def confusion(y_true: np.ndarray, y_pred: np.ndarray) -> dict:
    t = np.asarray(y_true, dtype=bool)
    p = np.asarray(y_pred, dtype=bool)
    return {
        "tp": int(np.sum(t & p)),
        "fp": int(np.sum(~t & p)),
        "fn": int(np.sum(t & ~p)),
        "tn": int(np.sum(~t & ~p)),
    }


def metrics_from_predictions(y_true: np.ndarray, y_pred: np.ndarray) -> dict:
    c = confusion(y_true, y_pred)
    tp, fp, fn = c["tp"], c["fp"], c["fn"]
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    subset = float(np.mean(np.all(np.asarray(y_true, bool) == np.asarray(y_pred, bool), axis=1)))
    return {"subset_accuracy": subset, "precision": precision, "recall": recall, "f1": f1, **c}


def evaluate(model: ForestModel, test_x: np.ndarray, test_y: np.ndarray) -> dict:
    if len(test_x) == 0:
        raise InvalidInputError("test split is empty")
    return metrics_from_predictions(test_y, model.predict_batch(test_x))


def parse_grid(spec: str) -> list[tuple[int, int | None]]:
    """``"5:none,10:none,5:3"`` -> [(5, None), (10, None), (5, 3)]."""
    grid = []
    for item in spec.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            n, d = item.split(":")
            depth = None if d.strip().lower() in ("none", "-", "") else int(d)
            grid.append((int(n), depth))
        except ValueError:
            raise InvalidInputError(f"bad grid entry {item!r}; expected N:DEPTH") from None
    if not grid:
        raise InvalidInputError("ablation grid is empty")
    return grid


def ablation(dataset, grid, seed: int = 0) -> list[dict]:
    if not grid:
        raise InvalidInputError("ablation grid is empty")
    rows = []
    for n_est, depth in grid:
        model = train_forest(dataset, n_est, depth, seed)
        m = evaluate(model, dataset.test_x, dataset.test_y)
        rows.append(
            {
                "n_estimators": n_est,
                "max_depth": depth,
                "accuracy": m["subset_accuracy"],
                "precision": m["precision"],
                "recall": m["recall"],
                "f1": m["f1"],
                "adopted": (n_est, depth) == ADOPTED_CONFIG,
            }
        )
    return rows


def format_ablation(rows: list[dict]) -> str:
    head = f"{'n_estimators':>12} {'max_depth':>9} {'Accuracy':>9} {'Precision':>9} {'Recall':>9} {'F1-score':>9}"
    lines = [head]
    for r in rows:
        depth = "--" if r["max_depth"] is None else str(r["max_depth"])
        tag = "  (adopted)" if r["adopted"] else ""
        lines.append(
            f"{r['n_estimators']:>12} {depth:>9} {r['accuracy']:>9.4f} {r['precision']:>9.4f}"
            f" {r['recall']:>9.4f} {r['f1']:>9.4f}{tag}"
        )
    return "\n".join(lines)
