"""Random survival forest: log-rank splitting, Nelson-Aalen leaves."""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .survival import DEFAULT_EPSILON, ChfCurve, Dataset, TimeGrid, _nelson_aalen_values, build_time_grid


@dataclass(frozen=True)
class RsfParams:
    n_trees: int = 100
    min_leaf_size: int = 3
    features_per_split: int | None = None  # None -> ceil(sqrt(d))
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be positive")
        if self.min_leaf_size < 1:
            raise ValueError("min_leaf_size must be positive")
        if self.features_per_split is not None and self.features_per_split < 1:
            raise ValueError("features_per_split must be positive")

    def resolved_features(self, d: int) -> int:
        k = self.features_per_split or math.ceil(math.sqrt(d))
        if k > d:
            raise ValueError(f"features_per_split={k} exceeds d={d}")
        return k


def logrank_statistic(times, events, left_mask) -> float:
    """Absolute standardized two-sample log-rank statistic (0 if undefined)."""
    times = np.asarray(times, dtype=float)
    events = np.asarray(events, dtype=bool)
    left = np.asarray(left_mask, dtype=bool)
    u = np.unique(times[events])
    at_risk = times[:, None] >= u[None, :]
    died = (times[:, None] == u[None, :]) & events[:, None]
    return float(_logrank_from_counts(
        at_risk[left].sum(0)[None], died[left].sum(0)[None], at_risk.sum(0), died.sum(0)
    )[0])


def _logrank_from_counts(y_left, d_left, y, d):
    """Vectorized log-rank over candidate splits (rows) and event times (cols)."""
    frac = y_left / y
    num = (d_left - frac * d).sum(axis=1)
    # hypergeometric variance factor per event time; 0 where only one is at risk
    c = np.where(y > 1, d * (y - d) / np.maximum(y - 1, 1), 0.0)
    var = (frac * (1 - frac)) @ c
    stat = np.zeros(num.shape)
    ok = var > 0
    stat[ok] = np.abs(num[ok]) / np.sqrt(var[ok])
    return stat


def best_split(X, times, events, features, min_leaf_size):
    """Best (statistic, feature, threshold) over the candidate features, or None."""
    n = times.size
    if n < 2 * min_leaf_size or not events.any():
        return None
    u = np.unique(times[events])
    at_risk = (times[:, None] >= u[None, :]).astype(float)
    died = ((times[:, None] == u[None, :]) & events[:, None]).astype(float)
    y, d = at_risk.sum(0), died.sum(0)
    best = None
    for f in features:
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        # split after position k-1: left = first k samples
        k = np.arange(min_leaf_size, n - min_leaf_size + 1)
        k = k[xs[k - 1] < xs[np.minimum(k, n - 1)]]
        if k.size == 0:
            continue
        y_left = np.cumsum(at_risk[order], axis=0)[k - 1]
        d_left = np.cumsum(died[order], axis=0)[k - 1]
        stat = _logrank_from_counts(y_left, d_left, y, d)
        i = int(np.argmax(stat))
        if stat[i] > 0 and (best is None or stat[i] > best[0]):
            best = (float(stat[i]), int(f), float(0.5 * (xs[k[i] - 1] + xs[k[i]])))
    return best


@dataclass(frozen=True, eq=False)
class SurvivalTree:
    """Flat binary tree; ``feature[i] == -1`` marks a leaf.

    ``leaf_values[i]`` is the Nelson-Aalen curve of node i's samples (leaves only).
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_values: np.ndarray
    leaf_size: np.ndarray

    def apply(self, X) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=int)
        active = self.feature[node] >= 0
        while active.any():
            rows = np.nonzero(active)[0]
            nd = node[rows]
            go_left = X[rows, self.feature[nd]] <= self.threshold[nd]
            node[rows] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] >= 0
        return node

    def predict_values(self, X) -> np.ndarray:
        return self.leaf_values[self.apply(X)]

    def to_json(self, i: int = 0) -> dict:
        if self.feature[i] < 0:
            return {"leaf": self.leaf_values[i].tolist(), "size": int(self.leaf_size[i])}
        return {
            "feature": int(self.feature[i]),
            "threshold": float(self.threshold[i]),
            "left": self.to_json(int(self.left[i])),
            "right": self.to_json(int(self.right[i])),
        }

    @classmethod
    def from_json(cls, doc: dict, m: int) -> SurvivalTree:
        nodes = []

        def visit(node):
            i = len(nodes)
            nodes.append(None)
            if "leaf" in node:
                nodes[i] = (-1, np.nan, -1, -1, node["leaf"], node.get("size", 0))
            else:
                li = visit(node["left"])
                ri = visit(node["right"])
                nodes[i] = (node["feature"], node["threshold"], li, ri, [np.nan] * m, 0)
            return i

        visit(doc)
        f, t, l, r, v, s = zip(*nodes)
        return cls(np.array(f), np.array(t, dtype=float), np.array(l), np.array(r),
                   np.array(v, dtype=float), np.array(s))


def grow_tree(dataset: Dataset, grid: TimeGrid, params: RsfParams, rng: np.random.Generator,
              epsilon: float = DEFAULT_EPSILON) -> SurvivalTree:
    n, d = dataset.n, dataset.d
    idx = rng.integers(0, n, size=n) if params.bootstrap else np.arange(n)
    X, T, E = dataset.features[idx], dataset.times[idx], dataset.events[idx]
    k = params.resolved_features(d)
    feature, threshold, left, right, values, sizes = [], [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(np.nan)
        left.append(-1)
        right.append(-1)
        values.append(None)
        sizes.append(0)
        return len(feature) - 1

    root = new_node()
    stack = [(root, np.arange(n))]
    while stack:
        node, rows = stack.pop()
        feats = rng.choice(d, size=k, replace=False)
        split = best_split(X[rows], T[rows], E[rows], feats, params.min_leaf_size)
        if split is None:
            values[node] = np.maximum(_nelson_aalen_values(T[rows], E[rows], grid), epsilon)
            sizes[node] = rows.size
            continue
        _, f, thr = split
        go_left = X[rows, f] <= thr
        li, ri = new_node(), new_node()
        feature[node], threshold[node], left[node], right[node] = f, thr, li, ri
        stack.append((ri, rows[~go_left]))
        stack.append((li, rows[go_left]))
    m = grid.size
    leaf_values = np.array([v if v is not None else np.full(m, np.nan) for v in values])
    return SurvivalTree(np.array(feature), np.array(threshold, dtype=float), np.array(left),
                        np.array(right), leaf_values, np.array(sizes))


@dataclass(frozen=True, eq=False)
class RsfModel:
    trees: tuple[SurvivalTree, ...]
    grid: TimeGrid
    d: int
    params: RsfParams
    training_data: Dataset | None = None
    epsilon: float = DEFAULT_EPSILON

    @property
    def training_size(self) -> int:
        return self.training_data.n if self.training_data is not None else 0

    def predict_values(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.d:
            raise ValueError(f"expected {self.d} features, got {X.shape[1]}")
        leaves = np.ascontiguousarray(np.stack([tree.apply(X) for tree in self.trees], axis=1))
        # nearby points share most leaves; sum each distinct leaf pattern once
        rows = leaves.view(np.dtype((np.void, leaves.dtype.itemsize * leaves.shape[1]))).reshape(-1)
        _, first, inverse = np.unique(rows, return_index=True, return_inverse=True)
        patterns = leaves[first]
        total = np.zeros((patterns.shape[0], self.grid.size))
        for t, tree in enumerate(self.trees):
            total += tree.leaf_values[patterns[:, t]]
        return np.maximum(total[inverse.reshape(-1)] / len(self.trees), self.epsilon)

    def predict_chf(self, x) -> ChfCurve:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d,):
            raise ValueError(f"expected a feature vector of length {self.d}, got shape {x.shape}")
        return ChfCurve(self.grid, self.predict_values(x)[0])

    def risk_scores(self, X) -> np.ndarray:
        """Sum of the predicted CHF over the grid (ensemble mortality)."""
        return self.predict_values(X).sum(axis=1)

    def to_json(self) -> dict:
        return {
            "grid": self.grid.event_times.tolist(),
            "horizon_pad": self.grid.horizon_pad,
            "d": self.d,
            "params": {
                "n_trees": self.params.n_trees,
                "min_leaf_size": self.params.min_leaf_size,
                "features_per_split": self.params.features_per_split,
                "bootstrap": self.params.bootstrap,
                "seed": self.params.seed,
            },
            "trees": [t.to_json() for t in self.trees],
        }

    @classmethod
    def from_json(cls, doc: dict, epsilon: float = DEFAULT_EPSILON) -> RsfModel:
        grid = TimeGrid(doc["grid"], doc["horizon_pad"])
        trees = tuple(SurvivalTree.from_json(t, grid.size) for t in doc["trees"])
        return cls(trees, grid, int(doc["d"]), RsfParams(**doc["params"]), epsilon=epsilon)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path) -> RsfModel:
        return cls.from_json(json.loads(Path(path).read_text()))


def tree_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for tree ``index``; adding trees leaves earlier ones unchanged."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def fit_rsf(dataset: Dataset, params: RsfParams = RsfParams(), epsilon: float = DEFAULT_EPSILON,
            grid: TimeGrid | None = None, n_jobs: int = 1) -> RsfModel:
    if not dataset.events.any():
        raise ValueError("no event times: every sample is censored")
    params.resolved_features(dataset.d)
    if grid is None:
        grid = build_time_grid(dataset)

    def grow(i):
        return grow_tree(dataset, grid, params, tree_rng(params.seed, i), epsilon)

    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            trees = tuple(pool.map(grow, range(params.n_trees)))
    else:
        trees = tuple(grow(i) for i in range(params.n_trees))
    return RsfModel(trees, grid, dataset.d, params, training_data=dataset, epsilon=epsilon)
