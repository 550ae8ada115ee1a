"""Random forest, kNN, multinomial logistic regression and LDA with grid search.

All four share one interface: ``train(spec, X, y)`` returns a
``TrainedModel`` and ``predict_proba(model, X)`` a row-stochastic matrix
with columns in ``model.classes`` order.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp, softmax

from ._kernels import apply_tree, build_tree

KINDS = ("random_forest", "knn", "logistic", "lda")


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str = "random_forest"
    n_estimators: int = 100
    max_depth: Optional[int] = None
    k: int = 5
    l2: float = 1e-3
    shrinkage: float = 1e-6
    seed: Optional[int] = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown classifier kind {self.kind!r}; choose from {KINDS}")
        if self.kind == "random_forest":
            if self.seed is None:
                raise ValueError("random_forest needs a seed")
            if self.n_estimators < 1:
                raise ValueError("n_estimators must be >= 1")
            if self.max_depth is not None and self.max_depth < 1:
                raise ValueError("max_depth must be >= 1 or None")
        if self.kind == "knn" and self.k < 1:
            raise ValueError("k must be >= 1")
        if self.l2 < 0 or self.shrinkage < 0:
            raise ValueError("regularisation must be non-negative")

    def to_json(self) -> dict:
        return {"kind": self.kind, "n_estimators": self.n_estimators, "max_depth": self.max_depth,
                "k": self.k, "l2": self.l2, "shrinkage": self.shrinkage, "seed": self.seed}

    @classmethod
    def from_json(cls, d: dict) -> "ClassifierSpec":
        return cls(**d)


def default_grid(seed: int = 0) -> list[ClassifierSpec]:
    return [ClassifierSpec("random_forest", n, d, seed=seed)
            for n in (100, 300) for d in (4, 8, None)]


@dataclass(frozen=True, eq=False)
class TrainedModel:
    kind: str
    classes: tuple
    params: dict
    spec: ClassifierSpec
    schema: tuple = ()
    n_features: int = 0

    def to_json(self) -> dict:
        def enc(v):
            if isinstance(v, np.ndarray):
                return {"dtype": str(v.dtype), "shape": list(v.shape), "data": v.ravel().tolist()}
            if isinstance(v, list):
                return [enc(x) for x in v]
            if isinstance(v, dict):
                return {k: enc(x) for k, x in v.items()}
            return v
        return {"kind": self.kind, "classes": [c if isinstance(c, str) else int(c) for c in self.classes],
                "spec": self.spec.to_json(), "schema": list(self.schema),
                "n_features": self.n_features, "params": enc(self.params)}

    @classmethod
    def from_json(cls, d: dict) -> "TrainedModel":
        def dec(v):
            if isinstance(v, dict) and set(v) == {"dtype", "shape", "data"}:
                return np.asarray(v["data"], dtype=v["dtype"]).reshape(v["shape"])
            if isinstance(v, list):
                return [dec(x) for x in v]
            if isinstance(v, dict):
                return {k: dec(x) for k, x in v.items()}
            return v
        return cls(d["kind"], tuple(d["classes"]), dec(d["params"]),
                   ClassifierSpec.from_json(d["spec"]), tuple(d["schema"]), d["n_features"])

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_json()) + "\n")
        return path

    @classmethod
    def load(cls, path) -> "TrainedModel":
        return cls.from_json(json.loads(Path(path).read_text()))


def _encode(y):
    y = np.asarray(y)
    classes, codes = np.unique(y, return_inverse=True)
    if classes.size < 2:
        raise ValueError(f"need at least two classes, got {classes.tolist()}")
    counts = np.bincount(codes)
    if counts.min() < 2:
        raise ValueError(f"every class needs >= 2 samples, got counts {counts.tolist()}")
    return tuple(classes.tolist()), codes.astype(np.int64)


def _canonical_rows(X: np.ndarray, codes: np.ndarray) -> np.ndarray:
    # lexicographic on (X[:, 0], X[:, 1], ..., label): row order of the input no longer matters
    return np.lexsort(np.vstack([codes[None, :], X.T[::-1]]))


def _fit_forest(spec: ClassifierSpec, X, codes, K):
    order = _canonical_rows(X, codes)
    X = np.ascontiguousarray(X[order])
    codes = np.ascontiguousarray(codes[order])
    n, d = X.shape
    mtry = max(1, int(math.sqrt(d)))
    depth = -1 if spec.max_depth is None else int(spec.max_depth)
    trees = []
    for t in range(spec.n_estimators):
        rng = np.random.default_rng(np.random.SeedSequence([int(spec.seed), t]))
        sample = rng.integers(0, n, n)
        split_seed = int(rng.integers(0, 2**63 - 1))
        f, thr, left, right, counts = build_tree(X, codes, sample, K, depth, mtry, split_seed)
        trees.append({"feature": f, "threshold": thr, "left": left, "right": right, "counts": counts})
    return {"trees": trees}


def _forest_proba(params, X, K):
    X = np.ascontiguousarray(X, dtype=np.float64)
    votes = np.zeros((X.shape[0], K))
    rows = np.arange(X.shape[0])
    for tr in params["trees"]:
        leaf = apply_tree(X, tr["feature"], tr["threshold"], tr["left"], tr["right"])
        votes[rows, np.argmax(tr["counts"][leaf], axis=1)] += 1
    return votes / len(params["trees"])


def _design(X):
    return np.hstack([np.ones((X.shape[0], 1)), X])


def _fit_logistic(spec, X, codes, K, tol=1e-8, max_iter=100):
    """Multinomial logistic with the last class as reference, Newton steps.

    Minimises -sum log p(y|x) + l2/2 * ||W||² (intercepts unpenalised) until
    the gradient norm drops below ``tol``.
    """
    A = _design(X)
    n, p = A.shape
    m = K - 1
    Y = np.zeros((n, m))
    hit = codes < m
    Y[np.flatnonzero(hit), codes[hit]] = 1.0
    pen = np.full(p, spec.l2)
    pen[0] = 0.0
    pen_vec = np.tile(pen, m)  # layout: class-major blocks of p

    def objective(W):
        Z = np.hstack([A @ W, np.zeros((n, 1))])
        ll = np.sum(Z[np.arange(n), codes] - logsumexp(Z, axis=1))
        return -ll + 0.5 * np.sum(pen[:, None] * W**2)

    W = np.zeros((p, m))
    converged = False
    for _ in range(max_iter):
        P = softmax(np.hstack([A @ W, np.zeros((n, 1))]), axis=1)[:, :m]
        G = A.T @ (P - Y) + pen[:, None] * W
        g = G.T.ravel()
        if np.linalg.norm(g) < tol:
            converged = True
            break
        H = np.empty((m * p, m * p))
        for a in range(m):
            for b in range(a, m):
                w = P[:, a] * ((a == b) - P[:, b])
                blk = (A * w[:, None]).T @ A
                H[a * p:(a + 1) * p, b * p:(b + 1) * p] = blk
                H[b * p:(b + 1) * p, a * p:(a + 1) * p] = blk
        H[np.diag_indices_from(H)] += pen_vec + 1e-12
        step = np.linalg.solve(H, g).reshape(m, p).T
        f0 = objective(W)
        t = 1.0
        while t > 1e-10 and objective(W - t * step) > f0:
            t *= 0.5
        W = W - t * step
    if not converged:
        warnings.warn("logistic regression did not reach the gradient tolerance", RuntimeWarning)
    return {"W": W}


def _logistic_proba(params, X):
    A = _design(np.asarray(X, float))
    Z = np.hstack([A @ params["W"], np.zeros((A.shape[0], 1))])
    return softmax(Z, axis=1)


def _fit_lda(spec, X, codes, K):
    n, d = X.shape
    means = np.stack([X[codes == c].mean(axis=0) for c in range(K)])
    R = X - means[codes]
    S = R.T @ R / max(n - K, 1)
    S += spec.shrinkage * np.trace(S) / d * np.eye(d) if np.trace(S) > 0 else spec.shrinkage * np.eye(d)
    prior = np.bincount(codes, minlength=K) / n
    coef = np.linalg.solve(S, means.T).T          # (K, d)
    intercept = -0.5 * np.sum(coef * means, axis=1) + np.log(prior)
    return {"coef": coef, "intercept": intercept, "means": means}


def _lda_proba(params, X):
    return softmax(np.asarray(X, float) @ params["coef"].T + params["intercept"], axis=1)


def _knn_proba(params, X, K, k):
    Xtr, codes = params["X"], params["y"]
    X = np.asarray(X, float)
    d2 = (np.sum(X**2, 1)[:, None] - 2 * X @ Xtr.T + np.sum(Xtr**2, 1)[None, :])
    k = min(k, Xtr.shape[0])
    nn = np.argsort(d2, axis=1, kind="stable")[:, :k]
    out = np.zeros((X.shape[0], K))
    for c in range(K):
        out[:, c] = np.sum(codes[nn] == c, axis=1)
    return out / k


def train(spec: ClassifierSpec, X, y, schema: Sequence[str] = ()) -> TrainedModel:
    X = np.asarray(X, float)
    if X.ndim != 2 or X.shape[0] != len(y):
        raise ValueError(f"X of shape {X.shape} does not match {len(y)} labels")
    if schema and len(schema) != X.shape[1]:
        raise ValueError(f"schema names {len(schema)} features, X has {X.shape[1]}")
    classes, codes = _encode(y)
    K = len(classes)
    if spec.kind == "random_forest":
        params = _fit_forest(spec, X, codes, K)
    elif spec.kind == "logistic":
        params = _fit_logistic(spec, X, codes, K)
    elif spec.kind == "lda":
        params = _fit_lda(spec, X, codes, K)
    else:
        params = {"X": X.copy(), "y": codes}
    return TrainedModel(spec.kind, classes, params, spec, tuple(schema), X.shape[1])


def predict_proba(model: TrainedModel, X, schema: Sequence[str] = ()) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, float))
    if X.shape[1] != model.n_features:
        raise ValueError(f"model expects {model.n_features} features, got {X.shape[1]}")
    if schema and model.schema and tuple(schema) != model.schema:
        raise ValueError("feature schema differs from the one the model was trained on")
    K = len(model.classes)
    if model.kind == "random_forest":
        return _forest_proba(model.params, X, K)
    if model.kind == "logistic":
        return _logistic_proba(model.params, X)
    if model.kind == "lda":
        return _lda_proba(model.params, X)
    return _knn_proba(model.params, X, K, model.spec.k)


def predict(model: TrainedModel, X) -> np.ndarray:
    return np.asarray(model.classes)[np.argmax(predict_proba(model, X), axis=1)]


@dataclass
class GridResult:
    best: ClassifierSpec
    best_score: float
    table: list = field(default_factory=list)   # dicts: spec, mean_auc, fold_aucs, skipped


def _tie_key(spec: ClassifierSpec, score: float):
    depth = math.inf if spec.max_depth is None else spec.max_depth
    return (-score, depth, spec.n_estimators)


def grid_search(grid: Sequence[ClassifierSpec], X, y, folds) -> GridResult:
    """Exhaustive search by mean fold AUC.

    ``folds`` is a sequence of ``(train_idx, test_idx)``.  A fold whose
    training or test part holds a single class is skipped with a warning.
    Ties go to the smaller ``max_depth``, then the smaller ``n_estimators``.
    """
    from .evaluate import score_auc

    if not grid:
        raise ValueError("empty grid")
    X = np.asarray(X, float)
    y = np.asarray(y)
    usable = []
    for i, (tr, te) in enumerate(folds):
        if np.unique(y[tr]).size < 2 or np.unique(y[te]).size < np.unique(y).size:
            warnings.warn(f"fold {i} skipped: a class is missing from its train or test part")
            continue
        usable.append((tr, te))
    if not usable:
        raise ValueError("every fold was skipped; no score can be computed")
    table = []
    for spec in grid:
        aucs = [score_auc(train(spec, X[tr], y[tr]), X[te], y[te]) for tr, te in usable]
        table.append({"spec": spec, "mean_auc": float(np.mean(aucs)), "fold_aucs": aucs,
                      "skipped": len(folds) - len(usable)})
    best = min(table, key=lambda r: _tie_key(r["spec"], r["mean_auc"]))
    return GridResult(best["spec"], best["mean_auc"], table)
