"""Kernel SVM and random-forest readouts over reservoir states.

Both classifiers take row-wise samples ``X`` of shape ``(S, F)`` and integer
labels ``0..C-1``.

The SVM is a one-vs-one ensemble of binary RBF machines trained by SMO with
maximal-violating-pair working-set selection. The forest is a bagged set of
CART trees with Gini splits over a random ``sqrt(F)`` feature subset at every
node, grown to purity.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, ShapeError, TrainingError

__all__ = [
    "SvmConfig",
    "BinarySvm",
    "SvmModel",
    "rbf_kernel",
    "scale_gamma",
    "smo_binary",
    "svm_fit",
    "svm_predict",
    "ForestConfig",
    "Tree",
    "ForestModel",
    "fit_tree",
    "forest_fit",
    "forest_predict",
]

_TAU = 1e-12


# ---------------------------------------------------------------------------
# SVM


@dataclass(frozen=True)
class SvmConfig:
    c: float = 10.0
    gamma: float | str = "scale"
    tolerance: float = 1e-3
    max_passes: int = 1000

    def __post_init__(self):
        if not self.c > 0:
            raise ParameterError(f"SVM C must be > 0, got {self.c}")
        if self.gamma != "scale" and not (isinstance(self.gamma, (int, float)) and self.gamma > 0):
            raise ParameterError(f"gamma must be 'scale' or a positive number, got {self.gamma!r}")
        if not self.tolerance > 0:
            raise ParameterError(f"tolerance must be > 0, got {self.tolerance}")


def scale_gamma(x: np.ndarray) -> float:
    """``1 / (F * var(X))`` over all training feature values."""
    var = float(np.var(x))
    if var == 0.0:
        raise ParameterError("features have zero variance; set a fixed gamma instead of 'scale'")
    return 1.0 / (x.shape[1] * var)


def rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    sq = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * (a @ b.T)
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


def smo_binary(k: np.ndarray, y: np.ndarray, c: float, tol: float = 1e-3,
               max_iter: int | None = None) -> tuple[np.ndarray, float, int]:
    """Solve the binary soft-margin dual by SMO.

    Minimizes ``0.5 a^T Q a - sum(a)`` with ``Q = (y y^T) * K`` subject to
    ``0 <= a <= c`` and ``y^T a = 0``.

    Returns ``(alpha, b, iterations)``; the decision function is
    ``f(x) = sum_i alpha_i y_i K(x_i, x) + b``.
    """
    n = y.size
    y = y.astype(np.float64)
    q = k * np.outer(y, y)
    alpha = np.zeros(n)
    grad = -np.ones(n)
    if max_iter is None:
        max_iter = max(10_000_000, 100 * n)
    it = 0
    while it < max_iter:
        yg = -y * grad
        up = ((y > 0) & (alpha < c)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < c))
        if not up.any() or not low.any():
            break
        i = int(np.flatnonzero(up)[np.argmax(yg[up])])
        j = int(np.flatnonzero(low)[np.argmin(yg[low])])
        if yg[i] - yg[j] < tol:
            break
        it += 1
        ai, aj = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = max(q[i, i] + q[j, j] + 2.0 * q[i, j], _TAU)
            delta = (-grad[i] - grad[j]) / quad
            diff = ai - aj
            ni, nj = ai + delta, aj + delta
            if diff > 0:
                if nj < 0:
                    nj, ni = 0.0, diff
            elif ni < 0:
                ni, nj = 0.0, -diff
            if diff > 0:
                if ni > c:
                    ni, nj = c, c - diff
            elif nj > c:
                nj, ni = c, c + diff
        else:
            quad = max(q[i, i] + q[j, j] - 2.0 * q[i, j], _TAU)
            delta = (grad[i] - grad[j]) / quad
            total = ai + aj
            ni, nj = ai - delta, aj + delta
            if total > c:
                if ni > c:
                    ni, nj = c, total - c
            elif nj < 0:
                nj, ni = 0.0, total
            if total > c:
                if nj > c:
                    nj, ni = c, total - c
            elif ni < 0:
                ni, nj = 0.0, total
        grad += q[:, i] * (ni - ai) + q[:, j] * (nj - aj)
        alpha[i], alpha[j] = ni, nj
    return alpha, _bias(y, grad, alpha, c), it


def _bias(y, grad, alpha, c) -> float:
    yg = y * grad
    at_upper = alpha >= c
    at_lower = alpha <= 0
    free = ~(at_upper | at_lower)
    if free.any():
        return float(-yg[free].mean())
    ub_set = (at_upper & (y < 0)) | (at_lower & (y > 0))
    lb_set = (at_upper & (y > 0)) | (at_lower & (y < 0))
    ub = yg[ub_set].min() if ub_set.any() else np.inf
    lb = yg[lb_set].max() if lb_set.any() else -np.inf
    return float(-(ub + lb) / 2.0)


@dataclass(frozen=True, eq=False)
class BinarySvm:
    """Class ``pos`` vs class ``neg``; positive decision votes for ``pos``."""

    pos: int
    neg: int
    support: np.ndarray  # indices into SvmModel.vectors
    coef: np.ndarray  # alpha_i * y_i for each support vector
    bias: float
    alpha: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    iterations: int = 0


@dataclass(frozen=True, eq=False)
class SvmModel:
    vectors: np.ndarray  # union of all support vectors, (V, F)
    machines: tuple[BinarySvm, ...]
    gamma: float
    c: float
    n_classes: int

    @property
    def n_features(self) -> int:
        return self.vectors.shape[1]

    def pair_decisions(self, x) -> np.ndarray:
        """Decision values, one column per machine, shape ``(S, P)``."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.n_features:
            raise ShapeError(f"SVM expects {self.n_features} features, got {x.shape[1]}")
        k = rbf_kernel(self.vectors, x, self.gamma) if len(self.vectors) else np.zeros((0, len(x)))
        out = np.empty((x.shape[0], len(self.machines)))
        for p, m in enumerate(self.machines):
            out[:, p] = m.coef @ k[m.support] + m.bias
        return out

    def decision(self, x) -> np.ndarray:
        """``(S, C)`` scores: vote count plus a sub-unit tie-break term.

        The tie-break term is the summed ``|decision|`` of the votes a class
        won, scaled into ``[0, 1)`` per row, so ``argmax`` equals :meth:`predict`.
        """
        votes, margin = self._votes(x)
        return votes + margin / (margin.max(axis=1, keepdims=True) + 1.0)

    def _votes(self, x):
        d = self.pair_decisions(x)
        s = d.shape[0]
        votes = np.zeros((s, self.n_classes))
        margin = np.zeros((s, self.n_classes))
        rows = np.arange(s)
        for p, m in enumerate(self.machines):
            win = np.where(d[:, p] > 0, m.pos, m.neg)
            votes[rows, win] += 1
            margin[rows, win] += np.abs(d[:, p])
        return votes, margin

    def predict(self, x) -> np.ndarray:
        votes, margin = self._votes(x)
        out = np.empty(votes.shape[0], dtype=np.int64)
        for i in range(votes.shape[0]):
            top = np.flatnonzero(votes[i] == votes[i].max())
            if top.size > 1:
                best = margin[i, top].max()
                top = top[margin[i, top] == best]
            out[i] = top[0]
        return out


def svm_fit(x, labels, cfg: SvmConfig = SvmConfig(), n_classes: int | None = None) -> SvmModel:
    """One-vs-one RBF SVM."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    labels = np.asarray(labels, dtype=np.int64)
    if x.shape[0] != labels.size:
        raise ShapeError(f"{x.shape[0]} samples but {labels.size} labels")
    if n_classes is None:
        n_classes = int(labels.max()) + 1 if labels.size else 0
    present = np.unique(labels)
    if present.size < 2:
        raise TrainingError("SVM training needs at least two classes")
    gamma = scale_gamma(x) if cfg.gamma == "scale" else float(cfg.gamma)

    raw = []
    for a, b in itertools.combinations(present.tolist(), 2):
        idx = np.flatnonzero((labels == a) | (labels == b))
        y = np.where(labels[idx] == a, 1.0, -1.0)
        k = rbf_kernel(x[idx], x[idx], gamma)
        alpha, bias, iters = smo_binary(k, y, cfg.c, cfg.tolerance,
                                        max_iter=cfg.max_passes * idx.size)
        raw.append((a, b, idx, alpha, y, bias, iters))

    used = np.unique(np.concatenate([idx[alpha > 0] for _, _, idx, alpha, *_ in raw]))
    position = {int(g): p for p, g in enumerate(used)}
    machines = []
    for a, b, idx, alpha, y, bias, iters in raw:
        sv = alpha > 0
        support = np.array([position[int(g)] for g in idx[sv]], dtype=np.int64)
        machines.append(BinarySvm(a, b, support, alpha[sv] * y[sv], bias, alpha, y, iters))
    return SvmModel(x[used].copy(), tuple(machines), gamma, float(cfg.c), int(n_classes))


def svm_predict(m: SvmModel, r) -> int:
    return int(m.predict(np.asarray(r, dtype=np.float64).reshape(1, -1))[0])


# ---------------------------------------------------------------------------
# Random forest


@dataclass(frozen=True)
class ForestConfig:
    trees: int = 300
    max_features: str | int = "sqrt"
    min_samples_leaf: int = 1
    seed: int = 0

    def __post_init__(self):
        if int(self.trees) < 1:
            raise ParameterError(f"forest needs at least one tree, got {self.trees}")
        if int(self.min_samples_leaf) < 1:
            raise ParameterError("min_samples_leaf must be >= 1")

    def features_per_split(self, n_features: int) -> int:
        if self.max_features == "sqrt":
            return max(1, int(np.sqrt(n_features)))
        if self.max_features in ("all", None):
            return n_features
        return max(1, min(n_features, int(self.max_features)))


@dataclass(frozen=True, eq=False)
class Tree:
    """Flat binary tree. Leaves have ``feature == -1``."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray  # (nodes, C) training class counts per node

    @property
    def node_count(self) -> int:
        return self.feature.size

    def apply(self, x: np.ndarray) -> np.ndarray:
        node = np.zeros(x.shape[0], dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            rows = np.flatnonzero(active)
            n = node[rows]
            go_left = x[rows, self.feature[n]] <= self.threshold[n]
            node[rows] = np.where(go_left, self.left[n], self.right[n])
            active[rows] = self.feature[node[rows]] >= 0
        return node

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.counts[self.apply(x)], axis=1)


def _best_split(x, y1h, idx, feats, msl):
    """Best Gini split of ``idx`` over the given features, or ``None``.

    All candidate features are scored at once: sort each column, take
    cumulative class counts, and maximize ``sum(l^2)/n_l + sum(r^2)/n_r``,
    which is equivalent to minimizing the size-weighted Gini impurity.
    """
    n = idx.size
    if len(feats) == 0:
        return None
    xs = x[np.ix_(idx, feats)]
    order = np.argsort(xs, axis=0, kind="stable")
    xs = np.take_along_axis(xs, order, axis=0)
    valid = xs[1:] > xs[:-1]
    if msl > 1:
        ks = np.arange(1, n)
        valid &= ((ks >= msl) & (n - ks >= msl))[:, None]
    if not valid.any():
        return None
    cum = np.cumsum(y1h[idx][order], axis=0)[:-1]  # (n-1, m, C)
    total = y1h[idx].sum(0)
    right = total - cum
    ks = np.arange(1, n, dtype=np.float64)[:, None]
    score = (cum * cum).sum(2) / ks + (right * right).sum(2) / (n - ks)
    score[~valid] = -np.inf
    flat = int(np.argmax(score.T))  # feature-major: earliest feature wins ties
    f, k = divmod(flat, n - 1)
    return int(feats[f]), 0.5 * (xs[k, f] + xs[k + 1, f])


def fit_tree(x: np.ndarray, labels: np.ndarray, n_classes: int, rng: np.random.Generator,
             max_features: int, min_samples_leaf: int = 1, sample=None) -> Tree:
    n_feat = x.shape[1]
    y1h = np.eye(n_classes)[labels]
    sample = np.arange(labels.size) if sample is None else np.asarray(sample)
    feature, threshold, left, right, counts = [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append(y1h[idx].sum(0))
        return len(feature) - 1

    stack = [(new_node(sample), sample)]
    while stack:
        node, idx = stack.pop()
        c = counts[node]
        if idx.size < 2 * min_samples_leaf or np.count_nonzero(c) <= 1:
            continue
        perm = rng.permutation(n_feat)
        split = _best_split(x, y1h, idx, perm[:max_features], min_samples_leaf)
        if split is None and max_features < n_feat:
            split = _best_split(x, y1h, idx, perm[max_features:], min_samples_leaf)
        if split is None:
            continue
        f, thr = split
        mask = x[idx, f] <= thr
        li, ri = idx[mask], idx[~mask]
        feature[node], threshold[node] = f, thr
        left[node] = new_node(li)
        right[node] = new_node(ri)
        stack.append((right[node], ri))
        stack.append((left[node], li))
    return Tree(np.array(feature, dtype=np.int64), np.array(threshold),
                np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
                np.array(counts))


@dataclass(frozen=True, eq=False)
class ForestModel:
    trees: tuple[Tree, ...]
    n_classes: int
    n_features: int
    oob_score: float = float("nan")

    def votes(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.n_features:
            raise ShapeError(f"forest expects {self.n_features} features, got {x.shape[1]}")
        v = np.zeros((x.shape[0], self.n_classes))
        rows = np.arange(x.shape[0])
        for t in self.trees:
            v[rows, t.predict(x)] += 1
        return v

    def decision(self, x) -> np.ndarray:
        return self.votes(x)

    def predict(self, x) -> np.ndarray:
        # argmax picks the first of tied vote counts: lowest class index
        return np.argmax(self.votes(x), axis=1)


def forest_fit(x, labels, cfg: ForestConfig = ForestConfig(), n_classes: int | None = None) -> ForestModel:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        raise TrainingError("random forest needs at least one sample")
    if x.shape[0] != labels.size:
        raise ShapeError(f"{x.shape[0]} samples but {labels.size} labels")
    if n_classes is None:
        n_classes = int(labels.max()) + 1
    s = labels.size
    mf = cfg.features_per_split(x.shape[1])
    trees = []
    oob_votes = np.zeros((s, n_classes))
    for child in np.random.SeedSequence(int(cfg.seed)).spawn(int(cfg.trees)):
        rng = np.random.Generator(np.random.PCG64(child))
        boot = rng.integers(0, s, size=s)
        tree = fit_tree(x, labels, n_classes, rng, mf, cfg.min_samples_leaf, boot)
        trees.append(tree)
        out = np.ones(s, dtype=bool)
        out[boot] = False
        if out.any():
            rows = np.flatnonzero(out)
            oob_votes[rows, tree.predict(x[rows])] += 1
    seen = oob_votes.sum(1) > 0
    oob = float(np.mean(np.argmax(oob_votes[seen], 1) == labels[seen])) if seen.any() else float("nan")
    return ForestModel(tuple(trees), int(n_classes), x.shape[1], oob)


def forest_predict(m: ForestModel, r) -> int:
    return int(m.predict(np.asarray(r, dtype=np.float64).reshape(1, -1))[0])
