"""Gradient-boosted regression trees built from scratch.

Three ensemble flavors share one tree representation: a second-order booster
(per-sample gradient and hessian with closed-form leaf weights), a
first-order residual booster for regression, and a bagged Gini-tree baseline
with majority voting. Split search enumerates midpoints between consecutive
distinct sorted feature values exactly; ties between equal-gain candidates go
to the lowest feature index, then the lowest threshold, which makes every fit
deterministic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelFormatError


@dataclass(frozen=True, eq=False)
class Dataset:
    """Row-major sample matrix with one label per row."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if x.ndim != 2:
            raise ValueError("x must be a 2-D sample matrix")
        if y.shape != (x.shape[0],):
            raise ValueError("y length must match the number of rows")
        if not (np.isfinite(x).all() and np.isfinite(y).all()):
            raise ValueError("dataset contains non-finite entries")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def require_binary_labels(self):
        if not np.isin(self.y, (0.0, 1.0)).all():
            raise ValueError("labels must be 0 or 1 for classification")


@dataclass(frozen=True)
class GbmConfig:
    rounds: int = 50
    learning_rate: float = 0.3
    max_depth: int = 3
    min_samples_leaf: int = 1
    lambda_reg: float = 1.0
    gamma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.rounds < 0:
            raise ValueError("rounds must be non-negative")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must lie in (0, 1]")
        if self.max_depth < 1:
            raise ValueError("max_depth must be at least 1")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be at least 1")
        if self.lambda_reg < 0 or self.gamma < 0:
            raise ValueError("regularization weights must be non-negative")


# --- losses ------------------------------------------------------------------

class SquaredLoss:
    """L = (y - f)^2 / 2, so the gradient is f - y and the hessian is 1."""

    kind = "squared"

    @staticmethod
    def value(y, f):
        return 0.5 * (np.asarray(y) - np.asarray(f)) ** 2

    @staticmethod
    def gradient(y, f):
        return np.asarray(f, dtype=np.float64) - np.asarray(y, dtype=np.float64)

    @staticmethod
    def hessian(y, f):
        return np.ones_like(np.asarray(f, dtype=np.float64))


class LogisticLoss:
    """Binary log loss on margins: L = log(1 + e^f) - y*f with p = sigmoid(f)."""

    kind = "logistic"

    @staticmethod
    def value(y, f):
        y = np.asarray(y, dtype=np.float64)
        f = np.asarray(f, dtype=np.float64)
        return np.logaddexp(0.0, f) - y * f

    @staticmethod
    def gradient(y, f):
        return _sigmoid(np.asarray(f, dtype=np.float64)) - np.asarray(y, dtype=np.float64)

    @staticmethod
    def hessian(y, f):
        p = _sigmoid(np.asarray(f, dtype=np.float64))
        return p * (1.0 - p)


_LOSSES = {cls.kind: cls() for cls in (SquaredLoss, LogisticLoss)}


def get_loss(kind: str):
    try:
        return _LOSSES[kind]
    except KeyError:
        raise ValueError(f"unknown loss kind {kind!r}") from None


def _sigmoid(f: np.ndarray) -> np.ndarray:
    out = np.empty_like(f)
    pos = f >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-f[pos]))
    ef = np.exp(f[~pos])
    out[~pos] = ef / (1.0 + ef)
    return out


def base_score(y, loss) -> float:
    """Constant prediction minimizing the loss: the label mean for squared
    loss, the clamped log-odds for logistic."""
    y = np.asarray(y, dtype=np.float64)
    if y.size == 0:
        raise ValueError("cannot fit a base score to empty labels")
    if loss.kind == "squared":
        return float(y.mean())
    p = min(max(float(y.mean()), 1e-6), 1.0 - 1e-6)
    return math.log(p / (1.0 - p))


def grad_hess(loss, y, f) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample gradient and hessian of the loss at margin f."""
    y = np.asarray(y, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    if y.shape != f.shape:
        raise ValueError("y and f must have equal length")
    if not np.isfinite(f).all():
        raise ValueError("margins contain non-finite values")
    return loss.gradient(y, f), loss.hessian(y, f)


# --- trees -------------------------------------------------------------------

@dataclass(eq=False)
class TreeNode:
    feature: int | None = None
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    weight: float = 0.0
    gain: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.feature is None


@dataclass(eq=False)
class RegressionTree:
    """Binary tree routing rows by `x[feature] <= threshold` (left branch)."""

    root: TreeNode

    def predict_row(self, row) -> float:
        node = self.root
        while not node.is_leaf:
            node = node.left if row[node.feature] <= node.threshold else node.right
        return node.weight

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        out = np.empty(x.shape[0])
        stack = [(self.root, np.arange(x.shape[0]))]
        while stack:
            node, idx = stack.pop()
            if idx.size == 0:
                continue
            if node.is_leaf:
                out[idx] = node.weight
                continue
            goes_left = x[idx, node.feature] <= node.threshold
            stack.append((node.left, idx[goes_left]))
            stack.append((node.right, idx[~goes_left]))
        return out

    @property
    def leaf_count(self) -> int:
        return sum(1 for n in self._walk() if n.is_leaf)

    @property
    def depth(self) -> int:
        def d(node):
            return 0 if node.is_leaf else 1 + max(d(node.left), d(node.right))
        return d(self.root)

    def _walk(self):
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            if not node.is_leaf:
                stack.append(node.right)
                stack.append(node.left)


def leaf_weight(grad_sum: float, hess_sum: float, lambda_reg: float) -> float:
    """Closed-form minimizer of the per-leaf quadratic: -G / (H + lambda)."""
    denom = hess_sum + lambda_reg
    if denom == 0.0:
        return 0.0
    return float(-grad_sum / denom)


def split_gain(gl, hl, gr, hr, lambda_reg, gamma) -> float:
    """Objective decrease of splitting a leaf into two, minus the per-leaf
    penalty gamma."""
    def score(gs, hs):
        denom = hs + lambda_reg
        return 0.0 if denom == 0.0 else gs * gs / denom

    return 0.5 * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr)) - gamma


def _candidate_positions(sorted_vals: np.ndarray, min_leaf: int) -> np.ndarray:
    """Indices i such that a cut between i and i+1 separates distinct values
    and leaves min_leaf samples on each side."""
    n = sorted_vals.size
    pos = np.flatnonzero(sorted_vals[:-1] < sorted_vals[1:])
    return pos[(pos + 1 >= min_leaf) & (n - pos - 1 >= min_leaf)]


def _best_split_second_order(x, g, h, idx, cfg: GbmConfig):
    """Best (gain, feature, threshold) over all exact candidates, or None."""
    lam, gamma = cfg.lambda_reg, cfg.gamma
    g_sub, h_sub = g[idx], h[idx]
    total_g, total_h = g_sub.sum(), h_sub.sum()
    parent = 0.0 if total_h + lam == 0.0 else total_g**2 / (total_h + lam)
    best = None
    for j in range(x.shape[1]):
        vals = x[idx, j]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        pos = _candidate_positions(sv, cfg.min_samples_leaf)
        if pos.size == 0:
            continue
        cg = np.cumsum(g_sub[order])
        ch = np.cumsum(h_sub[order])
        gl, hl = cg[pos], ch[pos]
        gr, hr = total_g - gl, total_h - hl
        with np.errstate(divide="ignore", invalid="ignore"):
            gains = 0.5 * (gl**2 / (hl + lam) + gr**2 / (hr + lam) - parent) - gamma
        gains = np.where(np.isfinite(gains), gains, -np.inf)
        k = int(np.argmax(gains))
        if best is None or gains[k] > best[0]:
            threshold = float(0.5 * (sv[pos[k]] + sv[pos[k] + 1]))
            best = (float(gains[k]), j, threshold)
    return best


def build_tree_second_order(x, g, h, config: GbmConfig) -> RegressionTree:
    """Grow a tree greedily on per-sample gradients and hessians.

    Leaf weights are -sum(g) / (sum(h) + lambda_reg). The best candidate is
    kept whenever its gain is non-negative, so an exactly gradient-balanced
    node (zero root gain) can still be partitioned when depth remains.
    """
    x = np.asarray(x, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("empty input")
    if g.shape != (x.shape[0],) or h.shape != (x.shape[0],):
        raise ValueError("gradient and hessian lengths must match x rows")

    def grow(idx: np.ndarray, depth: int) -> TreeNode:
        w = leaf_weight(g[idx].sum(), h[idx].sum(), config.lambda_reg)
        if depth >= config.max_depth or idx.size < 2 * config.min_samples_leaf:
            return TreeNode(weight=w)
        found = _best_split_second_order(x, g, h, idx, config)
        if found is None or found[0] < 0.0:
            return TreeNode(weight=w)
        gain, feature, threshold = found
        goes_left = x[idx, feature] <= threshold
        return TreeNode(
            feature=feature,
            threshold=threshold,
            left=grow(idx[goes_left], depth + 1),
            right=grow(idx[~goes_left], depth + 1),
            gain=gain,
        )

    return RegressionTree(grow(np.arange(x.shape[0]), 0))


def _best_split_variance(x, t, idx, cfg: GbmConfig):
    """Best split by squared-error reduction for first-order residual trees."""
    t_sub = t[idx]
    n = idx.size
    total = t_sub.sum()
    parent = total * total / n
    best = None
    for j in range(x.shape[1]):
        vals = x[idx, j]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        pos = _candidate_positions(sv, cfg.min_samples_leaf)
        if pos.size == 0:
            continue
        cs = np.cumsum(t_sub[order])
        nl = pos + 1.0
        sl = cs[pos]
        reductions = sl**2 / nl + (total - sl) ** 2 / (n - nl) - parent
        k = int(np.argmax(reductions))
        if best is None or reductions[k] > best[0]:
            threshold = float(0.5 * (sv[pos[k]] + sv[pos[k] + 1]))
            best = (float(reductions[k]), j, threshold)
    return best


def _build_variance_tree(x, t, config: GbmConfig) -> RegressionTree:
    def grow(idx, depth):
        mean = float(t[idx].mean())
        if depth >= config.max_depth or idx.size < 2 * config.min_samples_leaf:
            return TreeNode(weight=mean)
        found = _best_split_variance(x, t, idx, config)
        if found is None or found[0] <= 0.0:
            return TreeNode(weight=mean)
        reduction, feature, threshold = found
        goes_left = x[idx, feature] <= threshold
        return TreeNode(
            feature=feature,
            threshold=threshold,
            left=grow(idx[goes_left], depth + 1),
            right=grow(idx[~goes_left], depth + 1),
            gain=reduction,
        )

    return RegressionTree(grow(np.arange(x.shape[0]), 0))


# --- boosted models ----------------------------------------------------------

@dataclass(eq=False)
class BoostedModel:
    """Additive model: margin(x) = base + learning_rate * sum of tree outputs."""

    base_score: float
    trees: list[RegressionTree] = field(default_factory=list)
    learning_rate: float = 0.3
    loss_kind: str = "logistic"
    dim: int = 0


def fit_xgboost(ds: Dataset, config: GbmConfig, loss=None) -> BoostedModel:
    """Second-order boosting: each round fits a tree to the gradient and
    hessian of the loss at the current margins."""
    loss = loss or get_loss("logistic")
    if loss.kind == "logistic":
        ds.require_binary_labels()
    f0 = base_score(ds.y, loss)
    margins = np.full(ds.n, f0)
    trees = []
    for _ in range(config.rounds):
        g, h = grad_hess(loss, ds.y, margins)
        tree = build_tree_second_order(ds.x, g, h, config)
        margins = margins + config.learning_rate * tree.predict(ds.x)
        trees.append(tree)
    return BoostedModel(f0, trees, config.learning_rate, loss.kind, ds.d)


def fit_gbm_first_order(ds: Dataset, config: GbmConfig) -> BoostedModel:
    """First-order boosting for squared loss: each stage fits a
    variance-splitting tree to the residuals of the running prediction."""
    f0 = float(ds.y.mean())
    preds = np.full(ds.n, f0)
    trees = []
    for _ in range(config.rounds):
        residuals = ds.y - preds
        tree = _build_variance_tree(ds.x, residuals, config)
        preds = preds + config.learning_rate * tree.predict(ds.x)
        trees.append(tree)
    return BoostedModel(f0, trees, config.learning_rate, "squared", ds.d)


def predict(model: BoostedModel, row) -> float:
    """Raw margin for one feature row."""
    row = np.asarray(row, dtype=np.float64)
    if row.ndim != 1 or (model.dim and row.size != model.dim):
        raise ValueError(
            f"feature row of length {row.size} does not match model dim {model.dim}"
        )
    total = model.base_score
    for tree in model.trees:
        total += model.learning_rate * tree.predict_row(row)
    return float(total)


def predict_batch(model: BoostedModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if model.dim and x.shape[1] != model.dim:
        raise ValueError(
            f"feature width {x.shape[1]} does not match model dim {model.dim}"
        )
    out = np.full(x.shape[0], model.base_score)
    for tree in model.trees:
        out += model.learning_rate * tree.predict(x)
    return out


def predict_score(model: BoostedModel, row) -> float:
    """Probability-like score: sigmoid of the margin for logistic models,
    the raw margin otherwise."""
    margin = predict(model, row)
    if model.loss_kind == "logistic":
        return float(_sigmoid(np.array([margin]))[0])
    return margin


def predict_class(model: BoostedModel, row) -> int:
    """Class decision at threshold 0.5 on the score; 0.5 counts as positive."""
    return 1 if predict_score(model, row) >= 0.5 else 0


# --- bagging baseline ----------------------------------------------------------

def _gini_counts(ones: float, total: float) -> float:
    if total == 0:
        return 0.0
    p1 = ones / total
    return 1.0 - p1 * p1 - (1.0 - p1) ** 2


def _best_split_gini(x, y, idx, cfg: GbmConfig):
    y_sub = y[idx]
    n = idx.size
    ones = y_sub.sum()
    parent = _gini_counts(ones, n)
    best = None
    for j in range(x.shape[1]):
        vals = x[idx, j]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        pos = _candidate_positions(sv, cfg.min_samples_leaf)
        if pos.size == 0:
            continue
        c1 = np.cumsum(y_sub[order])
        nl = pos + 1.0
        ones_l = c1[pos]
        nr = n - nl
        p1l = ones_l / nl
        p1r = (ones - ones_l) / nr
        child = (nl * (1 - p1l**2 - (1 - p1l) ** 2) + nr * (1 - p1r**2 - (1 - p1r) ** 2)) / n
        decreases = parent - child
        k = int(np.argmax(decreases))
        if best is None or decreases[k] > best[0]:
            threshold = float(0.5 * (sv[pos[k]] + sv[pos[k] + 1]))
            best = (float(decreases[k]), j, threshold)
    return best


def _build_gini_tree(x, y, config: GbmConfig) -> RegressionTree:
    def majority(idx):
        # tie resolves to class 0
        ones = y[idx].sum()
        return 1.0 if ones > idx.size - ones else 0.0

    def grow(idx, depth):
        if depth >= config.max_depth or idx.size < 2 * config.min_samples_leaf:
            return TreeNode(weight=majority(idx))
        found = _best_split_gini(x, y, idx, config)
        if found is None or found[0] <= 0.0:
            return TreeNode(weight=majority(idx))
        decrease, feature, threshold = found
        goes_left = x[idx, feature] <= threshold
        return TreeNode(
            feature=feature,
            threshold=threshold,
            left=grow(idx[goes_left], depth + 1),
            right=grow(idx[~goes_left], depth + 1),
            gain=decrease,
        )

    return RegressionTree(grow(np.arange(x.shape[0]), 0))


@dataclass(eq=False)
class BaggedEnsemble:
    trees: list[RegressionTree]


def fit_bagged_trees(ds: Dataset, n_trees: int, config: GbmConfig,
                     seed: int = 0) -> BaggedEnsemble:
    """Gini-impurity trees on bootstrap resamples of size n (with
    replacement)."""
    ds.require_binary_labels()
    if ds.n == 0:
        raise ValueError("empty dataset")
    if n_trees < 1:
        raise ValueError("need at least one tree")
    rng = np.random.default_rng(seed)
    trees = []
    for _ in range(n_trees):
        take = rng.integers(0, ds.n, size=ds.n)
        trees.append(_build_gini_tree(ds.x[take], ds.y[take], config))
    return BaggedEnsemble(trees)


def majority_vote(predictions) -> int:
    """Majority class of 0/1 votes; an exact tie resolves to 0."""
    votes = np.asarray(predictions)
    ones = int((votes == 1).sum())
    return 1 if ones > votes.size - ones else 0


def predict_bagged(ensemble: BaggedEnsemble, row) -> int:
    return majority_vote([int(t.predict_row(row)) for t in ensemble.trees])


# --- serialization -------------------------------------------------------------

_MODEL_MAGIC = "model v1"


def model_to_text(model: BoostedModel) -> str:
    """Line-oriented text: header fields, then each tree as a pre-order node
    list (`split <feature> <threshold>` / `leaf <weight>`). Floats use their
    shortest round-trip representation."""
    lines = [
        _MODEL_MAGIC,
        f"loss {model.loss_kind}",
        f"dim {model.dim}",
        f"learning_rate {float(model.learning_rate)!r}",
        f"base_score {float(model.base_score)!r}",
        f"trees {len(model.trees)}",
    ]
    for tree in model.trees:
        nodes = []

        def emit(node: TreeNode):
            if node.is_leaf:
                nodes.append(f"leaf {float(node.weight)!r}")
            else:
                nodes.append(f"split {node.feature} {float(node.threshold)!r}")
                emit(node.left)
                emit(node.right)

        emit(tree.root)
        lines.append(f"tree {len(nodes)}")
        lines.extend(nodes)
    return "\n".join(lines) + "\n"


def model_from_text(text: str) -> BoostedModel:
    lines = text.splitlines()
    if not lines or lines[0] != _MODEL_MAGIC:
        raise ModelFormatError(f"expected header {_MODEL_MAGIC!r}")

    def take(i, key):
        if i >= len(lines) or not lines[i].startswith(key + " "):
            raise ModelFormatError(f"expected `{key}` on line {i + 1}")
        return lines[i][len(key) + 1 :]

    loss_kind = take(1, "loss")
    if loss_kind not in _LOSSES:
        raise ModelFormatError(f"unknown loss kind {loss_kind!r}")
    try:
        dim = int(take(2, "dim"))
        rate = float(take(3, "learning_rate"))
        base = float(take(4, "base_score"))
        n_trees = int(take(5, "trees"))
    except ValueError as e:
        raise ModelFormatError(f"unparsable header field: {e}") from e
    pos = 6
    trees = []
    for _ in range(n_trees):
        try:
            count = int(take(pos, "tree"))
        except ValueError as e:
            raise ModelFormatError(f"unparsable tree count: {e}") from e
        pos += 1
        node_lines = lines[pos : pos + count]
        if len(node_lines) < count:
            raise ModelFormatError("truncated tree node list")
        cursor = 0

        def parse() -> TreeNode:
            nonlocal cursor
            if cursor >= len(node_lines):
                raise ModelFormatError("tree node list ends prematurely")
            parts = node_lines[cursor].split()
            cursor += 1
            try:
                if parts[0] == "leaf" and len(parts) == 2:
                    return TreeNode(weight=float(parts[1]))
                if parts[0] == "split" and len(parts) == 3:
                    feature, threshold = int(parts[1]), float(parts[2])
                    return TreeNode(
                        feature=feature, threshold=threshold,
                        left=parse(), right=parse(),
                    )
            except ValueError as e:
                raise ModelFormatError(f"unparsable node line: {e}") from e
            raise ModelFormatError(f"bad node line {node_lines[cursor - 1]!r}")

        root = parse()
        if cursor != count:
            raise ModelFormatError("tree node count mismatch")
        pos += count
        trees.append(RegressionTree(root))
    if pos != len(lines):
        raise ModelFormatError("trailing content after final tree")
    return BoostedModel(base, trees, rate, loss_kind, dim)


def save_model(model: BoostedModel, path) -> None:
    with open(path, "w", newline="\n") as f:
        f.write(model_to_text(model))


def load_model(path) -> BoostedModel:
    with open(path, "r") as f:
        return model_from_text(f.read())
