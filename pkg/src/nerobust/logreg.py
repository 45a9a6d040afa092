"""L2-regularized logistic regression with stratified k-fold model selection.

The model and its gradient are written out here; minimization is delegated to
scipy's L-BFGS-B.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .metrics import f1_scores

logger = logging.getLogger(__name__)

DEFAULT_REG_GRID = (1e-4, 1e-3, 1e-2, 1e-1, 1.0)
GTOL = 1e-4
MAX_ITER = 1000


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def logistic_loss_grad(params: np.ndarray, X: np.ndarray, y: np.ndarray, reg: float):
    """Mean log-loss plus ``reg/2 * |w|^2`` (bias not penalized) and its gradient.

    ``params`` is ``[w, b]``; ``y`` holds 0/1 targets.
    """
    w, b = params[:-1], params[-1]
    z = X @ w + b
    n = len(y)
    loss = np.sum(np.logaddexp(0.0, z) - y * z) / n + 0.5 * reg * (w @ w)
    r = (_sigmoid(z) - y) / n
    grad = np.empty_like(params)
    grad[:-1] = X.T @ r + reg * w
    grad[-1] = r.sum()
    return loss, grad


def fit_binary(X: np.ndarray, y: np.ndarray, reg: float, x0=None) -> np.ndarray:
    x0 = np.zeros(X.shape[1] + 1) if x0 is None else x0
    res = minimize(
        logistic_loss_grad,
        x0,
        args=(X, y.astype(float), reg),
        jac=True,
        method="L-BFGS-B",
        options={"gtol": GTOL, "maxiter": MAX_ITER},
    )
    return res.x


@dataclass
class BinaryLogReg:
    weights: np.ndarray
    bias: float
    reg: float

    def decision_function(self, X) -> np.ndarray:
        return np.asarray(X) @ self.weights + self.bias

    def predict_proba(self, X) -> np.ndarray:
        return _sigmoid(self.decision_function(X))

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(X) > 0).astype(np.int64)


@dataclass
class OneVsRestLogReg:
    """One binary model per class; prediction is the argmax score (ties -> lowest class)."""

    classes: np.ndarray
    weights: np.ndarray  # (K, d)
    biases: np.ndarray  # (K,)
    reg: float

    def decision_function(self, X) -> np.ndarray:
        return np.asarray(X) @ self.weights.T + self.biases

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X)
        if len(self.classes) == 1:
            return np.full(len(X), self.classes[0])
        return self.classes[np.argmax(self.decision_function(X), axis=1)]


def _fit_ovr(X, y, classes, reg) -> OneVsRestLogReg:
    d = X.shape[1]
    if len(classes) == 1:
        return OneVsRestLogReg(classes, np.zeros((1, d)), np.zeros(1), reg)
    params = np.array([fit_binary(X, (y == c), reg) for c in classes])
    return OneVsRestLogReg(classes, params[:, :-1], params[:, -1], reg)


def stratified_folds(y: np.ndarray, folds: int, rng: np.random.Generator) -> np.ndarray:
    """Fold id per sample; each class is shuffled and dealt round-robin over folds."""
    fold_of = np.empty(len(y), dtype=np.int64)
    offset = 0
    for c in np.unique(y):
        idx = rng.permutation(np.flatnonzero(y == c))
        fold_of[idx] = (np.arange(len(idx)) + offset) % folds
        offset += len(idx)
    return fold_of


def _select_reg(X, y, fit, predict, folds, reg_grid, rng) -> float:
    grid = sorted(reg_grid)
    if len(grid) == 1:
        return grid[0]
    counts = np.unique(y, return_counts=True)[1]
    k = min(folds, int(counts.min()))
    if k < folds:
        logger.warning("smallest class has %d samples; using %d folds instead of %d", counts.min(), max(k, 2), folds)
    k = max(k, 2)
    if len(y) < k:
        return grid[0]
    fold_of = stratified_folds(y, k, rng)
    best, best_score = grid[0], -np.inf
    for reg in grid:
        preds = np.empty_like(y)
        for f in range(k):
            test = fold_of == f
            model = fit(X[~test], y[~test], reg)
            preds[test] = predict(model, X[test])
        score = f1_scores(y, preds)[0]
        if score > best_score:  # strict: ties keep the smaller strength
            best, best_score = reg, score
    return best


def train_logreg_ovr(
    features,
    labels,
    folds: int = 5,
    reg_grid: Sequence[float] = DEFAULT_REG_GRID,
    rng: np.random.Generator | None = None,
) -> OneVsRestLogReg:
    """One-vs-rest logistic regression, regularization picked by stratified k-fold f1_micro."""
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels)
    rng = np.random.default_rng() if rng is None else rng
    classes = np.unique(y)
    if len(classes) == 1:
        logger.warning("training labels contain a single class; using a constant classifier")
        return _fit_ovr(X, y, classes, reg_grid[0])

    def fit(Xf, yf, reg):
        return _fit_ovr(Xf, yf, classes, reg)

    reg = _select_reg(X, y, fit, lambda m, Xt: m.predict(Xt), folds, reg_grid, rng)
    return _fit_ovr(X, y, classes, reg)


def train_logreg_binary(
    features,
    labels,
    folds: int = 5,
    reg_grid: Sequence[float] = DEFAULT_REG_GRID,
    rng: np.random.Generator | None = None,
) -> BinaryLogReg:
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels).astype(np.int64)
    rng = np.random.default_rng() if rng is None else rng

    def fit(Xf, yf, reg):
        p = fit_binary(Xf, yf, reg)
        return BinaryLogReg(p[:-1], float(p[-1]), reg)

    if len(np.unique(y)) < 2:
        raise ValueError("binary training data must contain both classes")
    reg = _select_reg(X, y, fit, lambda m, Xt: m.predict(Xt), folds, reg_grid, rng)
    return fit(X, y, reg)
