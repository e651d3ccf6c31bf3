"""Multinomial logistic regression trained by stochastic average gradient."""

from __future__ import annotations

import numpy as np
from numba import njit

from ..errors import EmptyTraining, NonFiniteLoss
from .base import N_CLASSES, TrainedRanker, softmax


class SoftmaxRanker(TrainedRanker):
    kind = "softmax"

    def __init__(self, W, b, l2=0.0, epochs=0):
        self.W = np.asarray(W, dtype=np.float64)  # (classes, width)
        self.b = np.asarray(b, dtype=np.float64)
        self.width = self.W.shape[1]
        self.l2 = float(l2)
        self.epochs = int(epochs)

    def scores(self, X, trial_ids=None):
        return softmax(X @ self.W.T + self.b)

    def params(self):
        return {"W": self.W, "b": self.b}

    def config(self):
        return {"l2": self.l2, "epochs": self.epochs}


def softmax_loss_grad(W, b, X, y, l2):
    """Mean cross-entropy plus ``l2/2 * ||W||^2`` and its gradient.

    The bias is not penalised.
    """
    n = X.shape[0]
    z = X @ W.T + b
    z = z - z.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    loss = float(np.mean(logsum - z[np.arange(n), y])) + 0.5 * l2 * float(np.sum(W * W))
    resid = np.exp(z - logsum[:, None])
    resid[np.arange(n), y] -= 1.0
    dW = resid.T @ X / n + l2 * W
    db = resid.mean(axis=0)
    return loss, dW, db


@njit(cache=True)
def _sag_epoch(X, y, W, b, mem, sum_W, sum_b, seen, n_seen, order, step, l2):
    n_features = X.shape[1]
    k = W.shape[0]
    z = np.empty(k)
    delta = np.empty(k)
    for i in order:
        zmax = -np.inf
        for c in range(k):
            acc = b[c]
            for j in range(n_features):
                if X[i, j] != 0.0:
                    acc += W[c, j] * X[i, j]
            z[c] = acc
            if acc > zmax:
                zmax = acc
        total = 0.0
        for c in range(k):
            z[c] = np.exp(z[c] - zmax)
            total += z[c]
        for c in range(k):
            r = z[c] / total
            if c == y[i]:
                r -= 1.0
            delta[c] = r - mem[i, c]
            mem[i, c] = r
        for j in range(n_features):
            xj = X[i, j]
            if xj != 0.0:
                for c in range(k):
                    sum_W[c, j] += delta[c] * xj
        for c in range(k):
            sum_b[c] += delta[c]
        if not seen[i]:
            seen[i] = True
            n_seen += 1
        inv = 1.0 / n_seen
        for c in range(k):
            for j in range(n_features):
                W[c, j] -= step * (sum_W[c, j] * inv + l2 * W[c, j])
            b[c] -= step * sum_b[c] * inv
    return n_seen


def fit_softmax(
    X,
    y,
    l2: float = 1e-2,
    step: float | None = None,
    max_epochs: int = 300,
    tol: float = 1e-6,
    seed: int = 0,
    solver: str = "sag",
    return_history: bool = False,
):
    """Fit softmax regression; stops when the epoch loss changes by less than ``tol``.

    ``solver="gd"`` runs plain full-batch gradient descent (one step per
    epoch), which is monotone for a small enough ``step``.
    """
    if l2 < 0:
        raise ValueError("l2 must be >= 0")
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n, d = X.shape
    if n == 0:
        raise EmptyTraining("softmax needs at least one training row")
    if step is None:
        max_sq = float(np.max(np.sum(X * X, axis=1)))
        step = 1.0 / (0.5 * (max_sq + 1.0) + l2)

    W = np.zeros((N_CLASSES, d))
    b = np.zeros(N_CLASSES)
    rng = np.random.default_rng(seed)
    if solver == "sag":
        mem = np.zeros((n, N_CLASSES))
        sum_W = np.zeros((N_CLASSES, d))
        sum_b = np.zeros(N_CLASSES)
        seen = np.zeros(n, dtype=np.bool_)
        n_seen = 0
    elif solver != "gd":
        raise ValueError(f"unknown solver {solver!r}")

    history = [softmax_loss_grad(W, b, X, y, l2)[0]]
    epochs = 0
    for epochs in range(1, max_epochs + 1):
        if solver == "sag":
            # uniform draws with replacement; per-epoch permutations make SAG unstable here
            order = rng.integers(0, n, n)
            n_seen = _sag_epoch(X, y, W, b, mem, sum_W, sum_b, seen, n_seen, order, step, l2)
            loss = softmax_loss_grad(W, b, X, y, l2)[0]
        else:
            _, dW, db = softmax_loss_grad(W, b, X, y, l2)
            W -= step * dW
            b -= step * db
            loss = softmax_loss_grad(W, b, X, y, l2)[0]
        if not np.isfinite(loss):
            raise NonFiniteLoss(f"softmax loss diverged at epoch {epochs} (step={step})")
        history.append(loss)
        if abs(history[-2] - loss) < tol:
            break

    model = SoftmaxRanker(W, b, l2=l2, epochs=epochs)
    return (model, history) if return_history else model
