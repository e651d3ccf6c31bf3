from __future__ import annotations

import numpy as np

from ..errors import EmptyTraining, NonFiniteLoss
from .base import N_CLASSES, TrainedRanker, softmax


def init_params(width: int, layers=(200, 200), seed: int = 0) -> list[np.ndarray]:
    """He-uniform weights (bound sqrt(6 / fan_in)), zero biases; [W1, b1, W2, b2, ...]."""
    rng = np.random.default_rng(seed)
    sizes = [width, *layers, N_CLASSES]
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / fan_in)
        params.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        params.append(np.zeros(fan_out))
    return params


def forward(params, X):
    acts = [X]
    h = X
    n_layers = len(params) // 2
    for layer in range(n_layers):
        z = h @ params[2 * layer] + params[2 * layer + 1]
        if layer < n_layers - 1:
            h = np.maximum(z, 0.0)
            acts.append(h)
        else:
            return z, acts


def mlp_loss_grad(params, X, y, l2):
    """Mean cross-entropy + ``l2/2`` times the squared norm of all weight matrices."""
    n = X.shape[0]
    logits, acts = forward(params, X)
    z = logits - logits.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    weights = params[0::2]
    loss = float(np.mean(logsum - z[np.arange(n), y])) + 0.5 * l2 * sum(float(np.sum(W * W)) for W in weights)

    delta = np.exp(z - logsum[:, None])
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grads = [None] * len(params)
    for layer in range(len(weights) - 1, -1, -1):
        W = params[2 * layer]
        grads[2 * layer] = acts[layer].T @ delta + l2 * W
        grads[2 * layer + 1] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ W.T) * (acts[layer] > 0)
    return loss, grads


class MLPRanker(TrainedRanker):
    kind = "mlp"

    def __init__(self, params, l2=0.0, epochs=0, seed=0):
        self.weights = [np.asarray(p, dtype=np.float64) for p in params]
        self.width = self.weights[0].shape[0]
        self.l2 = float(l2)
        self.epochs = int(epochs)
        self.seed = seed

    def scores(self, X, trial_ids=None):
        return softmax(forward(self.weights, X)[0])

    def params(self):
        return {f"p{i}": p for i, p in enumerate(self.weights)}

    def config(self):
        return {"l2": self.l2, "epochs": self.epochs, "seed": self.seed}


def fit_mlp(
    X,
    y,
    l2: float = 1e-4,
    layers=(200, 200),
    learn_rate: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    batch_size: int = 64,
    max_epochs: int = 200,
    tol: float = 1e-4,
    n_iter_no_change: int = 10,
    seed: int = 0,
    return_history: bool = False,
):
    """Mini-batch Adam; stops early once the epoch training loss has failed
    to improve on the best by ``tol`` for ``n_iter_no_change`` epochs."""
    if l2 < 0:
        raise ValueError("l2 must be >= 0")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n = X.shape[0]
    if n == 0:
        raise EmptyTraining("mlp needs at least one training row")

    params = init_params(X.shape[1], layers, seed)
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    rng = np.random.default_rng([seed, 1])
    t = 0
    best, stale = np.inf, 0
    history = []
    epoch = 0
    for epoch in range(1, max_epochs + 1):
        perm = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            idx = perm[start : start + batch_size]
            loss, grads = mlp_loss_grad(params, X[idx], y[idx], l2)
            if not np.isfinite(loss):
                raise NonFiniteLoss(f"mlp loss diverged at epoch {epoch}")
            total += loss * idx.size
            t += 1
            c1 = 1.0 - beta1**t
            c2 = 1.0 - beta2**t
            for p, g, mi, vi in zip(params, grads, m, v):
                mi *= beta1
                mi += (1.0 - beta1) * g
                vi *= beta2
                vi += (1.0 - beta2) * g * g
                p -= learn_rate * (mi / c1) / (np.sqrt(vi / c2) + eps)
        epoch_loss = total / n
        history.append(epoch_loss)
        if epoch_loss > best - tol:
            stale += 1
            if stale >= n_iter_no_change:
                break
        else:
            stale = 0
        best = min(best, epoch_loss)

    model = MLPRanker(params, l2=l2, epochs=epoch, seed=seed)
    return (model, history) if return_history else model
