"""Independent reference computations used by several test modules."""

import numpy as np


def central_difference(f, params, h=1e-6):
    """Gradient of scalar ``f(params)`` by central differences, entry by entry."""
    grads = []
    for p in params:
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            old = p[i]
            p[i] = old + h
            up = f(params)
            p[i] = old - h
            down = f(params)
            p[i] = old
            g[i] = (up - down) / (2 * h)
        grads.append(g)
    return grads


def relative_error(a, b):
    a = np.concatenate([np.ravel(x) for x in a])
    b = np.concatenate([np.ravel(x) for x in b])
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-300))


def softmax_gradient_instance(rng):
    n, d = int(rng.integers(3, 12)), int(rng.integers(2, 8))
    X = rng.normal(size=(n, d))
    y = rng.integers(0, 10, n)
    W = rng.normal(scale=0.5, size=(10, d))
    b = rng.normal(scale=0.5, size=10)
    l2 = float(rng.choice([0.0, 1e-3, 0.1, 1.0]))
    return X, y, W, b, l2


def mlp_gradient_instance(rng):
    from ctvbench.models.mlp import init_params

    n, d = int(rng.integers(3, 10)), int(rng.integers(2, 6))
    X = rng.normal(size=(n, d))
    y = rng.integers(0, 10, n)
    params = init_params(d, (5, 5), seed=int(rng.integers(2**31)))
    for i in range(1, len(params), 2):
        params[i] = rng.normal(scale=0.1, size=params[i].shape)
    l2 = float(rng.choice([0.0, 1e-4, 1e-2]))
    return X, y, params, l2


def softmax_gradient_error(rng):
    from ctvbench.models import softmax_loss_grad

    X, y, W, b, l2 = softmax_gradient_instance(rng)
    _, dW, db = softmax_loss_grad(W, b, X, y, l2)
    fd = central_difference(lambda p: softmax_loss_grad(p[0], p[1], X, y, l2)[0], [W, b])
    return relative_error([dW, db], fd)


def mlp_gradient_error(rng):
    from ctvbench.models import mlp_loss_grad

    X, y, params, l2 = mlp_gradient_instance(rng)
    _, grads = mlp_loss_grad(params, X, y, l2)
    fd = central_difference(lambda p: mlp_loss_grad(p, X, y, l2)[0], params)
    return relative_error(grads, fd)


def chi_square_sf_quadrature(x, df):
    """Upper tail of the chi-square law by adaptive quadrature of its density."""
    import mpmath as mp

    with mp.workdps(30):
        k = mp.mpf(df) / 2
        norm = 2**k * mp.gamma(k)
        density = lambda t: t ** (k - 1) * mp.exp(-t / 2) / norm  # noqa: E731
        x = mp.mpf(x)
        if x == 0:
            return 1.0
        return float(mp.quad(density, [x + d for d in (0, 1, 4, 12, 30, 70, 150, 400)] + [mp.inf]))
