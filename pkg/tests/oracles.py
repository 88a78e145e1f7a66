"""Slow, direct reference implementations used as test oracles.

None of these share code with the package; they follow the textbook
definitions with explicit loops.
"""

import numpy as np


def slices_by_rank(y, H):
    """Contiguous near-equal slices over sorted y, with ties pushed right."""
    y = np.asarray(y, dtype=float)
    n = len(y)
    if n < 2 * H:
        H = max(2, n // 2)
    order = sorted(range(n), key=lambda i: (y[i], i))
    ys = [y[i] for i in order]
    sizes = [n // H + (1 if k < n % H else 0) for k in range(H)]
    cuts = []
    for k in range(1, H):
        b = sum(sizes[:k])
        while 0 < b < n and ys[b] == ys[b - 1]:
            b += 1
        cuts.append(b)
    bounds = sorted(set([0] + [c for c in cuts if 0 < c < n] + [n]))
    return [[order[i] for i in range(a, b)] for a, b in zip(bounds[:-1], bounds[1:])]


def sir_matrix_x(X, y, H):
    """Between-slice covariance of slice means, in the original coordinates."""
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    xbar = X.mean(axis=0)
    L = np.zeros((p, p))
    for s in slices_by_rank(y, H):
        m = X[s].mean(axis=0) - xbar
        L += len(s) / n * np.outer(m, m)
    return L


def save_matrix_x(X, y, H):
    """Sum over slices of (n_k/n) (S - V_k) S^{-1} (S - V_k), S the covariance."""
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    xbar = X.mean(axis=0)
    S = np.zeros((p, p))
    for i in range(n):
        S += np.outer(X[i] - xbar, X[i] - xbar)
    S /= n
    Sinv = np.linalg.inv(S)
    L = np.zeros((p, p))
    for s in slices_by_rank(y, H):
        Xs = X[s]
        m = Xs.mean(axis=0)
        V = np.zeros((p, p))
        for row in Xs:
            V += np.outer(row - m, row - m)
        V /= len(s)
        D = S - V
        L += len(s) / n * D @ Sinv @ D
    return L


def _seq_mean(vals):
    acc = 0.0
    for v in vals:
        acc += v
    return acc / len(vals)


def _sse(vals):
    vals = np.asarray(vals)
    return float(((vals - vals.mean()) ** 2).sum())


def cart_fit(X, y, n_min=1, rows=None):
    """Plain recursive CART on every feature; returns a nested dict."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if rows is None:
        rows = list(range(len(y)))
    node = {"value": _seq_mean([y[i] for i in rows])}
    yn = [y[i] for i in rows]
    if len(rows) < max(2, n_min) or max(yn) == min(yn):
        return node
    best = None
    for j in range(X.shape[1]):
        vals = sorted(set(X[i, j] for i in rows))
        for c in vals[:-1]:
            left = [i for i in rows if X[i, j] <= c]
            right = [i for i in rows if X[i, j] > c]
            sse = _sse([y[i] for i in left]) + _sse([y[i] for i in right])
            key = (sse, c, j)
            if best is None or key < best[0]:
                best = (key, j, c, left, right)
    if best is None:
        return node
    _, j, c, left, right = best
    node.update(feature=j, threshold=c, left=cart_fit(X, y, n_min, left),
                right=cart_fit(X, y, n_min, right))
    return node


def cart_predict(node, x):
    while "feature" in node:
        node = node["left"] if x[node["feature"]] <= node["threshold"] else node["right"]
    return node["value"]


def kernel_bruteforce(trees, A, B):
    M = len(trees)
    K = np.zeros((len(A), len(B)))
    for t in trees:
        for i in range(len(A)):
            li = t.apply(A[i])[0]
            for j in range(len(B)):
                if li == t.apply(B[j])[0]:
                    K[i, j] += 1
    return K / M


def lsvi_straight(X, x0, w):
    """Weighted, query-centered covariance and its smallest eigenvector."""
    n, p = X.shape
    sw = sum(w)
    mu = np.zeros(p)
    for i in range(n):
        mu += w[i] * (X[i] - x0)
    mu /= sw
    C = np.zeros((p, p))
    for i in range(n):
        d = X[i] - x0 - mu
        C += w[i] * np.outer(d, d)
    C /= sw
    vals, vecs = np.linalg.eigh(C)
    v = vecs[:, 0]
    return v * np.sign(v[np.argmax(np.abs(v))]), vals[0]
