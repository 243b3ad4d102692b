"""Independent reference implementations used by the tests.

Nothing here imports the solver or cache code paths under test, apart from
plain data containers.
"""

from __future__ import annotations

import itertools
import math
from collections import OrderedDict

import numpy as np


def kernel_matrix(X: np.ndarray, kind: str, gamma: float = 0.5, coef0: float = 0.0) -> np.ndarray:
    """Dense kernel matrix straight from the definitions."""
    X = np.asarray(X, dtype=np.float64)
    G = X @ X.T
    if kind == "linear":
        return G
    if kind == "sigmoid":
        return np.tanh(gamma * G + coef0)
    sq = np.sum(X * X, axis=1)
    D = sq[:, None] + sq[None, :] - 2 * G
    return np.exp(-gamma * np.maximum(D, 0.0))


def dual_value(alpha, y, K) -> float:
    """sum(alpha) - 1/2 alpha^T Q alpha with Q = (y y^T) * K."""
    v = alpha * y
    return float(alpha.sum() - 0.5 * v @ K @ v)


def project_box_hyperplane(v, y, C, iters: int = 200) -> np.ndarray:
    """Euclidean projection onto {0 <= a <= C, y.a = 0} by bisection on the multiplier."""

    def g(nu):
        return float(y @ np.clip(v - nu * y, 0.0, C))

    lo, hi = -1.0, 1.0
    while g(lo) < 0:
        lo *= 2
    while g(hi) > 0:
        hi *= 2
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15 * max(1.0, abs(lo)):
            break
    return np.clip(v - 0.5 * (lo + hi) * y, 0.0, C)


def pg_dual_oracle(K, y, C, tol: float = 1e-8, max_iter: int = 200000) -> tuple[np.ndarray, float]:
    """Accelerated projected-gradient ascent on the C-SVC dual.

    Stops when the projected step moves alpha by less than ``tol``.
    """
    y = np.asarray(y, dtype=np.float64)
    Q = (y[:, None] * y[None, :]) * K
    L = max(float(np.linalg.eigvalsh(Q)[-1]), 1e-12)
    alpha = np.zeros(len(y))
    z = alpha.copy()
    t = 1.0
    for _ in range(max_iter):
        grad = 1.0 - Q @ z
        nxt = project_box_hyperplane(z + grad / L, y, C)
        t_next = 0.5 * (1 + math.sqrt(1 + 4 * t * t))
        z = nxt + ((t - 1) / t_next) * (nxt - alpha)
        # restart momentum if the objective went down
        if dual_value(nxt, y, K) < dual_value(alpha, y, K):
            z = nxt.copy()
            t_next = 1.0
        step = np.max(np.abs(nxt - alpha))
        alpha, t = nxt, t_next
        if step < tol:
            break
    return alpha, dual_value(alpha, y, K)


def brute_force_opt_hits(rows: list, s: int) -> int:
    """Best hit count over every admission/eviction choice, one access per step.

    Bypass is allowed: a missed item may be left out of the cache.
    """
    best = {frozenset(): 0}
    for r in rows:
        nxt: dict[frozenset, int] = {}
        for cache, hits in best.items():
            if r in cache:
                options = [(cache, hits + 1)]
            else:
                options = [(cache, hits)]
                if len(cache) < s:
                    options.append((cache | {r}, hits))
                else:
                    options += [((cache - {v}) | {r}, hits) for v in cache]
            for c, h in options:
                if nxt.get(c, -1) < h:
                    nxt[c] = h
        best = nxt
    return max(best.values())


def brute_force_demand_opt_hits(rows: list, s: int) -> int:
    """Best hit count when every miss must be admitted."""
    best = {frozenset(): 0}
    for r in rows:
        nxt: dict[frozenset, int] = {}
        for cache, hits in best.items():
            if r in cache:
                options = [(cache, hits + 1)]
            elif len(cache) < s:
                options = [(cache | {r}, hits)]
            else:
                options = [((cache - {v}) | {r}, hits) for v in cache]
            for c, h in options:
                if nxt.get(c, -1) < h:
                    nxt[c] = h
        best = nxt
    return max(best.values())


class DequeLru:
    """Reference LRU over single accesses."""

    def __init__(self, s: int):
        self.s = s
        self.items: OrderedDict[int, None] = OrderedDict()

    def access(self, r: int) -> bool:
        if r in self.items:
            self.items.move_to_end(r)
            return True
        self.items[r] = None
        if len(self.items) > self.s:
            self.items.popitem(last=False)
        return False


def balanced_blobs(rng, n: int, d: int, sep: float = 1.0):
    """n points in d dims, half labelled +1 around +sep/2 and half -1 around -sep/2."""
    half = n // 2
    y = np.r_[np.ones(half), -np.ones(n - half)]
    X = rng.normal(0.0, 1.0, (n, d)) + (sep / 2) * y[:, None]
    return X, y


def stage_counts(iterations, rows, n, k, T):
    """Per-stage access counts, by direct loops."""
    out = np.zeros((k, n), dtype=np.int64)
    for it, r in zip(iterations, rows):
        out[math.ceil(it * k / T) - 1, r] += 1
    return out


def all_subsets(items, size):
    return [set(c) for c in itertools.combinations(items, size)]
