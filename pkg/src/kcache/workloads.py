"""Synthetic access traces for exercising the cache policies."""

from __future__ import annotations

import numpy as np

from .trace import AccessTrace


def zipf_probabilities(n_items: int, alpha: float) -> np.ndarray:
    """Rank-ordered Zipf probabilities over ``n_items`` items."""
    w = np.arange(1, n_items + 1, dtype=np.float64) ** -alpha
    return w / w.sum()


def top_mass(n_items: int, alpha: float, k: int) -> float:
    return float(zipf_probabilities(n_items, alpha)[:k].sum())


def _batched(stream, n: int, batch: int) -> AccessTrace:
    """Cut a stream into iterations of up to ``batch`` distinct items.

    A repeated item closes the current iteration early.
    """
    trace = AccessTrace(n=n, q=batch)
    it = 1
    seen: set[int] = set()
    for r in stream:
        r = int(r)
        if r in seen or len(seen) == batch:
            it += 1
            seen = set()
        seen.add(r)
        trace.iterations.append(it)
        trace.rows.append(r)
    trace.total_iterations = it if trace.rows else 0
    return trace


def zipf_trace(n_items: int, n_accesses: int, alpha: float = 1.2, seed: int = 0, batch: int = 1, shuffle_ids: bool = True) -> AccessTrace:
    """i.i.d. Zipf draws. Item ids are a seeded permutation of the ranks."""
    rng = np.random.default_rng(seed)
    ranks = rng.choice(n_items, size=n_accesses, p=zipf_probabilities(n_items, alpha))
    ids = rng.permutation(n_items) if shuffle_ids else np.arange(n_items)
    return _batched(ids[ranks], n_items, batch)


def two_phase_trace(
    s: int,
    n_items: int | None = None,
    phase_a: int | None = None,
    phase_b: int | None = None,
    alpha: float = 1.2,
    loop_fraction: float = 0.8,
    seed: int = 0,
) -> AccessTrace:
    """Frequency-skewed i.i.d. phase, then a cyclic loop over ``loop_fraction * s`` fresh items.

    One access per iteration, so every loop reuse interval is below ``s``.
    """
    n_items = 20 * s if n_items is None else n_items
    phase_a = 100 * s if phase_a is None else phase_a
    phase_b = 100 * s if phase_b is None else phase_b
    loop = max(1, int(loop_fraction * s))
    rng = np.random.default_rng(seed)
    skewed = rng.choice(n_items, size=phase_a, p=zipf_probabilities(n_items, alpha))
    cyc = n_items + np.arange(phase_b) % loop
    return _batched(np.concatenate([skewed, cyc]), n_items + loop, 1)


def round_robin_trace(n_items: int, rounds: int, batch: int, jitter: float = 0.1, seed: int = 0) -> AccessTrace:
    """Quasi-round-robin sweeps: each round visits every item once, order lightly perturbed."""
    rng = np.random.default_rng(seed)
    stream = []
    for _ in range(rounds):
        keys = np.arange(n_items) + rng.normal(0, jitter * n_items, n_items)
        stream.extend(np.argsort(keys, kind="stable").tolist())
    return _batched(stream, n_items, batch)
