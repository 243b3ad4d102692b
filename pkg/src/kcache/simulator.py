"""Trace replay under the online policies and under offline-optimal eviction."""

from __future__ import annotations

import heapq
from dataclasses import dataclass

from .cache import REPLACEMENT_POLICIES, CacheConfig, CacheStats, KernelCache
from .kernels import KernelRow
from .trace import AccessTrace

SIM_POLICIES = REPLACEMENT_POLICIES + ("hcst",)


def replay_trace(
    trace: AccessTrace, policy: str, s: int, lam: float = 2.0, p: int = 1, reuse_unit: str = "iterations"
) -> CacheStats:
    """Feed the trace through a fresh cache, one batch per iteration."""
    if s < 1:
        raise ValueError("cache capacity must be >= 1")
    if policy not in SIM_POLICIES:
        raise ValueError(f"unknown policy {policy!r}")
    cache = KernelCache(trace.n, CacheConfig(s, policy, lam, p, max(trace.q, 1), reuse_unit), store_rows=False)
    try:
        for it, rows in trace.batches():
            _, misses = cache.access_batch(rows, it)
            if misses:
                cache.insert_batch([KernelRow(r, None) for r in misses], it)
            cache.end_iteration()
    finally:
        cache.close()
    return cache.stats


def belady_opt_replay(trace: AccessTrace, s: int, bypass: bool = True) -> CacheStats:
    """Offline-optimal replacement, batch by batch.

    After each iteration the cache keeps, out of its old contents plus the
    new misses, the ``s`` items whose next use is soonest; items never used
    again go first and ties evict the smaller row index. With
    ``bypass=False`` every miss must be admitted (classic demand paging),
    which can lose to policies that refuse admission.
    """
    if s < 1:
        raise ValueError("cache capacity must be >= 1")
    INF = float("inf")
    # next use (as an iteration number) for each event position
    next_use = [INF] * len(trace)
    upcoming: dict[int, int] = {}
    for pos in range(len(trace) - 1, -1, -1):
        r = trace.rows[pos]
        next_use[pos] = upcoming.get(r, INF)
        upcoming[r] = trace.iterations[pos]

    stats = CacheStats()
    cached: dict[int, float] = {}  # row -> its next use
    heap: list[tuple[float, int]] = []  # (-next use, row), stale entries skipped
    pos = 0
    for _, rows in trace.batches():
        misses = []
        hits = 0
        for r in rows:
            nu = next_use[pos]
            pos += 1
            if r in cached:
                hits += 1
            else:
                misses.append(r)
            cached[r] = nu
            heapq.heappush(heap, (-nu, r))
        stats.accesses += len(rows)
        stats.hits += hits
        stats.misses += len(misses)
        stats.iter_accesses.append(len(rows))
        stats.iter_hits.append(hits)

        overflow = len(cached) - s
        forced = set(misses) if not bypass else set()
        forced_left = len(forced)
        deferred = []
        while overflow > 0:
            neg, r = heapq.heappop(heap)
            if cached.get(r) != -neg:
                continue
            if r in forced:
                if len(cached) > forced_left:
                    deferred.append((neg, r))
                    continue
                forced_left -= 1
            del cached[r]
            overflow -= 1
        for item in deferred:
            heapq.heappush(heap, item)
        admitted = sum(1 for r in misses if r in cached)
        stats.admissions += admitted
        stats.rejections += len(misses) - admitted
        if len(heap) > 4 * (s + len(rows)) + 64:
            heap = [(-nu, r) for r, nu in cached.items()]
            heapq.heapify(heap)
    return stats


@dataclass
class StrategyRow:
    policy: str
    capacity: int
    stats: CacheStats


def compare_strategies(
    trace: AccessTrace, s: int, lam: float = 2.0, p: int = 1, policies=SIM_POLICIES, reuse_unit: str = "iterations"
) -> list[StrategyRow]:
    """Replay under each policy, plus an ``opt`` row."""
    rows = [StrategyRow(pol, s, replay_trace(trace, pol, s, lam, p, reuse_unit)) for pol in policies]
    rows.append(StrategyRow("opt", s, belady_opt_replay(trace, s)))
    return rows


def comparison_csv(rows: list[StrategyRow]) -> str:
    lines = ["policy,capacity,accesses,hits,hit_ratio,switches"]
    for r in rows:
        st = r.stats
        lines.append(f"{r.policy},{r.capacity},{st.accesses},{st.hits},{st.hit_ratio!r},{st.switches}")
    return "\n".join(lines) + "\n"
