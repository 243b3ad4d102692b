"""Kernel-row cache with LRU, LFU, LAT, EFU and hybrid (HCST) replacement.

Per-item state is two counters over all n items: access frequency and the
iteration of the most recent access. Both are maintained under every policy
so that the hybrid controller can switch between EFU and LRU without
flushing anything.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .kernels import KernelRow
from .trace import AccessTrace, stage_of

POLICIES = ("none", "lru", "lfu", "lat", "efu", "hcst")
REPLACEMENT_POLICIES = ("lru", "lfu", "lat", "efu")


class CacheContractError(RuntimeError):
    pass


def checkpoint_interval(lam: float, s: int, q: int) -> int:
    """Iterations between hybrid checkpoints: round(lam * s / q), at least 1."""
    return max(1, int(math.floor(lam * s / q + 0.5)))


@dataclass(frozen=True)
class CacheConfig:
    capacity: int = 512
    policy: str = "hcst"
    lam: float = 2.0
    workers: int = 1
    q: int = 64
    # clock for the reuse intervals behind H_s: outer iterations, or access
    # positions (costs a third per-item counter)
    reuse_unit: str = "iterations"

    def __post_init__(self):
        if self.reuse_unit not in ("iterations", "accesses"):
            raise ValueError(f"unknown reuse-interval unit {self.reuse_unit!r}")
        if self.policy not in POLICIES:
            raise ValueError(f"unknown cache policy {self.policy!r}")
        if self.policy != "none" and self.capacity < 1:
            raise ValueError("cache capacity must be >= 1")
        if self.capacity < 0:
            raise ValueError("cache capacity must be >= 0")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.q < 1:
            raise ValueError("q must be >= 1")

    @property
    def checkpoint_interval(self) -> int:
        return checkpoint_interval(self.lam, max(self.capacity, 1), self.q)


@dataclass
class HcstCounters:
    H_hit: int = 0
    H_s: int = 0
    H_saved: int = 0
    iters_since_checkpoint: int = 0


@dataclass
class CacheStats:
    accesses: int = 0
    hits: int = 0
    misses: int = 0
    admissions: int = 0
    rejections: int = 0
    switches: int = 0
    iter_accesses: list[int] = field(default_factory=list)
    iter_hits: list[int] = field(default_factory=list)

    @property
    def hit_ratio(self) -> float:
        return self.hits / self.accesses if self.accesses else 0.0

    def stage_hit_ratios(self, stages: int) -> list[float]:
        T = len(self.iter_accesses)
        acc = [0] * stages
        hit = [0] * stages
        for t in range(T):
            st = stage_of(t + 1, stages, T) - 1
            acc[st] += self.iter_accesses[t]
            hit[st] += self.iter_hits[t]
        return [h / a if a else 0.0 for h, a in zip(hit, acc)]

    def hit_ratio_after(self, warmup_accesses: int) -> float:
        """Hit ratio over the iterations that start after ``warmup_accesses``."""
        acc = np.asarray(self.iter_accesses)
        start = np.cumsum(acc) - acc
        keep = start >= warmup_accesses
        total = acc[keep].sum()
        return float(np.asarray(self.iter_hits)[keep].sum() / total) if total else 0.0

    def counters(self) -> dict[str, int]:
        return {
            "accesses": self.accesses,
            "hits": self.hits,
            "misses": self.misses,
            "admissions": self.admissions,
            "rejections": self.rejections,
            "switches": self.switches,
        }

    def copy(self) -> "CacheStats":
        return CacheStats(**self.counters(), iter_accesses=list(self.iter_accesses), iter_hits=list(self.iter_hits))

    def since(self, earlier: "CacheStats") -> "CacheStats":
        now, then = self.counters(), earlier.counters()
        k = len(earlier.iter_accesses)
        return CacheStats(
            **{key: now[key] - then[key] for key in now},
            iter_accesses=self.iter_accesses[k:],
            iter_hits=self.iter_hits[k:],
        )

    @staticmethod
    def merge(parts: Sequence["CacheStats"]) -> "CacheStats":
        out = CacheStats()
        for p in parts:
            for key, val in p.counters().items():
                setattr(out, key, getattr(out, key) + val)
            out.iter_accesses += p.iter_accesses
            out.iter_hits += p.iter_hits
        return out


def stats_document(stats: CacheStats, config: CacheConfig, stages: int = 4) -> dict:
    return {
        "policy": config.policy,
        "capacity": config.capacity,
        "lambda": config.lam,
        "workers": config.workers,
        "accesses": stats.accesses,
        "hits": stats.hits,
        "misses": stats.misses,
        "admissions": stats.admissions,
        "rejections": stats.rejections,
        "switches": stats.switches,
        "hit_ratio": stats.hit_ratio,
        "stage_hit_ratios": stats.stage_hit_ratios(stages),
    }


class KernelCache:
    """Slot array of at most ``capacity`` kernel rows.

    ``store_rows=False`` keeps only row ids, for trace replay.
    """

    def __init__(self, n: int, config: CacheConfig, store_rows: bool = True):
        self.n = n
        self.config = config
        self.store_rows = store_rows
        self.s = config.capacity if config.policy != "none" else 0
        self.slot_row = np.full(self.s, -1, dtype=np.int64)
        self.payload: list[np.ndarray | None] = [None] * self.s
        self.where: dict[int, int] = {}
        self.size = 0
        self.freq = np.zeros(n, dtype=np.int64)
        self.last_access = np.full(n, -1, dtype=np.int64)
        self._by_access = config.reuse_unit == "accesses"
        self.last_seq = np.full(n, -1, dtype=np.int64) if self._by_access else None
        self.seq = 0
        self.active = "efu" if config.policy == "hcst" else config.policy
        self.hcst = HcstCounters()
        self.stats = CacheStats()
        self.recorder: AccessTrace | None = None
        self.last_iteration = 0
        self._pending: set[int] = set()
        self._segments = [
            (int(a[0]), int(a[-1]) + 1) for a in np.array_split(np.arange(self.s), config.workers) if a.size
        ]
        self._pool = ThreadPoolExecutor(config.workers) if config.workers > 1 else None

    @property
    def policy(self) -> str:
        return self.config.policy

    @property
    def checkpoint_interval(self) -> int:
        return self.config.checkpoint_interval

    def cached_rows(self) -> set[int]:
        return set(self.where)

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def access_batch(self, indices: Sequence[int], iteration: int):
        """Look up a batch of distinct rows requested in ``iteration``.

        Returns ``(hits, misses)`` where hits is a list of ``(index, row)``
        and misses a list of indices, both in request order.
        """
        if iteration <= self.last_iteration:
            raise CacheContractError(f"iteration {iteration} not after {self.last_iteration}")
        idx = np.asarray(indices, dtype=np.int64)
        if idx.size != len(set(idx.tolist())):
            raise CacheContractError("duplicate index within batch")
        if idx.size and (idx.min() < 0 or idx.max() >= self.n):
            raise IndexError(f"row index out of range for n={self.n}")
        self.last_iteration = iteration

        if self._by_access:
            prev = self.last_seq[idx]
            now = self.seq + np.arange(idx.size)
            self.last_seq[idx] = now
        else:
            prev = self.last_access[idx]
            now = iteration
        self.seq += idx.size
        self.hcst.H_s += int(np.count_nonzero((prev >= 0) & (now - prev < self.s)))
        self.freq[idx] += 1
        self.last_access[idx] = iteration

        hits, misses = [], []
        where = self.where
        for i in idx.tolist():
            slot = where.get(i)
            if slot is None:
                misses.append(i)
            else:
                hits.append((i, self.payload[slot]))
        self.hcst.H_hit += len(hits)
        st = self.stats
        st.accesses += idx.size
        st.hits += len(hits)
        st.misses += len(misses)
        st.iter_accesses.append(int(idx.size))
        st.iter_hits.append(len(hits))
        if self.recorder is not None:
            self.recorder.record(iteration, idx.tolist())
        self._pending = set(misses)
        return hits, misses

    def insert_batch(self, rows: Sequence[KernelRow], iteration: int | None = None) -> int:
        """Offer freshly computed rows for the misses of the last access_batch.

        Free slots are filled first, in ascending row order. The remaining
        rows are split into ``workers`` groups, each replacing only within
        its own slice of the slot array. Returns the number admitted.
        """
        for r in rows:
            if r.row_index not in self._pending:
                raise CacheContractError(f"row {r.row_index} was not a pending miss")
            if self.store_rows and (r.values is None or len(r.values) != self.n):
                raise ValueError(f"row {r.row_index} has length != n={self.n}")
        self._pending -= {r.row_index for r in rows}
        ordered = sorted(rows, key=lambda r: r.row_index)

        admitted = 0
        k = 0
        while k < len(ordered) and self.size < self.s:
            self._place(self.size, ordered[k])
            self.size += 1
            admitted += 1
            k += 1
        rest = ordered[k:]
        if rest and self.s:
            groups = np.array_split(np.arange(len(rest)), len(self._segments))
            jobs = [(seg, [rest[j] for j in g]) for seg, g in zip(self._segments, groups)]
            if self._pool is not None:
                results = list(self._pool.map(lambda job: self._replace_in_segment(*job), jobs))
            else:
                results = [self._replace_in_segment(*job) for job in jobs]
            # merge in segment order; segments and groups are disjoint
            for placements in results:
                for slot, row in placements:
                    self._place(slot, row)
                    admitted += 1
        self.stats.admissions += admitted
        self.stats.rejections += len(rows) - admitted
        return admitted

    def _place(self, slot: int, row: KernelRow) -> None:
        old = int(self.slot_row[slot])
        if old >= 0:
            del self.where[old]
        self.slot_row[slot] = row.row_index
        self.where[row.row_index] = slot
        self.payload[slot] = row.values if self.store_rows else None

    def _replace_in_segment(self, segment: tuple[int, int], rows: list[KernelRow]) -> list[tuple[int, KernelRow]]:
        # Runs on a worker: reads the shared counters, writes only local state.
        a, b = segment
        seg = self.slot_row[a:b].copy()
        policy = self.active
        out = []
        for r in rows:
            pos = self._victim(policy, seg, int(self.freq[r.row_index]))
            if pos is None:
                continue
            seg[pos] = r.row_index
            out.append((a + pos, r))
        return out

    def _victim(self, policy: str, seg: np.ndarray, incoming_freq: int) -> int | None:
        if policy == "lat":
            return int(np.argmin(seg))
        if policy == "lru":
            last = self.last_access[seg]
            cand = np.flatnonzero(last == last.min())
            return int(cand[np.argmin(seg[cand])]) if cand.size > 1 else int(cand[0])
        if policy in ("lfu", "efu"):
            fs = self.freq[seg]
            low = fs.min()
            if policy == "efu" and not low < incoming_freq:
                return None
            cand = np.flatnonzero(fs == low)
            if cand.size == 1:
                return int(cand[0])
            # ties: least recently used, then smallest row index
            last = self.last_access[seg[cand]]
            cand = cand[last == last.min()]
            return int(cand[np.argmin(seg[cand])])
        raise ValueError(f"unknown replacement policy {policy!r}")

    def hcst_checkpoint(self) -> bool:
        """Compare measured hits against the estimate for the idle policy.

        Returns True if the active policy switched.
        """
        if self.policy != "hcst":
            raise CacheContractError("checkpoint requires the hcst policy")
        h = self.hcst
        switched = False
        if self.active == "efu":
            if h.H_hit < h.H_s:
                h.H_saved = h.H_hit
                self.active = "lru"
                switched = True
        elif h.H_hit < h.H_saved:
            self.active = "efu"
            switched = True
        if switched:
            self.stats.switches += 1
        h.H_hit = 0
        h.H_s = 0
        h.iters_since_checkpoint = 0
        return switched

    def end_iteration(self) -> None:
        """Advance the checkpoint clock; fires a checkpoint every N_c iterations."""
        if self.policy != "hcst":
            return
        self.hcst.iters_since_checkpoint += 1
        if self.hcst.iters_since_checkpoint >= self.checkpoint_interval:
            self.hcst_checkpoint()

    def begin_solver(self) -> None:
        """Reset the hybrid controller; contents and item counters are kept."""
        self._pending = set()
        if self.policy == "hcst":
            self.active = "efu"
            self.hcst = HcstCounters()


def evict_candidate(cache: KernelCache, policy: str, segment: range, incoming_freq: int) -> int | None:
    """Slot to replace within a full segment, or None if EFU denies admission."""
    if policy == "hcst":
        policy = cache.active
    if policy not in REPLACEMENT_POLICIES:
        raise ValueError(f"unknown replacement policy {policy!r}")
    slots = np.arange(segment.start, segment.stop)
    if slots.size == 0:
        raise CacheContractError("empty segment")
    seg = cache.slot_row[slots]
    if (seg < 0).any():
        raise CacheContractError("segment has free slots")
    pos = cache._victim(policy, seg, incoming_freq)
    return None if pos is None else int(slots[pos])


def estimate_benefit(h: int, u: int, n: int, d: int, flops: float, bandwidth: float) -> tuple[float, float, float]:
    """Seconds saved by hits, spent copying admitted rows, and the net.

    A row costs (2d - 1) n flops to compute and 4n bytes to copy.
    """
    if not flops > 0 or not bandwidth > 0:
        raise ValueError("flops and bandwidth must be positive")
    saved = h * (2 * d - 1) * n / flops
    copy = 4 * u * n / bandwidth
    return saved, copy, saved - copy
