"""Batched working-set SMO for C-SVC, with kernel rows served through the cache.

Optimality indicators follow ``f_i = sum_j alpha_j y_j K(x_i, x_j) - y_i``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .cache import CacheConfig, CacheStats, KernelCache
from .dataset import Dataset, DatasetError, binarize_labels, distinct_labels
from .kernels import KernelParams, KernelRow, compute_kernel_rows, precompute_self_dots
from .model import OneVsAllModel, SvmModel
from .trace import AccessTrace

log = logging.getLogger(__name__)

ETA_MIN = 1e-12


@dataclass(frozen=True)
class SolverConfig:
    params: KernelParams = field(default_factory=KernelParams)
    q: int = 64
    W: int | None = None
    eps: float = 1e-3
    max_outer: int | None = None
    max_inner: int = 10000
    workers: int = 1
    record_pairs: bool = False

    def __post_init__(self):
        if self.q < 2 or self.q % 2:
            raise ValueError("q must be even and >= 2")
        if not self.q <= self.working_set_size <= 2 * self.q:
            raise ValueError("working set size must lie in [q, 2q]")
        if not self.eps > 0:
            raise ValueError("eps must be positive")

    @property
    def working_set_size(self) -> int:
        return 2 * self.q if self.W is None else self.W

    def outer_cap(self, n: int) -> int:
        if self.max_outer is not None:
            return self.max_outer
        return 10 * math.ceil(n / self.q) * 100


@dataclass
class SolverState:
    alpha: np.ndarray
    f: np.ndarray
    working_set: list[int] = field(default_factory=list)
    iteration: int = 0


def upper_mask(alpha, y, C) -> np.ndarray:
    """Instances whose y_i * alpha_i can still increase."""
    return ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))


def lower_mask(alpha, y, C) -> np.ndarray:
    """Instances whose y_i * alpha_i can still decrease."""
    return ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))


def _select(f, alpha, y, C, K, diag):
    up = upper_mask(alpha, y, C)
    low = lower_mask(alpha, y, C)
    if not up.any():
        return None, None, None, None
    u = int(np.argmin(np.where(up, f, np.inf)))
    f_u = f[u]
    if not low.any():
        return u, None, f_u, -np.inf
    f_max = float(np.max(f[low]))
    cand = low & (f > f_u)
    if not cand.any():
        return u, None, f_u, f_max
    eta = diag[u] + diag - 2.0 * np.asarray(K[u])
    cand &= eta > ETA_MIN
    if not cand.any():
        return u, None, f_u, f_max
    score = np.full(len(f), -np.inf)
    score[cand] = (f_u - f[cand]) ** 2 / eta[cand]
    return u, int(np.argmax(score)), f_u, f_max


def select_extreme_pair(f, alpha, y, C, K, diag=None) -> tuple[int | None, int | None]:
    """Second-order extreme pair over the candidates spanned by ``K``.

    ``K`` is the square kernel matrix among the candidates (rows indexable by
    position). ``l`` is None when no lower-set candidate has ``f_i > f_u``.
    """
    f = np.asarray(f, dtype=np.float64)
    if diag is None:
        diag = np.array([K[i][i] for i in range(len(f))], dtype=np.float64)
    u, l, _, _ = _select(f, np.asarray(alpha), np.asarray(y), C, K, diag)
    return u, l


def update_alpha_pair(u, l, f, alpha, y, C, K_u, K_l) -> tuple[float, float]:
    eta = K_u[u] + K_l[l] - 2.0 * K_u[l]
    if not eta > 0:
        raise ValueError("non-positive curvature")
    a_u, a_l = float(alpha[u]), float(alpha[l])
    s = y[l] * y[u]
    new_l = min(max(a_l + y[l] * (f[u] - f[l]) / eta, 0.0), C)
    new_u = a_u + s * (a_l - new_l)
    if new_u < 0.0 or new_u > C:
        new_u = min(max(new_u, 0.0), C)
        new_l = min(max(a_l + s * (a_u - new_u), 0.0), C)
    return float(new_u), float(new_l)


def update_indicators(f, d_u, d_l, y_u, y_l, K_u, K_l) -> np.ndarray:
    return f + (d_u * y_u) * np.asarray(K_u) + (d_l * y_l) * np.asarray(K_l)


def is_converged(f_u: float, f_max: float, eps: float) -> bool:
    return f_u >= f_max - eps


def select_new_violators(f, alpha, y, C, q, exclude=()) -> list[int]:
    """q/2 smallest-f from the upper set plus q/2 largest-f from the lower set.

    Ties go to the smaller index; an instance picked from the upper side is
    not picked again from the lower side.
    """
    up, low = _violator_halves(f, alpha, y, C, q, exclude)
    return up + low


def _violator_halves(f, alpha, y, C, q, exclude=()):
    f = np.asarray(f)
    n = len(f)
    free = np.ones(n, dtype=bool)
    free[list(exclude)] = False
    idx = np.arange(n)
    half = q // 2
    up_c = idx[free & upper_mask(alpha, y, C)]
    up = up_c[np.lexsort((up_c, f[up_c]))][:half].tolist()
    free[up] = False
    low_c = idx[free & lower_mask(alpha, y, C)]
    low = low_c[np.lexsort((low_c, -f[low_c]))][:half].tolist()
    return up, low


def dual_objective(alpha, y, f) -> float:
    """sum(alpha) - alpha^T Q alpha / 2, read off the indicators."""
    alpha = np.asarray(alpha)
    return float(0.5 * alpha.sum() - 0.5 * np.dot(alpha * y, f))


def solve_working_set(state: SolverState, ws, rows: np.ndarray, y, C, eps, max_inner, pairs=None) -> tuple[int, bool]:
    """SMO restricted to ``ws``; ``rows`` holds the full kernel rows of ``ws``.

    Updates ``state.alpha`` and the global ``state.f`` in place. Returns
    (pair updates, locally converged).
    """
    ws = np.asarray(ws, dtype=np.int64)
    K = rows[:, ws]
    diag = K.diagonal().copy()
    yw = y[ws]
    updates = 0
    while updates < max_inner:
        fw = state.f[ws]
        aw = state.alpha[ws]
        u, l, f_u, f_max = _select(fw, aw, yw, C, K, diag)
        if u is None or is_converged(f_u, f_max, eps):
            return updates, True
        if l is None:
            return updates, False
        new_u, new_l = update_alpha_pair(u, l, fw, aw, yw, C, K[u], K[l])
        d_u, d_l = new_u - aw[u], new_l - aw[l]
        gu, gl = int(ws[u]), int(ws[l])
        state.alpha[gu] = new_u
        state.alpha[gl] = new_l
        state.f = update_indicators(state.f, d_u, d_l, yw[u], yw[l], rows[u], rows[l])
        updates += 1
        if pairs is not None:
            pairs.append((gu, gl))
    return updates, False


def compute_rho(f, alpha, y, C, eps=None) -> float:
    f = np.asarray(f)
    up = upper_mask(alpha, y, C)
    low = lower_mask(alpha, y, C)
    if up.any() and low.any():
        return float((f[up].min() + f[low].max()) / 2)
    return float(f[up].min() if up.any() else f[low].max())


@dataclass
class TrainResult:
    model: SvmModel
    trace: AccessTrace
    stats: CacheStats
    state: SolverState
    converged: bool
    pair_updates: int
    pairs: list[tuple[int, int]] | None = None


class KernelSource:
    """Dataset-bound row computation with self-dots computed once."""

    def __init__(self, ds: Dataset, params: KernelParams, workers: int = 1):
        self.ds = ds
        self.params = params
        self.workers = workers
        self.self_dots = precompute_self_dots(ds) if params.kind == "gaussian" else None
        self.computed = 0

    def rows(self, indices) -> list[KernelRow]:
        self.computed += len(indices)
        return compute_kernel_rows(indices, self.ds, self.params, self.self_dots, self.workers)


def make_cache(
    n: int,
    cfg: SolverConfig,
    policy: str = "none",
    capacity: int = 512,
    lam: float = 2.0,
    workers: int = 1,
    reuse_unit: str = "iterations",
) -> KernelCache:
    size = capacity if policy != "none" else 0
    return KernelCache(n, CacheConfig(size, policy, lam, workers, cfg.q, reuse_unit))


def train_binary(
    ds: Dataset,
    y,
    cfg: SolverConfig,
    cache: KernelCache | None = None,
    source: KernelSource | None = None,
    labels: tuple[float, float] = (1.0, -1.0),
) -> TrainResult:
    y = np.asarray(y, dtype=np.float64)
    n = ds.n
    if len(y) != n:
        raise ValueError("label vector length differs from dataset")
    if not ((y == 1) | (y == -1)).all():
        raise ValueError("binary labels must be +1/-1")
    if not (y > 0).any() or not (y < 0).any():
        raise DatasetError("degenerate labels")
    if cache is None:
        cache = make_cache(n, cfg)
    if cache.n != n:
        raise ValueError("cache sized for a different dataset")
    if cache.config.q != cfg.q:
        raise ValueError("cache q differs from solver q")
    if source is None:
        source = KernelSource(ds, cfg.params, cfg.workers)
    C = cfg.params.C
    q = cfg.q
    n_keep = cfg.working_set_size - q

    cache.begin_solver()
    base = cache.last_iteration
    trace = AccessTrace(n=n, q=q, origin=base)
    cache.recorder = trace
    stats_before = cache.stats.copy()
    state = SolverState(alpha=np.zeros(n), f=-y.copy())
    pairs = [] if cfg.record_pairs else None
    buffer: dict[int, np.ndarray] = {}
    retained: list[int] = []
    converged = False
    total_updates = 0
    try:
        for t in range(1, cfg.outer_cap(n) + 1):
            up = upper_mask(state.alpha, y, C)
            low = lower_mask(state.alpha, y, C)
            if not up.any() or not low.any() or is_converged(state.f[up].min(), state.f[low].max(), cfg.eps):
                converged = True
                break
            if t == 1:
                up_new, low_new = _violator_halves(state.f, state.alpha, y, C, cfg.working_set_size)
                new = up_new + low_new
                keep_next = up_new[: (n_keep + 1) // 2] + low_new[: n_keep // 2]
            else:
                new = select_new_violators(state.f, state.alpha, y, C, q, exclude=retained)
                keep_next = (new + retained)[:n_keep]
            if not new:
                break
            it = base + t
            hits, misses = cache.access_batch(new, it)
            fresh = source.rows(misses)
            cache.insert_batch(fresh, it)
            cache.end_iteration()
            for i, row in hits:
                buffer[i] = row
            for r in fresh:
                buffer[r.row_index] = r.values
            ws = new + retained
            rows = np.vstack([buffer[i] for i in ws])
            state.working_set = ws
            state.iteration = t
            updates, _ = solve_working_set(state, ws, rows, y, C, cfg.eps, cfg.max_inner, pairs)
            total_updates += updates
            retained = keep_next
            buffer = {i: buffer[i] for i in retained}
    finally:
        cache.recorder = None
    trace.total_iterations = state.iteration
    rho = compute_rho(state.f, state.alpha, y, C)
    model = SvmModel.from_solution(ds, state.alpha, y, rho, cfg.params, labels)
    return TrainResult(model, trace, cache.stats.since(stats_before), state, converged, total_updates, pairs)


@dataclass
class MultiResult:
    model: OneVsAllModel
    results: list[TrainResult]
    skipped: list[float]

    @property
    def per_solver_stats(self) -> list[CacheStats]:
        return [r.stats for r in self.results]

    @property
    def stats(self) -> CacheStats:
        return CacheStats.merge(self.per_solver_stats)


def train_multioutput(
    ds: Dataset,
    cfg: SolverConfig,
    cache: KernelCache | None = None,
    targets: list[float] | None = None,
) -> MultiResult:
    """One-vs-all: one binary solver per label, run in sequence on one shared cache.

    For multi-label datasets each label column is binarized independently.
    """
    if cache is None:
        cache = make_cache(ds.n, cfg)
    labels = distinct_labels(ds) if targets is None else list(targets)
    if ds.label_sets is None and len(labels) < 2:
        raise DatasetError("degenerate labels")
    source = KernelSource(ds, cfg.params, cfg.workers)
    models, results, skipped = [], [], []
    for lab in labels:
        y = binarize_labels(ds, lab)
        if (y > 0).all():
            log.warning("skipping label %s: no negative instances", lab)
            skipped.append(lab)
            continue
        res = train_binary(ds, y, cfg, cache, source, labels=(lab, math.nan))
        models.append(res.model)
        results.append(res)
    return MultiResult(OneVsAllModel(models, multilabel=ds.label_sets is not None), results, skipped)
