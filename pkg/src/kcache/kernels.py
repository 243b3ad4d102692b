"""Kernel row computation.

Every dot product is summed sequentially in ascending feature order, which
makes a row independent of the batch it was computed in and makes
``row(i)[j] == row(j)[i]`` bit for bit. Cached rows can then be compared
exactly against recomputed ones.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .dataset import Dataset

KERNELS = ("linear", "gaussian", "sigmoid")


@dataclass(frozen=True)
class KernelParams:
    kind: str = "gaussian"
    gamma: float = 0.5
    coef0: float = 0.0
    C: float = 1.0

    def __post_init__(self):
        if self.kind not in KERNELS:
            raise ValueError(f"unknown kernel {self.kind!r}")
        if self.kind != "linear" and not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not self.C > 0:
            raise ValueError("C must be positive")


@dataclass
class KernelRow:
    row_index: int
    values: np.ndarray | None


def _sequential_row_sums(mat: sp.csr_matrix) -> np.ndarray:
    # Row sums accumulated left to right, same order as the sparse product.
    nnz = np.diff(mat.indptr)
    out = np.zeros(mat.shape[0])
    if mat.nnz == 0:
        return out
    width = int(nnz.max())
    padded = np.zeros((mat.shape[0], width))
    rows = np.repeat(np.arange(mat.shape[0]), nnz)
    cols = np.arange(mat.nnz) - np.repeat(mat.indptr[:-1], nnz)
    padded[rows, cols] = mat.data
    for k in range(width):
        out += padded[:, k]
    return out


def self_dots_of(mat: sp.csr_matrix) -> np.ndarray:
    sq = mat.copy()
    sq.data = sq.data * sq.data
    return _sequential_row_sums(sq)


def precompute_self_dots(ds: Dataset) -> np.ndarray:
    """||x_i||^2 for every instance."""
    return self_dots_of(ds.csr())


def _align(a: sp.csr_matrix, b: sp.csr_matrix) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    d = max(a.shape[1], b.shape[1])
    if a.shape[1] != d:
        a = sp.csr_matrix((a.data, a.indices, a.indptr), shape=(a.shape[0], d))
    if b.shape[1] != d:
        b = sp.csr_matrix((b.data, b.indices, b.indptr), shape=(b.shape[0], d))
    return a, b


def dot_block(a: sp.csr_matrix, b: sp.csr_matrix) -> np.ndarray:
    """Dense ``a @ b.T``; each entry is an ascending-feature sequential sum."""
    a, b = _align(a, b)
    a.sort_indices()
    # csr @ csr walks the nonzeros of each left row in stored order and
    # scatters into an accumulator per output column.
    prod = a @ b.T.tocsr()
    return prod.toarray()


def kernel_block(
    a: sp.csr_matrix,
    b: sp.csr_matrix,
    params: KernelParams,
    sd_a: np.ndarray | None = None,
    sd_b: np.ndarray | None = None,
) -> np.ndarray:
    dots = dot_block(a, b)
    if params.kind == "linear":
        return dots
    if params.kind == "sigmoid":
        return np.tanh(params.gamma * dots + params.coef0)
    if sd_a is None:
        sd_a = self_dots_of(a)
    if sd_b is None:
        sd_b = self_dots_of(b)
    dist = (sd_a[:, None] + sd_b[None, :]) - 2.0 * dots
    np.maximum(dist, 0.0, out=dist)
    return np.exp(-params.gamma * dist)


def compute_kernel_rows(
    indices: Sequence[int],
    ds: Dataset,
    params: KernelParams,
    self_dots: np.ndarray | None = None,
    workers: int = 1,
) -> list[KernelRow]:
    """One dense kernel row per requested instance, against the whole dataset."""
    n = ds.n
    idx = np.asarray(list(indices), dtype=np.int64)
    if idx.size == 0:
        return []
    if idx.min() < 0 or idx.max() >= n:
        raise IndexError(f"row index out of range for n={n}")
    X = ds.csr()
    if params.kind == "gaussian" and self_dots is None:
        self_dots = precompute_self_dots(ds)

    def block(chunk: np.ndarray) -> np.ndarray:
        sd_a = self_dots[chunk] if self_dots is not None else None
        return kernel_block(X[chunk], X, params, sd_a, self_dots)

    if workers > 1 and idx.size > 1:
        chunks = np.array_split(idx, min(workers, idx.size))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            mats = list(pool.map(block, chunks))
        dense = np.vstack(mats)
    else:
        dense = block(idx)
    out = []
    for i, row in zip(idx.tolist(), dense):
        row = row.copy()
        row.setflags(write=False)
        out.append(KernelRow(i, row))
    return out


def kernel_value(x: dict[int, float], z: dict[int, float], params: KernelParams) -> float:
    """Scalar kernel on two sparse dicts; slow path for checks."""
    dot = 0.0
    for j in sorted(set(x) & set(z)):
        dot += x[j] * z[j]
    if params.kind == "linear":
        return dot
    if params.kind == "sigmoid":
        return float(np.tanh(params.gamma * dot + params.coef0))
    sx = 0.0
    for j in sorted(x):
        sx += x[j] * x[j]
    sz = 0.0
    for j in sorted(z):
        sz += z[j] * z[j]
    return float(np.exp(-params.gamma * max(sx + sz - 2.0 * dot, 0.0)))
