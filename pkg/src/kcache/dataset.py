"""LIBSVM text datasets held as sparse instances."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class SparseInstance:
    """Feature indices are 1-based and strictly increasing."""

    indices: tuple[int, ...] = ()
    values: tuple[float, ...] = ()

    def __post_init__(self):
        if len(self.indices) != len(self.values):
            raise DatasetError("indices and values differ in length")
        prev = 0
        for idx, val in zip(self.indices, self.values):
            if idx <= prev:
                raise DatasetError(f"feature index {idx} not strictly increasing")
            if not math.isfinite(val):
                raise DatasetError(f"non-finite value at feature {idx}")
            prev = idx

    @classmethod
    def from_dict(cls, feats: dict[int, float]) -> "SparseInstance":
        items = sorted(feats.items())
        return cls(tuple(int(k) for k, _ in items), tuple(float(v) for _, v in items))

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.indices, self.values))


@dataclass
class Dataset:
    instances: list[SparseInstance]
    labels: np.ndarray
    d: int
    # Per-instance label sets, only for multi-label files.
    label_sets: list[tuple[float, ...]] | None = None
    _csr: sp.csr_matrix | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.float64)
        if len(self.instances) == 0:
            raise DatasetError("empty dataset")
        if len(self.instances) != len(self.labels):
            raise DatasetError("instances and labels differ in length")
        max_idx = max((inst.indices[-1] for inst in self.instances if inst.indices), default=0)
        if self.d < max_idx:
            raise DatasetError(f"dimension {self.d} below max feature index {max_idx}")

    @property
    def n(self) -> int:
        return len(self.instances)

    def csr(self) -> sp.csr_matrix:
        """CSR view with column j holding feature j+1; column indices sorted per row."""
        if self._csr is None:
            self._csr = to_csr(self.instances, self.d)
        return self._csr

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.instances == other.instances
            and np.array_equal(self.labels, other.labels, equal_nan=True)
            and self.d == other.d
            and self.label_sets == other.label_sets
        )


def to_csr(instances: Sequence[SparseInstance], d: int) -> sp.csr_matrix:
    indptr = np.zeros(len(instances) + 1, dtype=np.int64)
    cols: list[int] = []
    vals: list[float] = []
    for i, inst in enumerate(instances):
        cols.extend(j - 1 for j in inst.indices)
        vals.extend(inst.values)
        indptr[i + 1] = len(cols)
    mat = sp.csr_matrix(
        (np.asarray(vals, dtype=np.float64), np.asarray(cols, dtype=np.int64), indptr),
        shape=(len(instances), max(d, 1)),
    )
    mat.has_sorted_indices = True
    return mat


def _parse_number(tok: str, lineno: int, what: str) -> float:
    try:
        val = float(tok)
    except ValueError:
        raise DatasetError(f"line {lineno}: non-numeric {what} {tok!r}") from None
    if not math.isfinite(val):
        raise DatasetError(f"line {lineno}: non-finite {what} {tok!r}")
    return val


def parse_libsvm(text: str | Iterable[str], d: int | None = None, multilabel: bool = False) -> Dataset:
    """Parse LIBSVM text.

    ``d`` may raise the inferred dimension but never lower it. With
    ``multilabel`` the label token is a comma-separated label list (possibly
    empty) and ``labels`` holds the first label of each instance, or nan.
    """
    lines = text.splitlines() if isinstance(text, str) else text
    instances: list[SparseInstance] = []
    labels: list[float] = []
    label_sets: list[tuple[float, ...]] = []
    max_idx = 0
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        toks = line.split()
        if multilabel:
            if ":" in toks[0]:
                # instance with an empty label set
                lab_toks, feat_toks = [], toks
            else:
                lab_toks = [t for t in toks[0].split(",") if t]
                feat_toks = toks[1:]
            lset = tuple(_parse_number(t, lineno, "label") for t in lab_toks)
            label_sets.append(lset)
            labels.append(lset[0] if lset else math.nan)
        else:
            labels.append(_parse_number(toks[0], lineno, "label"))
            feat_toks = toks[1:]
        idxs: list[int] = []
        vals: list[float] = []
        for tok in feat_toks:
            key, sep, val = tok.partition(":")
            if not sep:
                raise DatasetError(f"line {lineno}: malformed feature {tok!r}")
            try:
                idx = int(key)
            except ValueError:
                raise DatasetError(f"line {lineno}: non-numeric index {key!r}") from None
            if idx < 1:
                raise DatasetError(f"line {lineno}: feature index {idx} must be positive")
            if idxs and idx <= idxs[-1]:
                raise DatasetError(f"line {lineno}: non-increasing index {idx}")
            idxs.append(idx)
            vals.append(_parse_number(val, lineno, "value"))
        if idxs:
            max_idx = max(max_idx, idxs[-1])
        instances.append(SparseInstance(tuple(idxs), tuple(vals)))
    if not instances:
        raise DatasetError("empty dataset")
    dim = max_idx if d is None else max(d, max_idx)
    return Dataset(instances, np.asarray(labels), dim, label_sets if multilabel else None)


def load_libsvm(path, d: int | None = None, multilabel: bool = False) -> Dataset:
    with open(path) as fh:
        return parse_libsvm(fh, d=d, multilabel=multilabel)


def format_number(x: float) -> str:
    x = float(x)
    if x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def dump_libsvm(ds: Dataset) -> str:
    out = []
    for i, inst in enumerate(ds.instances):
        if ds.label_sets is not None:
            head = ",".join(format_number(v) for v in ds.label_sets[i])
        else:
            head = format_number(ds.labels[i])
        feats = " ".join(f"{j}:{format_number(v)}" for j, v in zip(inst.indices, inst.values))
        out.append(f"{head} {feats}".rstrip() if head else feats)
    return "\n".join(out) + "\n"


def binarize_labels(ds: Dataset, target: float) -> np.ndarray:
    """+1 where the label equals ``target`` exactly, else -1."""
    if ds.label_sets is not None:
        hit = np.array([target in s for s in ds.label_sets])
    else:
        hit = ds.labels == target
    if not hit.any():
        raise DatasetError(f"label not present: {format_number(target)}")
    return np.where(hit, 1.0, -1.0)


def distinct_labels(ds: Dataset) -> list[float]:
    """Labels in order of first appearance."""
    seen: dict[float, None] = {}
    if ds.label_sets is not None:
        for s in ds.label_sets:
            for v in s:
                seen.setdefault(v)
    else:
        for v in ds.labels.tolist():
            seen.setdefault(v)
    return list(seen)


def subset(ds: Dataset, rows: Sequence[int]) -> Dataset:
    sets = [ds.label_sets[i] for i in rows] if ds.label_sets is not None else None
    return Dataset([ds.instances[i] for i in rows], ds.labels[list(rows)], ds.d, sets)


def from_dense(X, y) -> Dataset:
    """Build a dataset from a dense matrix, dropping exact zeros."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    insts = []
    for row in X:
        nz = np.flatnonzero(row)
        insts.append(SparseInstance(tuple(int(j) + 1 for j in nz), tuple(float(v) for v in row[nz])))
    return Dataset(insts, np.asarray(y, dtype=np.float64), X.shape[1])
