"""Kernel-row access traces and the reuse/frequency analytics run over them."""

from __future__ import annotations

import io
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

LEVELS = ("small", "medium", "large", "huge")


class TraceError(ValueError):
    pass


class TraceEvent(NamedTuple):
    iteration: int
    row_index: int
    seq: int


@dataclass
class AccessTrace:
    """Ordered (iteration, row) requests. Iterations are 1-based."""

    n: int
    q: int
    iterations: list[int] = field(default_factory=list)
    rows: list[int] = field(default_factory=list)
    total_iterations: int | None = None
    # subtracted from the iteration numbers handed to record()
    origin: int = 0

    def record(self, iteration: int, rows) -> None:
        it = iteration - self.origin
        self.iterations.extend([it] * len(rows))
        self.rows.extend(rows)

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def T(self) -> int:
        if self.total_iterations is not None:
            return self.total_iterations
        return self.iterations[-1] if self.iterations else 0

    @property
    def events(self) -> list[TraceEvent]:
        return [TraceEvent(it, r, k) for k, (it, r) in enumerate(zip(self.iterations, self.rows))]

    def batches(self) -> Iterator[tuple[int, list[int]]]:
        """Yield (iteration, rows) grouped by consecutive iteration number."""
        start = 0
        its = self.iterations
        for k in range(1, len(its) + 1):
            if k == len(its) or its[k] != its[start]:
                yield its[start], self.rows[start:k]
                start = k

    def validate(self) -> None:
        prev_it = 0
        seen: set[int] = set()
        for it, r in zip(self.iterations, self.rows):
            if it < prev_it:
                raise TraceError(f"iteration {it} after {prev_it}")
            if it != prev_it:
                seen = set()
                prev_it = it
            if not 0 <= r < self.n:
                raise TraceError(f"row {r} outside [0, {self.n})")
            if r in seen:
                raise TraceError(f"row {r} repeated within iteration {it}")
            seen.add(r)
            # a solver's first iteration fills the whole working set (up to 2q)
            if len(seen) > 2 * self.q:
                raise TraceError(f"iteration {it} has more than 2q={2 * self.q} accesses")

    def __eq__(self, other):
        if not isinstance(other, AccessTrace):
            return NotImplemented
        return (
            self.n == other.n
            and self.q == other.q
            and self.iterations == other.iterations
            and self.rows == other.rows
            and self.T == other.T
        )


def write_trace(trace: AccessTrace, fh) -> None:
    fh.write(f"# n={trace.n} q={trace.q} iterations={trace.T}\n")
    fh.writelines(f"{it},{r}\n" for it, r in zip(trace.iterations, trace.rows))


def dumps_trace(trace: AccessTrace) -> str:
    buf = io.StringIO()
    write_trace(trace, buf)
    return buf.getvalue()


def read_trace(fh) -> AccessTrace:
    header = fh.readline()
    if not header.startswith("#"):
        raise TraceError("missing trace header")
    fields = dict(tok.split("=", 1) for tok in header[1:].split() if "=" in tok)
    try:
        n, q, T = int(fields["n"]), int(fields["q"]), int(fields["iterations"])
    except (KeyError, ValueError):
        raise TraceError(f"bad trace header: {header.strip()!r}") from None
    trace = AccessTrace(n=n, q=q, total_iterations=T)
    for lineno, line in enumerate(fh, start=2):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        a, sep, b = line.partition(",")
        try:
            trace.iterations.append(int(a))
            trace.rows.append(int(b))
        except ValueError:
            raise TraceError(f"line {lineno}: malformed event {line!r}") from None
    trace.validate()
    return trace


def loads_trace(text: str) -> AccessTrace:
    return read_trace(io.StringIO(text))


def load_trace(path) -> AccessTrace:
    with open(path) as fh:
        return read_trace(fh)


def save_trace(trace: AccessTrace, path) -> None:
    with open(path, "w", newline="\n") as fh:
        write_trace(trace, fh)


def classify_reuse_interval(R: float, s: float) -> str:
    if R <= 0:
        raise ValueError(f"reuse interval must be positive, got {R}")
    if s <= 0:
        raise ValueError("cache capacity must be positive")
    if R < s:
        return "small"
    if R < 2 * s:
        return "medium"
    if R < 3 * s:
        return "large"
    return "huge"


def stage_of(iteration: int, k: int, T: int) -> int:
    """1-based stage of ``iteration`` when 1..T is cut into k even parts."""
    return max(1, min(k, math.ceil(iteration * k / T)))


def reuse_intervals(trace: AccessTrace, unit: str = "iterations") -> list[tuple[int, int]]:
    """(position of second access, R) for every repeated access."""
    if unit not in ("iterations", "accesses"):
        raise ValueError(f"unknown reuse-interval unit {unit!r}")
    last: dict[int, int] = {}
    out = []
    for pos, (it, r) in enumerate(zip(trace.iterations, trace.rows)):
        clock = it if unit == "iterations" else pos
        prev = last.get(r)
        if prev is not None:
            out.append((pos, clock - prev))
        last[r] = clock
    return out


@dataclass
class StageCdf:
    stage: int
    counts: tuple[int, int, int, int]

    @property
    def repeated(self) -> int:
        return sum(self.counts)

    @property
    def empty(self) -> bool:
        return self.repeated == 0

    @property
    def cumulative(self) -> tuple[float, ...]:
        if self.empty:
            return (math.nan,) * len(LEVELS)
        return tuple(float(c) / self.repeated for c in np.cumsum(self.counts))


def reuse_interval_cdf_by_stage(
    trace: AccessTrace, stages: int, s: int, unit: str = "iterations"
) -> list[StageCdf]:
    """Cumulative reuse-interval level fractions per training stage.

    An interval belongs to the stage of its second access. Stages with no
    repeated access come back with ``empty`` set and nan fractions.
    """
    if stages < 1:
        raise ValueError("stages must be >= 1")
    if len(trace) == 0:
        raise TraceError("empty trace")
    T = trace.T
    counts = [[0] * len(LEVELS) for _ in range(stages)]
    for pos, R in reuse_intervals(trace, unit):
        st = stage_of(trace.iterations[pos], stages, T)
        counts[st - 1][LEVELS.index(classify_reuse_interval(R, s))] += 1
    return [StageCdf(k + 1, tuple(c)) for k, c in enumerate(counts)]


def stage_frequencies(trace: AccessTrace, stages: int) -> np.ndarray:
    """(stages, n) access counts."""
    T = trace.T
    freq = np.zeros((stages, trace.n), dtype=np.int64)
    if len(trace) == 0:
        return freq
    its = np.asarray(trace.iterations, dtype=np.int64)
    st = np.clip(np.ceil(its * stages / T).astype(np.int64), 1, stages) - 1
    np.add.at(freq, (st, np.asarray(trace.rows, dtype=np.int64)), 1)
    return freq


def frequency_difference_by_stage(trace: AccessTrace, stages: int) -> Counter:
    """Histogram of |freq(stage t+1) - freq(stage t)| over all n items."""
    if stages < 2:
        raise ValueError("stages must be >= 2")
    freq = stage_frequencies(trace, stages)
    diffs = np.abs(np.diff(freq, axis=0)).ravel()
    vals, cnts = np.unique(diffs, return_counts=True)
    return Counter(dict(zip(vals.tolist(), cnts.tolist())))


def cdf_csv(cdfs: list[StageCdf]) -> str:
    lines = ["stage,level,cumulative_fraction"]
    for c in cdfs:
        for level, frac in zip(LEVELS, c.cumulative):
            lines.append(f"{c.stage},{level},{frac!r}")
    return "\n".join(lines) + "\n"


def diff_csv(hist: Counter) -> str:
    lines = ["difference,count"]
    lines += [f"{d},{hist[d]}" for d in sorted(hist)]
    return "\n".join(lines) + "\n"
