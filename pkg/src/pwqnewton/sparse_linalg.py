"""Sparse matrix storage and kernels.

Row-compressed real matrices with exact, reproducible matrix-vector
products (summation runs left to right in stored order, so repeated runs
are bitwise identical), Matrix Market coordinate-format ingestion, and
the deterministic chaotic scalar sequence used to build synthetic test
problems.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Iterable, TextIO

import numpy as np


class MatrixMarketError(ValueError):
    """Malformed Matrix Market input."""


class MatvecCounter:
    """Tally of matrix-vector kernel calls for one solver run.

    Owned by the run, not by the matrix: independent solves sharing a
    matrix keep independent counts. Incrementing is thread safe so that
    callers may run independent solves concurrently.
    """

    __slots__ = ("_lock", "count")

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self.count = 0

    def add(self, k: int = 1) -> None:
        with self._lock:
            self.count += k


class SparseMatrix:
    """Immutable CSR matrix over float64.

    Column indices are strictly increasing within each row and live in
    [0, n); stored values are finite (explicit zeros are kept and count
    toward ``nz``). The underlying arrays are marked read-only, so a
    constructed matrix can be shared freely across threads.
    """

    __slots__ = ("m", "n", "indptr", "indices", "data", "_row_cols", "_row_vals")

    def __init__(self, m, n, indptr, indices, data, validate=True):
        self.m = int(m)
        self.n = int(n)
        self.indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(indices, dtype=np.int64)
        self.data = np.ascontiguousarray(data, dtype=np.float64)
        if validate:
            self._validate()
        for arr in (self.indptr, self.indices, self.data):
            arr.flags.writeable = False
        # per-row Python lists: the kernels below run element by element
        # and plain lists index several times faster than ndarray scalars
        ptr = self.indptr.tolist()
        cols = self.indices.tolist()
        vals = self.data.tolist()
        self._row_cols = [cols[ptr[i]:ptr[i + 1]] for i in range(self.m)]
        self._row_vals = [vals[ptr[i]:ptr[i + 1]] for i in range(self.m)]

    def _validate(self) -> None:
        if self.m < 0 or self.n < 0:
            raise ValueError("negative dimension")
        if self.indptr.shape != (self.m + 1,):
            raise ValueError("indptr must have length m+1")
        if self.indptr[0] != 0 or self.indptr[-1] != len(self.indices):
            raise ValueError("indptr does not cover the index array")
        if np.any(np.diff(self.indptr) < 0):
            raise ValueError("indptr must be non-decreasing")
        if len(self.indices) != len(self.data):
            raise ValueError("indices and data lengths differ")
        if len(self.indices):
            if self.indices.min() < 0 or self.indices.max() >= self.n:
                raise ValueError("column index out of range")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("non-finite stored value")
        for i in range(self.m):
            row = self.indices[self.indptr[i]:self.indptr[i + 1]]
            if len(row) > 1 and np.any(np.diff(row) <= 0):
                raise ValueError(f"row {i}: column indices not strictly increasing")

    @property
    def nz(self) -> int:
        return len(self.data)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.m, self.n)

    @classmethod
    def from_coo(cls, m, n, rows, cols, values) -> "SparseMatrix":
        """Build from 0-based coordinate triplets; duplicate entries are summed."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        if not (len(rows) == len(cols) == len(values)):
            raise ValueError("coordinate arrays must have equal length")
        if len(rows) and (rows.min() < 0 or rows.max() >= m or cols.min() < 0 or cols.max() >= n):
            raise ValueError("coordinate index out of range")
        order = np.lexsort((cols, rows))
        rows, cols, values = rows[order], cols[order], values[order]
        out_r, out_c, out_v = [], [], []
        for r, c, v in zip(rows.tolist(), cols.tolist(), values.tolist()):
            if out_r and out_r[-1] == r and out_c[-1] == c:
                out_v[-1] += v
            else:
                out_r.append(r)
                out_c.append(c)
                out_v.append(v)
        indptr = np.zeros(m + 1, dtype=np.int64)
        for r in out_r:
            indptr[r + 1] += 1
        indptr = np.cumsum(indptr)
        return cls(m, n, indptr, np.array(out_c, dtype=np.int64),
                   np.array(out_v, dtype=np.float64))

    @classmethod
    def from_dense(cls, arr) -> "SparseMatrix":
        arr = np.asarray(arr, dtype=np.float64)
        rows, cols = np.nonzero(arr)
        return cls.from_coo(arr.shape[0], arr.shape[1], rows, cols, arr[rows, cols])

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.m, self.n))
        for i in range(self.m):
            out[i, self.indices[self.indptr[i]:self.indptr[i + 1]]] = \
                self.data[self.indptr[i]:self.indptr[i + 1]]
        return out


def matvec(A: SparseMatrix, v, counter: MatvecCounter | None = None) -> np.ndarray:
    """Product A @ v with left-to-right accumulation within each row."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (A.n,):
        raise ValueError(f"matvec: expected vector of length {A.n}, got {v.shape}")
    if counter is not None:
        counter.add()
    vl = v.tolist()
    out = [0.0] * A.m
    for i in range(A.m):
        s = 0.0
        vals = A._row_vals[i]
        cols = A._row_cols[i]
        for k in range(len(vals)):
            s += vals[k] * vl[cols[k]]
        out[i] = s
    return np.array(out)


def matvec_transpose(A: SparseMatrix, u, counter: MatvecCounter | None = None) -> np.ndarray:
    """Product A.T @ u; scatter order is row-major traversal of A."""
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (A.m,):
        raise ValueError(f"matvec_transpose: expected vector of length {A.m}, got {u.shape}")
    if counter is not None:
        counter.add()
    ul = u.tolist()
    out = [0.0] * A.n
    for i in range(A.m):
        ui = ul[i]
        if ui == 0.0:
            continue
        vals = A._row_vals[i]
        cols = A._row_cols[i]
        for k in range(len(vals)):
            out[cols[k]] += vals[k] * ui
    return np.array(out)


def row_sq_norms(A: SparseMatrix) -> np.ndarray:
    """Squared Euclidean norm of every row; zero for null rows."""
    out = [0.0] * A.m
    for i in range(A.m):
        s = 0.0
        for v in A._row_vals[i]:
            s += v * v
        out[i] = s
    return np.array(out)


# -- Matrix Market coordinate format --------------------------------------

def parse_matrix_market(stream: TextIO | Iterable[str]) -> SparseMatrix:
    """Read a real coordinate-format Matrix Market matrix.

    Accepts ``general`` and ``symmetric`` matrices; symmetric input is
    expanded to general storage. Indices are converted to 0-based, and
    duplicate coordinates are summed per the format's convention.
    """
    lines = iter(stream)
    try:
        header = next(lines)
    except StopIteration:
        raise MatrixMarketError("empty stream") from None
    parts = header.strip().split()
    if len(parts) != 5 or parts[0] != "%%MatrixMarket":
        raise MatrixMarketError(f"malformed header: {header.strip()!r}")
    _, obj, fmt, field, symm = (p.lower() for p in parts)
    if obj != "matrix" or fmt != "coordinate":
        raise MatrixMarketError(f"unsupported object/format: {obj}/{fmt}")
    if field != "real":
        raise MatrixMarketError(f"unsupported field: {field}")
    if symm not in ("general", "symmetric"):
        raise MatrixMarketError(f"unsupported symmetry: {symm}")

    size_line = None
    for line in lines:
        s = line.strip()
        if not s or s.startswith("%"):
            continue
        size_line = s
        break
    if size_line is None:
        raise MatrixMarketError("missing size line")
    try:
        m, n, nz = (int(tok) for tok in size_line.split())
    except ValueError:
        raise MatrixMarketError(f"malformed size line: {size_line!r}") from None
    if m < 0 or n < 0 or nz < 0:
        raise MatrixMarketError("negative size")

    rows, cols, vals = [], [], []
    seen = 0
    for line in lines:
        s = line.strip()
        if not s or s.startswith("%"):
            continue
        toks = s.split()
        if len(toks) != 3:
            raise MatrixMarketError(f"malformed entry: {s!r}")
        try:
            i, j, v = int(toks[0]), int(toks[1]), float(toks[2])
        except ValueError:
            raise MatrixMarketError(f"non-numeric entry: {s!r}") from None
        if not (1 <= i <= m) or not (1 <= j <= n):
            raise MatrixMarketError(f"index ({i},{j}) outside declared {m}x{n}")
        if not np.isfinite(v):
            raise MatrixMarketError(f"non-finite value in entry: {s!r}")
        rows.append(i - 1)
        cols.append(j - 1)
        vals.append(v)
        if symm == "symmetric" and i != j:
            rows.append(j - 1)
            cols.append(i - 1)
            vals.append(v)
        seen += 1
        if seen == nz:
            break
    if seen != nz:
        raise MatrixMarketError(f"truncated body: expected {nz} entries, found {seen}")
    return SparseMatrix.from_coo(m, n, rows, cols, vals)


def serialize_matrix_market(A: SparseMatrix, stream: TextIO) -> None:
    """Write coordinate-format ``general`` output that round-trips exactly."""
    stream.write("%%MatrixMarket matrix coordinate real general\n")
    stream.write(f"{A.m} {A.n} {A.nz}\n")
    for i in range(A.m):
        for k in range(A.indptr[i], A.indptr[i + 1]):
            stream.write(f"{i + 1} {A.indices[k] + 1} {float(A.data[k])!r}\n")


def load_matrix_market(path) -> SparseMatrix:
    with open(path, "r", encoding="ascii") as f:
        return parse_matrix_market(f)


# -- deterministic quasirandom scalars -------------------------------------

@dataclass
class LogisticSequence:
    """State of the chaotic recurrence x_{k+1} = 1 - 2 x_k**2, x_0 = 0.4.

    Every value lies in [-1, 1]; the trajectory is fully determined by
    IEEE double rounding, so independently constructed sequences agree
    bitwise.
    """

    value: float = 0.4
    step: int = 0


def logistic_next(state: LogisticSequence) -> float:
    """Advance one step and return the new value."""
    state.value = 1.0 - 2.0 * state.value * state.value
    state.step += 1
    return state.value


def logistic_values(count: int) -> np.ndarray:
    """First ``count`` values of the sequence, starting at x_0 = 0.4."""
    seq = LogisticSequence()
    out = np.empty(count)
    for k in range(count):
        out[k] = seq.value
        logistic_next(seq)
    return out
