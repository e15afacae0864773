"""Test matrices, Gaussian sketches, kernel matrices and the ``MJK1`` file format."""

import csv
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .errors import CsvParseError, IngestionError, MatrixFormatError, ParameterError
from .rng import MATRIX_DOMAIN, SKETCH_DOMAIN, check_seed, gaussian_matrix

KINDS = ("dense", "diagonal", "symmetric-dense")
_KIND_TAG = {"dense": 0, "diagonal": 1, "symmetric-dense": 2}
_TAG_KIND = {v: k for k, v in _KIND_TAG.items()}
MAGIC = b"MJK1"
_HEADER = struct.Struct("<4sQQB")


@dataclass(frozen=True, eq=False)
class MatrixSource:
    """A real matrix accessed through block products.

    ``payload`` holds the diagonal for ``kind="diagonal"`` and the full
    row-major array otherwise. Diagonal matrices never get densified by the
    product methods, so sketching costs ``O(d s)``.
    """

    kind: str
    shape: tuple
    payload: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown matrix kind {self.kind!r}")
        d1, d2 = (int(x) for x in self.shape)
        if d1 < 1 or d2 < 1:
            raise ParameterError(f"dimensions must be positive, got {self.shape}")
        payload = np.asarray(self.payload, dtype=np.float64)
        if self.kind == "diagonal":
            if d1 != d2 or payload.shape != (d1,):
                raise ParameterError("diagonal matrix needs d1 == d2 and exactly d1 entries")
        else:
            if payload.shape != (d1, d2):
                raise ParameterError(f"payload shape {payload.shape} does not match {(d1, d2)}")
            if self.kind == "symmetric-dense" and (d1 != d2 or not np.array_equal(payload, payload.T)):
                raise ParameterError("symmetric-dense payload is not exactly symmetric")
        payload = payload.copy()
        payload.setflags(write=False)
        object.__setattr__(self, "shape", (d1, d2))
        object.__setattr__(self, "payload", payload)

    @classmethod
    def dense(cls, array, symmetric=False):
        array = np.asarray(array, dtype=np.float64)
        return cls("symmetric-dense" if symmetric else "dense", array.shape, array)

    @classmethod
    def diagonal(cls, entries):
        entries = np.asarray(entries, dtype=np.float64).ravel()
        return cls("diagonal", (entries.size, entries.size), entries)

    @property
    def is_symmetric(self):
        return self.kind in ("diagonal", "symmetric-dense")

    def matmat(self, X):
        """``A @ X``."""
        if self.kind == "diagonal":
            return self.payload[:, None] * X
        return self.payload @ X

    def rmatmat(self, X):
        """``A.T @ X``."""
        if self.kind == "diagonal":
            return self.payload[:, None] * X
        if self.kind == "symmetric-dense":
            return self.payload @ X
        return self.payload.T @ X

    def to_dense(self):
        if self.kind == "diagonal":
            return np.diag(self.payload)
        return np.array(self.payload)

    def fro_norm(self):
        return float(np.linalg.norm(self.payload))

    def singular_values(self):
        """Exact singular values, nonincreasing (dense SVD unless diagonal)."""
        if self.kind == "diagonal":
            return np.sort(np.abs(self.payload))[::-1]
        return np.linalg.svd(self.payload, compute_uv=False)

    def __eq__(self, other):
        if not isinstance(other, MatrixSource):
            return NotImplemented
        return (self.kind == other.kind and self.shape == other.shape
                and np.array_equal(self.payload, other.payload))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class SketchMatrix:
    values: np.ndarray = field(repr=False)
    seed: int

    @property
    def shape(self):
        return self.values.shape


def _check_rank(d, R):
    if d < 1:
        raise ParameterError(f"d must be positive, got {d}")
    if not 0 <= R <= d:
        raise ParameterError(f"need 0 <= R <= d, got R={R}, d={d}")


def gen_noisy_lr(d, R, xi, seed):
    """``diag(1 x R, 0 x (d-R)) + xi/d * G G^T`` with a seeded Gaussian ``G``."""
    _check_rank(d, R)
    if not xi >= 0:
        raise ParameterError(f"xi must be nonnegative, got {xi}")
    A = np.zeros((d, d))
    if xi > 0:
        G = gaussian_matrix(d, d, seed, domain=MATRIX_DOMAIN)
        A = (xi / d) * (G @ G.T)
        A = 0.5 * (A + A.T)
    A[np.arange(R), np.arange(R)] += 1.0
    return MatrixSource.dense(A, symmetric=True)


def gen_exp_decay(d, R, rate):
    """``diag(1 x R, 10^-rate, 10^-2 rate, ..., 10^-(d-R) rate)``."""
    _check_rank(d, R)
    if not rate > 0:
        raise ParameterError(f"rate must be positive, got {rate}")
    tail = 10.0 ** (-rate * np.arange(1, d - R + 1))
    return MatrixSource.diagonal(np.concatenate([np.ones(R), tail]))


def gen_poly_decay(d, R, p):
    """``diag(1 x R, 2^-p, 3^-p, ..., (d-R+1)^-p)``."""
    _check_rank(d, R)
    if not p > 0:
        raise ParameterError(f"p must be positive, got {p}")
    tail = np.arange(2, d - R + 2, dtype=np.float64) ** (-p)
    return MatrixSource.diagonal(np.concatenate([np.ones(R), tail]))


def gaussian_sketch(d, s, seed):
    """Seeded ``d x s`` standard Gaussian test matrix."""
    if s < 1 or d < s:
        raise ParameterError(f"need d >= s >= 1, got d={d}, s={s}")
    seed = check_seed(seed)
    return SketchMatrix(gaussian_matrix(d, s, seed, domain=SKETCH_DOMAIN), seed)


# --------------------------------------------------------------------------
# kernel matrices from tables
# --------------------------------------------------------------------------

def read_table(path, delimiter=",", drop=()):
    """Read a headed numeric CSV; returns ``(column_names, values)``.

    Columns listed in ``drop`` (by header name) are removed before parsing,
    which is how label columns are excluded.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = [h.strip().strip('"') for h in next(reader)]
        except StopIteration:
            raise IngestionError(f"{path}: empty file") from None
        drop = set(drop)
        missing = drop - set(header)
        if missing:
            raise IngestionError(f"columns to drop not in header: {sorted(missing)}")
        keep = [i for i, h in enumerate(header) if h not in drop]
        names = [header[i] for i in keep]
        rows = []
        for lineno, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise IngestionError(f"row {lineno}: expected {len(header)} fields, got {len(row)}")
            vals = []
            for i in keep:
                try:
                    vals.append(float(row[i]))
                except ValueError:
                    raise CsvParseError(lineno, header[i], row[i]) from None
            rows.append(vals)
    if not rows:
        raise IngestionError(f"{path}: no data rows")
    return names, np.array(rows, dtype=np.float64)


def standardize(table, names=None, ddof=0):
    """Zero-mean, unit-variance columns; ``ddof=0`` divides by the population deviation."""
    table = np.asarray(table, dtype=np.float64)
    if table.ndim != 2 or table.shape[0] < 1:
        raise IngestionError("table must be 2-d with at least one row")
    names = names or [str(i) for i in range(table.shape[1])]
    mean = table.mean(axis=0)
    std = table.std(axis=0, ddof=ddof) if table.shape[0] > ddof else np.zeros(table.shape[1])
    for name, sd in zip(names, std):
        if not sd > 0:
            raise IngestionError(f"column {name!r} is constant; cannot standardize")
    return (table - mean) / std


def rbf_kernel(table, sigma, names=None, ddof=0):
    """Gaussian kernel ``exp(-|x_i - x_j|^2 / (2 sigma^2))`` on standardized rows."""
    if not sigma > 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    Z = standardize(table, names, ddof)
    sq = cdist(Z, Z, "sqeuclidean")
    K = np.exp(-sq / (2.0 * sigma ** 2))
    K = 0.5 * (K + K.T)
    np.fill_diagonal(K, 1.0)
    return MatrixSource.dense(K, symmetric=True)


# --------------------------------------------------------------------------
# MJK1 binary format
# --------------------------------------------------------------------------

def save_matrix(m, path):
    header = _HEADER.pack(MAGIC, m.shape[0], m.shape[1], _KIND_TAG[m.kind])
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(m.payload, dtype="<f8").tobytes())


def load_matrix(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise MatrixFormatError(f"{path}: truncated header ({len(data)} bytes)")
    magic, d1, d2, tag = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise MatrixFormatError(f"{path}: bad magic {magic!r}")
    if tag not in _TAG_KIND:
        raise MatrixFormatError(f"{path}: unknown kind tag {tag}")
    kind = _TAG_KIND[tag]
    if d1 == 0 or d2 == 0:
        raise MatrixFormatError(f"{path}: zero dimension ({d1} x {d2})")
    count = d1 if kind == "diagonal" else d1 * d2
    available = (len(data) - _HEADER.size) // 8
    if count > (1 << 62) // 8 or (kind != "diagonal" and d1 > (1 << 62) // d2):
        raise MatrixFormatError(f"{path}: dimensions {d1} x {d2} overflow")
    if available < count:
        raise MatrixFormatError(f"{path}: truncated payload, expected {count} values, found {available}")
    if available > count or (len(data) - _HEADER.size) % 8:
        raise MatrixFormatError(f"{path}: {len(data) - _HEADER.size - 8 * count} trailing bytes")
    values = np.frombuffer(data, dtype="<f8", count=count, offset=_HEADER.size).astype(np.float64)
    if kind != "diagonal":
        values = values.reshape(d1, d2)
    try:
        return MatrixSource(kind, (d1, d2), values)
    except ParameterError as exc:
        raise MatrixFormatError(f"{path}: {exc}") from None
