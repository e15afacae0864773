"""Core matrices of jackknife replicates.

Both algorithms write replicate ``j`` as ``X^(j) = L T_j M^T`` with fixed
orthonormal ``L, M`` and a small ``s x s`` core ``T_j``. Cores are stored
either densely or as rank-one modifications ``C_j = base + x_j y_j^T`` of a
shared base. An optional orthogonal ``frame`` ``W`` records that the stored
cores are ``C_j`` while the cores in the result's own basis are
``T_j = W^T C_j W``; Frobenius and Schatten quantities are unaffected, so
estimators work on the stored form directly.
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True, eq=False)
class CoreReplicates:
    dense: np.ndarray = field(default=None, repr=False)
    base: np.ndarray = field(default=None, repr=False)
    xs: np.ndarray = field(default=None, repr=False)
    ys: np.ndarray = field(default=None, repr=False)
    frame: np.ndarray = field(default=None, repr=False)
    fallback: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if (self.dense is None) == (self.base is None):
            raise ValueError("give either dense cores or a rank-one representation")
        if self.base is not None and (self.xs is None or self.ys is None):
            raise ValueError("rank-one representation needs xs and ys")
        if self.fallback is None:
            object.__setattr__(self, "fallback", np.zeros(self.count, dtype=bool))

    @classmethod
    def from_dense(cls, cores, frame=None, fallback=None):
        return cls(dense=np.asarray(cores, dtype=np.float64), frame=frame, fallback=fallback)

    @classmethod
    def from_rank_one(cls, base, xs, ys, frame=None, fallback=None):
        return cls(base=np.asarray(base, dtype=np.float64), xs=np.asarray(xs, dtype=np.float64),
                   ys=np.asarray(ys, dtype=np.float64), frame=frame, fallback=fallback)

    @property
    def representation(self):
        return "dense" if self.dense is not None else "rank-one"

    @property
    def count(self):
        """Number of replicates (the sketch size ``s``)."""
        return (self.dense if self.dense is not None else self.xs).shape[0]

    @property
    def core_shape(self):
        return self.dense.shape[1:] if self.dense is not None else self.base.shape

    def stored(self):
        """Cores in storage coordinates, shape ``(count, n1, n2)``."""
        if self.dense is not None:
            return self.dense
        return self.base[None, :, :] + self.xs[:, :, None] * self.ys[:, None, :]

    def materialize(self):
        """Cores ``T_j`` in the result's own basis."""
        cores = self.stored()
        if self.frame is None:
            return np.array(cores)
        W = self.frame
        return np.einsum("ai,jab,bk->jik", W, cores, W, optimize=True)

    def stored_mean(self):
        if self.dense is not None:
            total = np.zeros(self.core_shape)
            for core in self.dense:
                total += core
            return total / self.count
        return self.base + (self.xs.T @ self.ys) / self.count

    def mean(self):
        """``T_bar`` in the result's own basis."""
        m = self.stored_mean()
        if self.frame is None:
            return m
        return self.frame.T @ m @ self.frame

    def deviations_sq(self):
        """``||C_j - C_bar||_F^2`` for every replicate, in fixed order.

        The rank-one form expands ``||D + x y^T||^2`` with
        ``D = base - C_bar = -(X^T Y)/s`` and costs ``O(n^2)`` per replicate.
        """
        if self.dense is not None:
            mean = self.stored_mean()
            return np.array([np.sum((core - mean) ** 2) for core in self.dense])
        D = -(self.xs.T @ self.ys) / self.count
        cross = np.einsum("ja,ab,jb->j", self.xs, D, self.ys)
        out = (np.sum(D * D) + 2.0 * cross
               + np.sum(self.xs ** 2, axis=1) * np.sum(self.ys ** 2, axis=1))
        return np.maximum(out, 0.0)

    def to_dense(self):
        """Same replicates, dense storage, frame applied."""
        return CoreReplicates.from_dense(self.materialize(), fallback=self.fallback)
