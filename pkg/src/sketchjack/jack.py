"""Jackknife estimators over replicate cores and scalar replicate lists."""

import math
from dataclasses import dataclass, field

import numpy as np

from .cores import CoreReplicates
from .errors import ParameterError


@dataclass(frozen=True)
class JackknifeEstimate:
    """``value`` is ``Jack`` (p = 2) or ``Jack_p``; ``deviations[j] = ||T_j - T_bar||_F``."""

    value: float
    s: int
    p: int = 2
    deviations: np.ndarray = field(default=None, repr=False, compare=False)

    def __float__(self):
        return float(self.value)


def _need_two(s):
    if s < 2:
        raise ParameterError(f"jackknife needs at least 2 replicates, got {s}")


def tukey(values, axis=0):
    """Tukey's estimate ``sum_j |E_j - mean(E)|^2`` along ``axis``."""
    values = np.asarray(values, dtype=np.float64)
    _need_two(values.shape[axis])
    dev = values - values.mean(axis=axis, keepdims=True)
    return np.sum(dev * dev, axis=axis)


def tukey_scalar(values):
    values = [float(v) for v in values]
    _need_two(len(values))
    mean = math.fsum(values) / len(values)
    return math.fsum((v - mean) ** 2 for v in values)


def jack_frobenius(cores):
    """``Jack = (sum_j ||T_j - T_bar||_F^2)^(1/2)``."""
    _need_two(cores.count)
    dev_sq = cores.deviations_sq()
    total = 0.0
    for v in dev_sq.tolist():
        total += v
    return JackknifeEstimate(value=math.sqrt(total), s=cores.count, p=2,
                             deviations=np.sqrt(dev_sq))


def _schatten_power(psd, power):
    eig = np.clip(np.linalg.eigvalsh(psd), 0.0, None)
    return float(np.sum(eig ** power))


def jack_schatten(cores, p, anchor=None):
    """Schatten-``p`` jackknife for even ``p >= 2``.

    With ``D_j = T_j - T_a`` for the anchor ``a`` (default: last replicate),
    ``V1 = 1/2 sum D_j^T D_j`` and ``V2 = 1/2 sum D_j D_j^T``, returns
    ``2^(-1/p) sqrt(2(p-1)) (tr V1^(p/2) + tr V2^(p/2))^(1/p)``.
    """
    if int(p) != p or p < 2 or int(p) % 2:
        raise ParameterError(f"Schatten order must be an even integer >= 2, got {p}")
    p = int(p)
    s = cores.count
    _need_two(s)
    anchor = s - 1 if anchor is None else int(anchor)
    if not 0 <= anchor < s:
        raise ParameterError(f"anchor {anchor} out of range for {s} replicates")
    stored = cores.stored()
    D = np.delete(stored, anchor, axis=0) - stored[anchor]
    V1 = 0.5 * np.einsum("jab,jac->bc", D, D)
    V2 = 0.5 * np.einsum("jab,jcb->ac", D, D)
    total = _schatten_power(V1, p // 2) + _schatten_power(V2, p // 2)
    value = 2.0 ** (-1.0 / p) * math.sqrt(2.0 * (p - 1)) * total ** (1.0 / p)
    return JackknifeEstimate(value=value, s=s, p=p)


def quenouille_bias(cores, full_core):
    """``(s - 1)(T_bar - full_core)``, a diagnostic only.

    The classical bias-reduction argument assumes a functional statistic,
    which low-rank approximations generally are not.
    """
    full_core = np.asarray(full_core, dtype=np.float64)
    mean = cores.mean()
    if mean.shape != full_core.shape:
        raise ParameterError(f"core shape {mean.shape} does not match {full_core.shape}")
    return (cores.count - 1) * (mean - full_core)


def singular_value_tukey(cores):
    """Tukey estimate for each singular value index across replicates."""
    _need_two(cores.count)
    sv = np.linalg.svd(cores.stored(), compute_uv=False)
    return tukey(sv, axis=0)


def truncate_cores(cores, r):
    """Best rank-``r`` approximation of every core."""
    n = min(cores.core_shape)
    if not 1 <= r <= n:
        raise ParameterError(f"need 1 <= r <= {n}, got r={r}")
    u, sv, vt = np.linalg.svd(cores.stored())
    trunc = np.einsum("jar,jr,jrb->jab", u[:, :, :r], sv[:, :r], vt[:, :r, :])
    return CoreReplicates.from_dense(trunc, frame=cores.frame, fallback=cores.fallback)
