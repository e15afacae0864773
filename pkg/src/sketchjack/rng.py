"""Reproducible Gaussian streams.

Every column of every random matrix is an independent Philox4x64-10 stream
keyed by ``(seed, domain << 32 | column)``. Raw 64-bit words are turned into
uniforms on (0, 1) as ``((w >> 11) + 0.5) * 2**-53`` and consecutive pairs
``(u1, u2)`` become two normals through Box-Muller,
``sqrt(-2 log u1) * (cos 2 pi u2, sin 2 pi u2)``.

Keying by column makes the first ``s - 1`` columns of an ``s``-column sketch
identical to the ``(s - 1)``-column sketch with the same seed.
"""

import hashlib

import numpy as np

SKETCH_DOMAIN = 0
MATRIX_DOMAIN = 1

_U64 = 1 << 64


def check_seed(seed):
    seed = int(seed)
    if not 0 <= seed < _U64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def gaussian_column(seed, column, length, domain=SKETCH_DOMAIN):
    """``length`` standard normals from the stream of one column."""
    key = np.array([check_seed(seed), (int(domain) << 32) | int(column)], dtype=np.uint64)
    bitgen = np.random.Philox(key=key)
    npairs = (length + 1) // 2
    raw = bitgen.random_raw(2 * npairs)
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53
    radius = np.sqrt(-2.0 * np.log(u[0::2]))
    angle = 2.0 * np.pi * u[1::2]
    out = np.empty(2 * npairs)
    out[0::2] = radius * np.cos(angle)
    out[1::2] = radius * np.sin(angle)
    return out[:length]


def gaussian_matrix(rows, cols, seed, domain=SKETCH_DOMAIN):
    """``rows x cols`` matrix whose column ``j`` is :func:`gaussian_column` ``j``."""
    out = np.empty((rows, cols))
    for j in range(cols):
        out[:, j] = gaussian_column(seed, j, rows, domain)
    return out


def derive_seed(base_seed, *labels):
    """Hash ``base_seed`` and labels into a new 64-bit seed (BLAKE2b, 8-byte digest).

    Labels are joined as ``str`` with ``/`` separators, so
    ``derive_seed(7, "trial", 3)`` hashes the bytes ``b"7/trial/3"``.
    """
    text = "/".join([str(check_seed(base_seed))] + [str(x) for x in labels])
    digest = hashlib.blake2b(text.encode("ascii"), digest_size=8).digest()
    return int.from_bytes(digest, "little")
