"""Numpy implementations of the sampling kernels (the import-time fallback)."""
import numpy as np


def lc_fill(normals, k):
    """Levy-Ciesielski bridge values at ``j / 2**k`` from level-major normals.

    ``normals`` has shape ``(samples, 2**k - 1)``: ``a_{1,1}``, then
    ``a_{2,1}, a_{2,2}``, then the ``2**(l-1)`` coefficients of each further
    level.  Level ``l`` adds a tent of height ``2**(-(l-1)/2) / 2`` at the
    midpoint of every level-``(l-1)`` cell, so the path at the new midpoints
    is the neighbour average plus that displacement.
    """
    normals = np.ascontiguousarray(normals, dtype=np.float64)
    samples = normals.shape[0]
    size = 2**k
    paths = np.zeros((samples, size + 1))
    offset = 0
    for level in range(1, k + 1):
        cells = 2 ** (level - 1)
        step = size // cells
        half = step // 2
        amp = 0.5 * 2.0 ** (-(level - 1) / 2)
        left = paths[:, 0:size:step]
        right = paths[:, step:size + 1:step]
        paths[:, half:size:step] = 0.5 * (left + right) + amp * normals[:, offset:offset + cells]
        offset += cells
    return paths


def tail_sup(b, lam):
    """``max_{cell, g} |sum_l b[s, cell, l] * lam[l, g]|`` for each sample ``s``.

    ``b`` has shape ``(samples, cells, n_nu)`` and ``lam`` ``(n_nu, points)``.
    """
    b = np.asarray(b, dtype=np.float64)
    lam = np.asarray(lam, dtype=np.float64)
    if b.shape[0] == 0:
        return np.zeros(0)
    if lam.shape[0] == 0:
        return np.zeros(b.shape[0])
    vals = np.abs(np.einsum("scl,lg->scg", b, lam))
    return vals.reshape(b.shape[0], -1).max(axis=1)
