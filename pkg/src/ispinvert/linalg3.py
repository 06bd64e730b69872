"""Dedicated 3x3 linear algebra for the per-pixel hot loop.

Two kernels, both batched over pixel axes and built purely from elementwise
numpy ops so that results are a per-pixel pure function: the same matrix
always produces the same bits no matter how the batch is chunked or
threaded. No LAPACK is dispatched per pixel.

``svd3``       one-sided Jacobi with an orthonormal-polish step for U.
``solve_spd3`` unpivoted Cholesky for symmetric positive-definite systems.

The ``*_planes`` variants work on "struct of arrays" layouts -- nested lists
``planes[column][row]`` of same-shaped arrays -- and are what the inversion
pipeline calls to avoid repacking (n, 3, 3) tensors between stages.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeMismatchError, SolveError

# Rotation gate: skip a Jacobi rotation once the off-diagonal Gram entry is
# below this multiple of the larger column norm^2. Relative to the *larger*
# column (not the geometric mean) so graded matrices converge past the
# rounding-noise floor instead of rotating forever.
_JACOBI_GATE = 1e-14
_MAX_SWEEPS = 30
_COLUMN_PAIRS = ((0, 1), (0, 2), (1, 2))


def svd3_planes(col):
    """One-sided Jacobi SVD on column planes; ``col[j][i]`` is entry (i, j).

    ``col`` is consumed. Returns (u_col, sig, v_col) in the same layout with
    ``sig`` a list of three arrays, descending.
    """
    shape = col[0][0].shape
    one = np.ones(shape)
    zero = np.zeros(shape)
    vee = [[one.copy() if i == j else zero.copy() for i in range(3)] for j in range(3)]

    for _ in range(_MAX_SWEEPS):
        rotated = False
        for p, q in _COLUMN_PAIRS:
            ap, aq = col[p], col[q]
            app = (ap[0] * ap[0] + ap[1] * ap[1]) + ap[2] * ap[2]
            aqq = (aq[0] * aq[0] + aq[1] * aq[1]) + aq[2] * aq[2]
            apq = (ap[0] * aq[0] + ap[1] * aq[1]) + ap[2] * aq[2]
            rotate = np.abs(apq) > _JACOBI_GATE * np.maximum(app, aqq)
            if not rotate.any():
                continue
            rotated = True
            apq_safe = np.where(rotate, apq, 1.0)
            tau = (aqq - app) / (2.0 * apq_safe)
            t = np.where(tau >= 0.0, 1.0, -1.0) / (np.abs(tau) + np.sqrt(1.0 + tau * tau))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            # gated identity rotation is an exact no-op for converged pixels
            c = np.where(rotate, c, 1.0)
            s = np.where(rotate, s, 0.0)
            for m in (col, vee):
                mp, mq = m[p], m[q]
                for i in range(3):
                    xp, xq = mp[i], mq[i]
                    mp[i] = c * xp - s * xq
                    mq[i] = s * xp + c * xq
        if not rotated:
            break

    sig = [np.sqrt((col[j][0] * col[j][0] + col[j][1] * col[j][1]) + col[j][2] * col[j][2])
           for j in range(3)]

    # descending order via a 3-element compare-swap network (stable on ties)
    for p, q in _COLUMN_PAIRS:
        swap = sig[p] < sig[q]
        sig[p], sig[q] = np.where(swap, sig[q], sig[p]), np.where(swap, sig[p], sig[q])
        for m in (col, vee):
            for i in range(3):
                xp, xq = m[p][i], m[q][i]
                m[p][i] = np.where(swap, xq, xp)
                m[q][i] = np.where(swap, xp, xq)

    # U: normalize the leading column, Gram-Schmidt the second, cross product
    # for the third. The polish keeps U orthonormal to machine precision even
    # when the Jacobi noise floor sits above sig2 (strongly graded matrices).
    s0_ok = sig[0] > 0.0
    s0_safe = np.where(s0_ok, sig[0], 1.0)
    u0 = [np.where(s0_ok, col[0][i] / s0_safe, 1.0 if i == 0 else 0.0) for i in range(3)]

    dot01 = (u0[0] * col[1][0] + u0[1] * col[1][1]) + u0[2] * col[1][2]
    b = [col[1][i] - dot01 * u0[i] for i in range(3)]
    nb = np.sqrt((b[0] * b[0] + b[1] * b[1]) + b[2] * b[2])
    nb_ok = nb > 0.0
    nb_safe = np.where(nb_ok, nb, 1.0)
    # fallback completion: Gram-Schmidt the canonical axis least aligned with u0
    k_min = np.argmin(np.stack([np.abs(u0[0]), np.abs(u0[1]), np.abs(u0[2])], axis=0), axis=0)
    e = [(k_min == i).astype(np.float64) for i in range(3)]
    proj = (e[0] * u0[0] + e[1] * u0[1]) + e[2] * u0[2]
    f = [e[i] - proj * u0[i] for i in range(3)]
    nf = np.sqrt((f[0] * f[0] + f[1] * f[1]) + f[2] * f[2])
    u1 = [np.where(nb_ok, b[i] / nb_safe, f[i] / nf) for i in range(3)]

    u2 = [u0[1] * u1[2] - u0[2] * u1[1],
          u0[2] * u1[0] - u0[0] * u1[2],
          u0[0] * u1[1] - u0[1] * u1[0]]
    nc = np.sqrt((u2[0] * u2[0] + u2[1] * u2[1]) + u2[2] * u2[2])
    u2 = [u2[i] / nc for i in range(3)]
    # match the sign of the third data column so a = U diag(sig) V^T holds
    dot2 = (u2[0] * col[2][0] + u2[1] * col[2][1]) + u2[2] * col[2][2]
    flip = np.where(dot2 < 0.0, -1.0, 1.0)
    u2 = [flip * u2[i] for i in range(3)]

    return [u0, u1, u2], sig, vee


def svd3(a):
    """SVD of 3x3 matrices: a = u @ diag(sig) @ v.T.

    Parameters
    ----------
    a : (..., 3, 3) array_like

    Returns
    -------
    u, sig, v : arrays of shape (..., 3, 3), (..., 3), (..., 3, 3);
        sig is sorted descending, entries >= 0; u and v are orthonormal
        within 1e-10 and the reconstruction residual is within
        1e-10 * max(1, sig[0]).
    """
    a = np.asarray(a, dtype=np.float64)
    if a.shape[-2:] != (3, 3):
        raise ShapeMismatchError(f"svd3 expects (..., 3, 3), got {a.shape}")
    # np.array keeps 0-d shapes (ascontiguousarray would promote them to 1-d)
    col = [[np.array(a[..., i, j]) for i in range(3)] for j in range(3)]
    u_col, sig, v_col = svd3_planes(col)
    batch = a.shape[:-2]
    u = np.empty(batch + (3, 3))
    v = np.empty(batch + (3, 3))
    for i in range(3):
        for j in range(3):
            u[..., i, j] = u_col[j][i]
            v[..., i, j] = v_col[j][i]
    return u, np.stack(sig, axis=-1), v


def singular_values3(a):
    """Singular values only (descending), same kernel as :func:`svd3`."""
    return svd3(a)[1]


def chol3_planes(m00, m10, m11, m20, m21, m22, b0, b1, b2):
    """Cholesky solve of symmetric systems given lower-triangle planes.

    Elementwise over any common shape. Returns (x0, x1, x2, bad) where
    ``bad`` flags non-positive-definite entries; their x is arbitrary and
    must be handled (or raised on) by the caller. A zero right-hand side
    yields an exactly zero solution.
    """
    r0 = m00
    bad = r0 <= 0.0
    l00 = np.sqrt(np.where(bad, 1.0, r0))
    l10 = m10 / l00
    l20 = m20 / l00
    r1 = m11 - l10 * l10
    bad = bad | (r1 <= 0.0)
    l11 = np.sqrt(np.where(bad, 1.0, r1))
    l21 = (m21 - l20 * l10) / l11
    r2 = m22 - (l20 * l20 + l21 * l21)
    bad = bad | (r2 <= 0.0)
    l22 = np.sqrt(np.where(bad, 1.0, r2))

    y0 = b0 / l00
    y1 = (b1 - l10 * y0) / l11
    y2 = (b2 - (l20 * y0 + l21 * y1)) / l22
    x2 = y2 / l22
    x1 = (y1 - l21 * x2) / l11
    x0 = (y0 - (l10 * x1 + l20 * x2)) / l00
    return x0, x1, x2, bad


def solve_spd3(a, b):
    """Solve a @ x = b for symmetric positive-definite 3x3 systems.

    Parameters
    ----------
    a : (..., 3, 3) array_like, symmetric positive definite
    b : (..., 3) array_like

    Raises
    ------
    SolveError
        If any system is not positive definite; carries the first flat index.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[-2:] != (3, 3) or b.shape[-1] != 3 or a.shape[:-2] != b.shape[:-1]:
        raise ShapeMismatchError(f"solve_spd3 shapes {a.shape} / {b.shape} are inconsistent")
    x0, x1, x2, bad = chol3_planes(
        a[..., 0, 0], a[..., 1, 0], a[..., 1, 1], a[..., 2, 0], a[..., 2, 1], a[..., 2, 2],
        b[..., 0], b[..., 1], b[..., 2],
    )
    if bad.any():
        first = int(np.flatnonzero(np.atleast_1d(bad))[0])
        raise SolveError(f"matrix at flat index {first} is not positive definite", pixel=first)
    return np.stack([x0, x1, x2], axis=-1)
