"""Robust linearized inversion of the forward chain.

Given a degraded sRGB image S_d, a base linear image L_b and its render
S_b = F(L_b), solve per pixel for the linear update explaining
dS = S_d - S_b under the local linear model J(L_b) dL = dS:

  first order   dL_fo   = (J^T J + beta I)^-1 J^T dS        (ridge)
  refinement    dL_tsvd = sum_{retained i} v_i sig_i/(sig_i^2+beta) (u_i^T dS)

with singular directions retained iff sig_i > rel * max(sig_1, floor).
Routing is a hard switch on conditioning: pixels with sig_3 >= cond_sigma_min
keep the ridge solution, the rest take the truncated update, and pixels with
sig_1 < floor (clipped flat: J = 0) short-circuit to dL = 0. The final image
is clip(L_b + lambda_r * dL, 0, 1).

Everything is per-pixel and elementwise, so chunked/threaded execution is
bit-identical to a single pass; report reductions are exact (integer counts,
one global sort for percentiles, max for the residual).
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .errors import ConsistencyError, InvalidParamsError, ShapeMismatchError, SolveError
from .isp import IspParams, LinearImage, SrgbImage, run_stages
from .jacobian import PixelJacobian, _terms_from_stages
from .linalg3 import chol3_planes, svd3_planes
from .metrics import nearest_rank, pixel_norms
from . import parallel

SB_CONSISTENCY_TOL = 1e-9  # |supplied S_b - F(L_b)| above this counts as a mismatch

REPORT_PERCENTILES = (50, 95, 99)

METHOD_ROBUST = "robust"
METHOD_FIRST_ORDER = "first-order"


@dataclasses.dataclass(frozen=True)
class InversionConfig:
    """Knobs of the two-stage inversion (defaults match the shipped pipeline)."""

    beta: float = 1e-6
    lambda_r: float = 1.0
    sigma_rel_threshold: float = 1e-3
    sigma_abs_floor: float = 1e-8
    cond_sigma_min: float = 1e-3

    def __post_init__(self):
        if not (np.isfinite(self.beta) and self.beta >= 0.0):
            raise InvalidParamsError(f"beta must be >= 0, got {self.beta}")
        if not (np.isfinite(self.lambda_r) and 0.0 <= self.lambda_r <= 1.0):
            raise InvalidParamsError(f"lambda_r must be in [0, 1], got {self.lambda_r}")
        if not (0.0 < self.sigma_rel_threshold < 1.0):
            raise InvalidParamsError(
                f"sigma_rel_threshold must be in (0, 1), got {self.sigma_rel_threshold}"
            )
        if not (self.sigma_abs_floor > 0.0):
            raise InvalidParamsError(f"sigma_abs_floor must be > 0, got {self.sigma_abs_floor}")
        if not (self.cond_sigma_min > 0.0):
            raise InvalidParamsError(f"cond_sigma_min must be > 0, got {self.cond_sigma_min}")


@dataclasses.dataclass
class InversionReport:
    """Per-run accounting; counts partition the image exactly."""

    n_well_conditioned: int
    n_tsvd: int
    n_zero_jacobian: int
    total_pixels: int
    delta_l_percentiles: dict
    max_abs_residual_srgb: float
    n_sb_mismatch: int = 0
    method: str = METHOD_ROBUST


def _matrix_of(jac) -> np.ndarray:
    if isinstance(jac, PixelJacobian):
        return jac.matrix
    return np.asarray(jac, dtype=np.float64)


def first_order_update(jac, delta_s, beta: float) -> np.ndarray:
    """Ridge-regularized first-order update (J^T J + beta I)^-1 J^T dS.

    ``jac`` is a PixelJacobian or an (..., 3, 3) array; ``delta_s`` is
    (..., 3). Solved by the dedicated Cholesky kernel; raises SolveError when
    a system is not positive definite (possible only for beta = 0 on a
    rank-deficient pixel).
    """
    j = _matrix_of(jac)
    ds = np.asarray(delta_s, dtype=np.float64)
    if j.shape[-2:] != (3, 3) or ds.shape[-1] != 3 or j.shape[:-2] != ds.shape[:-1]:
        raise ShapeMismatchError(f"first_order_update shapes {j.shape} / {ds.shape}")
    jp = [[j[..., i, k] for i in range(3)] for k in range(3)]  # jp[col][row]
    x0, x1, x2, bad = _ridge_solve_planes(jp, (ds[..., 0], ds[..., 1], ds[..., 2]), beta)
    if bad.any():
        first = int(np.flatnonzero(np.atleast_1d(bad))[0])
        raise SolveError(f"ridge system at flat index {first} is not positive definite",
                         pixel=first)
    return np.stack([x0, x1, x2], axis=-1)


def _ridge_solve_planes(jp, ds, beta: float):
    """Normal equations + Cholesky on column planes jp[col][row]."""
    d0, d1, d2 = ds

    def gram(p, q):
        return (jp[p][0] * jp[q][0] + jp[p][1] * jp[q][1]) + jp[p][2] * jp[q][2]

    m00 = gram(0, 0) + beta
    m11 = gram(1, 1) + beta
    m22 = gram(2, 2) + beta
    m10 = gram(1, 0)
    m20 = gram(2, 0)
    m21 = gram(2, 1)
    b = [(jp[k][0] * d0 + jp[k][1] * d1) + jp[k][2] * d2 for k in range(3)]
    return chol3_planes(m00, m10, m11, m20, m21, m22, b[0], b[1], b[2])


def tsvd_update(svd, delta_s, config: InversionConfig):
    """Truncated-SVD update with Tikhonov filtering on the retained directions.

    ``svd`` is the (u, sig, v) triple from :func:`ispinvert.linalg3.svd3`.
    Returns (delta_l, k_retained). By construction the update carries an
    exactly zero coefficient along every truncated direction.
    """
    u, sig, v = svd
    u = np.asarray(u, dtype=np.float64)
    sig = np.asarray(sig, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    ds = np.asarray(delta_s, dtype=np.float64)
    u_col = [[u[..., i, k] for i in range(3)] for k in range(3)]
    v_col = [[v[..., i, k] for i in range(3)] for k in range(3)]
    sig_l = [sig[..., k] for k in range(3)]
    dl, k = _tsvd_planes(u_col, sig_l, v_col, (ds[..., 0], ds[..., 1], ds[..., 2]), config)
    return np.stack(dl, axis=-1), k


def _tsvd_filters(sig_l, config: InversionConfig):
    """(filter factors, retained masks); factors are exactly 0.0 when truncated."""
    thr = config.sigma_rel_threshold * np.maximum(sig_l[0], config.sigma_abs_floor)
    retained = [sig_l[k] > thr for k in range(3)]
    filt = [np.where(retained[k], sig_l[k] / (sig_l[k] * sig_l[k] + config.beta), 0.0)
            for k in range(3)]
    return filt, retained


def _tsvd_planes(u_col, sig_l, v_col, ds, config: InversionConfig):
    d0, d1, d2 = ds
    filt, retained = _tsvd_filters(sig_l, config)
    fc = [filt[k] * ((u_col[k][0] * d0 + u_col[k][1] * d1) + u_col[k][2] * d2) for k in range(3)]
    dl = [(v_col[0][i] * fc[0] + v_col[1][i] * fc[1]) + v_col[2][i] * fc[2] for i in range(3)]
    k_retained = retained[0].astype(np.int64) + retained[1] + retained[2]
    return dl, k_retained


def blend_lambda_r(l_b, delta_l, lambda_r: float) -> np.ndarray:
    """clip(l_b + lambda_r * delta_l, 0, 1); lambda_r = 0 returns l_b's bits."""
    l_b = np.asarray(getattr(l_b, "data", l_b), dtype=np.float64)
    delta_l = np.asarray(delta_l, dtype=np.float64)
    return np.clip(l_b + lambda_r * delta_l, 0.0, 1.0)


def _coerce(img, cls, name):
    if isinstance(img, cls):
        return img
    if isinstance(img, (LinearImage, SrgbImage)):
        raise ShapeMismatchError(f"{name} must be a {cls.__name__}, got {type(img).__name__}")
    return cls.from_array(img)


def invert_image(s_d, s_b, l_b, params: IspParams, config: InversionConfig | None = None,
                 *, method: str = METHOD_ROBUST, strict: bool = False, threads=None):
    """Invert a degraded sRGB image around a base linear image.

    Parameters
    ----------
    s_d : SrgbImage or array, the degraded render to invert
    s_b : SrgbImage, array, or None; base render. When given it is checked
        against forward(l_b) to SB_CONSISTENCY_TOL (mismatching pixels are
        counted; with ``strict`` they raise ConsistencyError). When None it
        is recomputed, which is always exactly consistent.
    l_b : LinearImage or array, the linearization point
    method : "robust" (two-stage, default) or "first-order" (ablation: every
        non-flat pixel keeps the ridge solution)
    threads : worker threads for row chunks; None reads ISPINVERT_THREADS

    Returns
    -------
    (LinearImage, InversionReport)
    """
    config = config or InversionConfig()
    if method not in (METHOD_ROBUST, METHOD_FIRST_ORDER):
        raise InvalidParamsError(f"unknown inversion method {method!r}")
    s_d = _coerce(s_d, SrgbImage, "s_d")
    l_b = _coerce(l_b, LinearImage, "l_b")
    if s_b is not None:
        s_b = _coerce(s_b, SrgbImage, "s_b")
        if s_b.data.shape != l_b.data.shape:
            raise ShapeMismatchError(
                f"s_b shape {s_b.data.shape} != l_b shape {l_b.data.shape}")
    if s_d.data.shape != l_b.data.shape:
        raise ShapeMismatchError(f"s_d shape {s_d.data.shape} != l_b shape {l_b.data.shape}")

    height, width = l_b.data.shape[:2]

    def run(start, end):
        return _invert_rows(s_d.data, None if s_b is None else s_b.data, l_b.data,
                            params, config, method, start, end)

    results = parallel.map_chunks(run, height, width, threads)

    l_d = np.concatenate([r[0] for r in results], axis=0)
    norms = np.concatenate([r[1] for r in results])
    n_zero = sum(r[2] for r in results)
    n_wc = sum(r[3] for r in results)
    n_tsvd = sum(r[4] for r in results)
    max_resid = max(r[5] for r in results)
    n_mismatch = sum(r[6] for r in results)

    if strict and n_mismatch:
        raise ConsistencyError(
            f"supplied s_b disagrees with forward(l_b) at {n_mismatch} pixel(s) "
            f"(tolerance {SB_CONSISTENCY_TOL:g})")

    norms.sort()
    report = InversionReport(
        n_well_conditioned=n_wc,
        n_tsvd=n_tsvd,
        n_zero_jacobian=n_zero,
        total_pixels=height * width,
        delta_l_percentiles={p: nearest_rank(norms, p) for p in REPORT_PERCENTILES},
        max_abs_residual_srgb=max_resid,
        n_sb_mismatch=n_mismatch,
        method=method,
    )
    l_d.flags.writeable = False
    return LinearImage(data=l_d, n_clamped=0), report


def _invert_rows(sd, sb, lb, params, config, method, start, end):
    """One row chunk; pure function of its inputs (see module docstring)."""
    lbc = lb[start:end].reshape(-1, 3)
    sdc = sd[start:end].reshape(-1, 3)

    st = run_stages(lbc, params)
    sb_true = st.s
    if sb is None:
        sbc = sb_true
        n_mismatch = 0
    else:
        sbc = sb[start:end].reshape(-1, 3)
        n_mismatch = int((np.abs(sbc - sb_true) > SB_CONSISTENCY_TOL).any(axis=-1).sum())

    d0 = sdc[:, 0] - sbc[:, 0]
    d1 = sdc[:, 1] - sbc[:, 1]
    d2 = sdc[:, 2] - sbc[:, 2]

    left, right, _, _, _ = _terms_from_stages(st, params)
    ccm = params.ccm
    # jp[col][row]: J[i, j] = (left_i * C_ij) * right_j
    jp = [[(left[:, i] * ccm[i, j]) * right[:, j] for i in range(3)] for j in range(3)]

    u_col, sig_l, v_col = svd3_planes([[c.copy() for c in col] for col in jp])

    zero = sig_l[0] < config.sigma_abs_floor
    well = sig_l[2] >= config.cond_sigma_min

    fo0, fo1, fo2, bad = _ridge_solve_planes(jp, (d0, d1, d2), config.beta)
    routed_fo = ~zero if method == METHOD_FIRST_ORDER else (~zero & well)
    if (bad & routed_fo).any():
        flat = int(np.flatnonzero(bad & routed_fo)[0])
        raise SolveError(
            f"ridge system not positive definite at pixel "
            f"{(start + flat // (lb.shape[1]), flat % lb.shape[1])}", pixel=flat)

    if method == METHOD_FIRST_ORDER:
        dl0 = np.where(zero, 0.0, fo0)
        dl1 = np.where(zero, 0.0, fo1)
        dl2 = np.where(zero, 0.0, fo2)
        n_tsvd = 0
    else:
        tl, _ = _tsvd_planes(u_col, sig_l, v_col, (d0, d1, d2), config)
        dl0 = np.where(zero, 0.0, np.where(well, fo0, tl[0]))
        dl1 = np.where(zero, 0.0, np.where(well, fo1, tl[1]))
        dl2 = np.where(zero, 0.0, np.where(well, fo2, tl[2]))
        n_tsvd = int((~zero & ~well).sum())

    n_zero = int(zero.sum())
    n_wc = lbc.shape[0] - n_zero - n_tsvd

    # diagnostic linear residual J dL - dS (large where directions were cut)
    r0 = ((jp[0][0] * dl0 + jp[1][0] * dl1) + jp[2][0] * dl2) - d0
    r1 = ((jp[0][1] * dl0 + jp[1][1] * dl1) + jp[2][1] * dl2) - d1
    r2 = ((jp[0][2] * dl0 + jp[1][2] * dl1) + jp[2][2] * dl2) - d2
    max_resid = float(np.maximum(np.abs(r0), np.maximum(np.abs(r1), np.abs(r2))).max()) \
        if lbc.size else 0.0

    dl = np.stack([dl0, dl1, dl2], axis=-1)
    norms = pixel_norms(dl)
    ld = blend_lambda_r(lbc, dl, config.lambda_r).reshape(end - start, -1, 3)
    return ld, norms, n_zero, n_wc, n_tsvd, max_resid, n_mismatch
