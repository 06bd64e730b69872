"""Quality metrics and the Taylor-remainder verification harness."""

from __future__ import annotations

import math

import numpy as np

from .errors import MetricsError, ShapeMismatchError
from .isp import IspParams, forward_pixels
from .jacobian import jacobian_pixels
from .linalg3 import singular_values3

REMAINDER_NORM_FLOOR = 1e-14  # below this a remainder is treated as pure roundoff


def _data(x) -> np.ndarray:
    return np.asarray(getattr(x, "data", x), dtype=np.float64)


def psnr(a, b, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; identical inputs give +inf."""
    a = _data(a)
    b = _data(b)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"psnr shapes differ: {a.shape} vs {b.shape}")
    if not (np.isfinite(peak) and peak > 0.0):
        raise MetricsError(f"psnr peak must be positive, got {peak}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def pixel_norms(delta_l) -> np.ndarray:
    """Per-pixel Euclidean norm of an (..., 3) field."""
    d = _data(delta_l)
    d0, d1, d2 = d[..., 0], d[..., 1], d[..., 2]
    return np.sqrt((d0 * d0 + d1 * d1) + d2 * d2)


def nearest_rank(sorted_values: np.ndarray, p: float) -> float:
    """Nearest-rank percentile of an ascending-sorted 1-D array."""
    n = sorted_values.size
    if n == 0:
        raise MetricsError("percentile of an empty sample")
    rank = math.ceil(p / 100.0 * n)
    return float(sorted_values[min(max(rank, 1), n) - 1])


def delta_l_percentiles(delta_l, ps=(50, 95, 99)) -> dict:
    """Nearest-rank percentiles of per-pixel ||delta_l||_2.

    The sample is sorted once and indexed, so the result does not depend on
    how the field was computed or chunked.
    """
    norms = np.sort(pixel_norms(delta_l), axis=None)
    return {int(p): nearest_rank(norms, p) for p in ps}


# ---------------------------------------------------------------------------
# Taylor remainder of the linearized forward model
# ---------------------------------------------------------------------------


def _jac_matvec(j, d):
    # fixed association: (J[i,0]*d0 + J[i,1]*d1) + J[i,2]*d2
    d0, d1, d2 = d[..., 0], d[..., 1], d[..., 2]
    rows = [(j[..., i, 0] * d0 + j[..., i, 1] * d1) + j[..., i, 2] * d2 for i in range(3)]
    return np.stack(rows, axis=-1)


def taylor_remainder(l_b, delta_l, params: IspParams) -> np.ndarray:
    """r = F(l_b + delta_l) - F(l_b) - J(l_b) @ delta_l, per pixel.

    Evaluates the raw chain (no ingest clamp): the remainder is defined for
    any finite displacement, including ones that leave [0, 1].
    """
    l_b = _data(l_b)
    delta_l = _data(delta_l)
    if l_b.shape != delta_l.shape or l_b.shape[-1] != 3:
        raise ShapeMismatchError(f"remainder shapes differ: {l_b.shape} vs {delta_l.shape}")
    f0 = forward_pixels(l_b, params)
    f1 = forward_pixels(l_b + delta_l, params)
    j = jacobian_pixels(l_b, params)
    return f1 - f0 - _jac_matvec(j, delta_l)


def lipschitz_estimate(l_b, delta_l, params: IspParams, scales=(1.0, 0.5, 0.25, 0.125, 0.0625)) -> float:
    """Empirical Lipschitz constant of J along the sampled segments.

    Finite-differences the Jacobian between consecutive points
    l_b + t * delta_l (including t = 0) and returns the max over pixels of
    spectral-norm change per unit step. An empirical max under-estimates the
    true constant; callers pair it with a slack factor.
    """
    l_b = _data(l_b)
    delta_l = _data(delta_l)
    ts = sorted(set(float(t) for t in scales) | {0.0})
    seg = pixel_norms(delta_l)
    best = 0.0
    j_prev = jacobian_pixels(l_b + ts[0] * delta_l, params)
    for t_prev, t_next in zip(ts, ts[1:]):
        j_next = jacobian_pixels(l_b + t_next * delta_l, params)
        step = (t_next - t_prev) * seg
        ok = step > 0.0
        if ok.any():
            ratio = singular_values3(j_next - j_prev)[..., 0][ok] / step[ok]
            best = max(best, float(ratio.max()))
        j_prev = j_next
    return best


def remainder_scaling_check(l_b, delta_l, params: IspParams,
                            scales=(1.0, 0.5, 0.25, 0.125, 0.0625),
                            min_samples: int = 8) -> float:
    """Fitted decay exponent p of ||r(t * delta_l)|| ~ t^p.

    Fits a least-squares slope of log||r|| against log t per pixel (each
    pixel has its own curvature, hence its own intercept) and returns the
    median over pixels whose remainder stays above REMAINDER_NORM_FLOOR at
    every scale. A second-order-accurate linearization gives p ~= 2.

    Raises MetricsError when fewer than ``min_samples`` pixels qualify.
    """
    ts = np.asarray(sorted(set(float(t) for t in scales), reverse=True), dtype=np.float64)
    if ts.size < 3 or ts.min() <= 0.0:
        raise MetricsError("scales must contain >= 3 distinct positive values")
    l_b = _data(l_b)
    delta_l = _data(delta_l)
    norms = np.stack([pixel_norms(taylor_remainder(l_b, t * delta_l, params)) for t in ts])
    usable = (norms > REMAINDER_NORM_FLOOR).all(axis=0)
    n_used = int(usable.sum())
    if n_used < min_samples:
        raise MetricsError(
            f"only {n_used} pixel(s) with nonzero remainder at all scales (need >= {min_samples})"
        )
    x = np.log(ts)
    y = np.log(norms[:, usable])
    x_c = x - x.mean()
    slopes = (x_c @ (y - y.mean(axis=0))) / (x_c @ x_c)
    return float(np.median(slopes))
