"""Naive direct inversion: run the rendering chain backwards, stage by stage.

Exact on pixels the forward chain never clipped; on clipped or near-flat
pixels the true preimage is unrecoverable and this baseline silently lands
on the clip boundary's preimage. That failure mode is the reference point
the robust inversion is measured against.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidParamsError, ShapeMismatchError, SingularMatrixError
from .isp import IspParams, LinearImage, SrgbImage

# refuse to invert a CCM with worse conditioning than this
CCM_MAX_CONDITION = 1e12


def inverse_tone_map(s) -> np.ndarray:
    """Solve 3 g^2 - 2 g^3 = s for g in [0, 1].

    Closed form g = 1/2 - sin(asin(1 - 2 s) / 3); the asin argument is
    clamped to [-1, 1] so roundoff outside the domain cannot produce NaN.
    The endpoints are handled explicitly: the trig form returns 5.6e-17
    rather than 0.0 at s = 0, and the fixed points 0, 1/2, 1 should be exact.
    """
    s = np.asarray(s, dtype=np.float64)
    arg = np.clip(1.0 - 2.0 * s, -1.0, 1.0)
    g = 0.5 - np.sin(np.arcsin(arg) / 3.0)
    g = np.where(s == 0.0, 0.0, np.where(s == 1.0, 1.0, g))
    return np.clip(g, 0.0, 1.0)


def inverse_gamma(g, params: IspParams) -> np.ndarray:
    """v = g ** gamma (g must be >= 0, which inverse_tone_map guarantees)."""
    return np.asarray(g, dtype=np.float64) ** params.gamma


def inverse_color_correct(v, params: IspParams) -> np.ndarray:
    """u = C^-1 v via a precomputed inverse (one matrix per image, not per pixel).

    Raises SingularMatrixError when the CCM is singular or its condition
    number exceeds CCM_MAX_CONDITION; the message carries the estimate.
    """
    v = np.asarray(v, dtype=np.float64)
    cond = float(np.linalg.cond(params.ccm))
    if not np.isfinite(cond) or cond > CCM_MAX_CONDITION:
        raise SingularMatrixError(
            f"ccm is singular or near-singular (condition number {cond:.3e})")
    inv = np.linalg.inv(params.ccm)
    v0, v1, v2 = v[..., 0], v[..., 1], v[..., 2]
    rows = [(inv[i, 0] * v0 + inv[i, 1] * v1) + inv[i, 2] * v2 for i in range(3)]
    return np.stack(rows, axis=-1)


def inverse_white_balance(u, params: IspParams) -> np.ndarray:
    """l = u / w. Gains are validated positive at construction; re-checked here."""
    if (np.abs(params.wb_gains) < 1e-300).any():
        raise InvalidParamsError("wb_gains contain a zero gain")
    return np.asarray(u, dtype=np.float64) / params.wb_gains


def naive_invert_pixels(s, params: IspParams) -> np.ndarray:
    """Stage-by-stage inverse on a raw (..., 3) array, clamped to [0, 1]."""
    g = inverse_tone_map(s)
    v = inverse_gamma(g, params)
    u = inverse_color_correct(v, params)
    l = inverse_white_balance(u, params)
    return np.clip(l, 0.0, 1.0)


def naive_invert_image(s_d, params: IspParams) -> LinearImage:
    """Invert an SrgbImage; returns a LinearImage (final clamp to [0, 1])."""
    if not isinstance(s_d, SrgbImage):
        if isinstance(s_d, LinearImage):
            raise ShapeMismatchError("naive_invert_image expects an SrgbImage")
        s_d = SrgbImage.from_array(s_d)
    l = naive_invert_pixels(s_d.data, params)
    l.flags.writeable = False
    return LinearImage(data=l, n_clamped=0)
