"""Analytic per-pixel Jacobian of the forward chain.

For one pixel the chain is a composition of channelwise maps and one 3x3
matrix, so the Jacobian factors into diagonal terms around the CCM:

    J = D_s . D_t . D_gamma . C . D_w . W

with, per channel c,

    D_w     = diag(m_w),             m_w = 1  iff  0 <= u_pre <= 1
    D_gamma = diag(m_g * alpha * v_tilde^(alpha-1)),  m_g = 1 iff v >= eps
    D_t     = diag(6 g (1 - g))
    D_s     = diag(m_s),             m_s = 1  iff  0 <= s_pre <= 1

Clip masks use inclusive boundaries: at an exact boundary the derivative of
clip is taken as 1. Every diagonal entry is per-channel. Since the outer
three factors and the inner two are diagonal, J collapses to

    J[i, j] = left[i] * C[i, j] * right[j]

which is how both the single-pixel and the image path build it (same
expressions, bit-identical results).
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .isp import IspParams, LinearImage, ShapeMismatchError, run_stages
from .linalg3 import svd3


def _terms_from_stages(st, params: IspParams):
    """left/right diagonal vectors and masks from precomputed stage values.

    Returns (left, right, mask_w, mask_gamma, mask_s); J = left*C*right as
    above. Masks are float64 0.0/1.0 so the products stay exact.
    """
    mask_w = ((st.u_pre >= 0.0) & (st.u_pre <= 1.0)).astype(np.float64)
    mask_gamma = (st.v >= params.epsilon).astype(np.float64)
    mask_s = ((st.s_pre >= 0.0) & (st.s_pre <= 1.0)).astype(np.float64)
    d_tone = 6.0 * st.g * (1.0 - st.g)
    d_gamma = params.alpha * st.v_tilde ** (params.alpha - 1.0)
    left = mask_s * d_tone * mask_gamma * d_gamma
    right = mask_w * params.wb_gains
    return left, right, mask_w, mask_gamma, mask_s


def _jacobian_terms(l, params: IspParams):
    """Stage evaluation plus :func:`_terms_from_stages` for raw pixel arrays."""
    return _terms_from_stages(run_stages(l, params), params)


def _jacobian_matrix(left, right, ccm):
    # (left_i * C_ij) * right_j, broadcast over the pixel axes
    return left[..., :, None] * ccm * right[..., None, :]


@dataclasses.dataclass
class PixelJacobian:
    """Jacobian of one pixel plus its clip masks.

    ``singular_values`` is computed on first access via :func:`svd3`.
    """

    matrix: np.ndarray       # (3, 3)
    mask_w: np.ndarray       # (3,) 0/1
    mask_gamma: np.ndarray   # (3,) 0/1
    mask_s: np.ndarray       # (3,) 0/1
    _sv: np.ndarray | None = dataclasses.field(default=None, repr=False)

    @property
    def singular_values(self) -> np.ndarray:
        if self._sv is None:
            self._sv = svd3(self.matrix)[1]
        return self._sv


@dataclasses.dataclass
class JacobianField:
    """Per-pixel Jacobians of an image, (H, W, 3, 3)."""

    matrix: np.ndarray
    mask_w: np.ndarray
    mask_gamma: np.ndarray
    mask_s: np.ndarray
    _sv: np.ndarray | None = dataclasses.field(default=None, repr=False)

    @property
    def singular_values(self) -> np.ndarray:
        """(H, W, 3) descending singular values, computed on demand."""
        if self._sv is None:
            self._sv = svd3(self.matrix)[1]
        return self._sv

    def at(self, row: int, col: int) -> PixelJacobian:
        return PixelJacobian(
            matrix=self.matrix[row, col],
            mask_w=self.mask_w[row, col],
            mask_gamma=self.mask_gamma[row, col],
            mask_s=self.mask_s[row, col],
        )


def jacobian_at(l, params: IspParams) -> PixelJacobian:
    """Jacobian at one linear-RGB pixel (shape (3,))."""
    l = np.asarray(l, dtype=np.float64)
    if l.shape != (3,):
        raise ShapeMismatchError(f"jacobian_at expects shape (3,), got {l.shape}")
    left, right, mask_w, mask_gamma, mask_s = _jacobian_terms(l, params)
    return PixelJacobian(
        matrix=_jacobian_matrix(left, right, params.ccm),
        mask_w=mask_w,
        mask_gamma=mask_gamma,
        mask_s=mask_s,
    )


def jacobian_pixels(l, params: IspParams) -> np.ndarray:
    """Jacobians for a raw (..., 3) array; returns (..., 3, 3)."""
    l = np.asarray(l, dtype=np.float64)
    if l.ndim < 1 or l.shape[-1] != 3:
        raise ShapeMismatchError(f"jacobian_pixels expects (..., 3), got {l.shape}")
    left, right, _, _, _ = _jacobian_terms(l, params)
    return _jacobian_matrix(left, right, params.ccm)


def jacobian_image(image: LinearImage, params: IspParams) -> JacobianField:
    """Jacobian field of a whole image."""
    if not isinstance(image, LinearImage):
        raise ShapeMismatchError("jacobian_image expects a LinearImage")
    left, right, mask_w, mask_gamma, mask_s = _jacobian_terms(image.data, params)
    return JacobianField(
        matrix=_jacobian_matrix(left, right, params.ccm),
        mask_w=mask_w,
        mask_gamma=mask_gamma,
        mask_s=mask_s,
    )
