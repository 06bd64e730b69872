"""Forward camera ISP model: scene-linear RGB to display sRGB.

The pipeline is the four-step rendering chain

    u_pre = W @ l            white balance (per-channel gains)
    u     = clip(u_pre, 0, 1)
    v     = C @ u            3x3 color correction (no clip)
    g     = max(v, eps) ** (1/gamma)
    s_pre = g^2 (3 - 2g)     cubic tone curve
    s     = clip(s_pre, 0, 1)

All math is float64. Evaluation order inside a pixel is fixed and documented
next to each kernel: the vectorized image path and a per-pixel call run the
exact same expressions, so results agree bit-for-bit with a scalar evaluator
that follows the same order. Do not "simplify" the arithmetic (e.g. fuse the
3x3 mat-vec into a BLAS call); associativity changes rounding.
"""

from __future__ import annotations

import dataclasses
import logging

import numpy as np

from .errors import InvalidParamsError, NonFiniteInputError, ShapeMismatchError

log = logging.getLogger(__name__)

DEFAULT_GAMMA = 2.2
DEFAULT_EPSILON = 1e-8

# Row sums of a plausible CCM should be 1 (white preservation). Generated
# params guarantee this; external ones are accepted and only flagged.
CCM_ROW_SUM_TOL = 1e-9


def _as_matrix(value, shape, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.shape != shape:
        raise InvalidParamsError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.isfinite(arr).all():
        raise InvalidParamsError(f"{name} must be finite")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclasses.dataclass(frozen=True)
class IspParams:
    """Parameters of the rendering chain.

    Attributes
    ----------
    wb_gains : (3,) float64, strictly positive
    ccm : (3, 3) float64, finite; rows of generated CCMs sum to 1
    gamma : encoding exponent, > 0 (compression uses alpha = 1/gamma)
    epsilon : clamp floor applied before the fractional power, in (0, 1)
    """

    wb_gains: np.ndarray
    ccm: np.ndarray
    gamma: float = DEFAULT_GAMMA
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        gains = _as_matrix(self.wb_gains, (3,), "wb_gains")
        ccm = _as_matrix(self.ccm, (3, 3), "ccm")
        if not (gains > 0.0).all():
            raise InvalidParamsError(f"wb_gains must be strictly positive, got {gains}")
        if not (np.isfinite(self.gamma) and self.gamma > 0.0):
            raise InvalidParamsError(f"gamma must be positive, got {self.gamma}")
        if not (np.isfinite(self.epsilon) and 0.0 < self.epsilon < 1.0):
            raise InvalidParamsError(f"epsilon must be in (0, 1), got {self.epsilon}")
        object.__setattr__(self, "wb_gains", gains)
        object.__setattr__(self, "ccm", ccm)
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "epsilon", float(self.epsilon))

    @property
    def alpha(self) -> float:
        return 1.0 / self.gamma

    @property
    def ccm_rows_normalized(self) -> bool:
        """True when every CCM row sums to 1 within tolerance (metadata only)."""
        return bool(np.abs(self.ccm.sum(axis=1) - 1.0).max() <= CCM_ROW_SUM_TOL)


def _ingest(arr, channels: int, name: str, clamp: bool):
    """Widen to float64, reject non-finite values, optionally clamp to [0, 1].

    Returns (data, n_clamped). Out-of-range linear values are clamped with a
    counter rather than rejected: upstream reconstructions routinely overshoot.
    """
    data = np.asarray(arr, dtype=np.float64)
    expected = 3 if channels == 3 else 2
    if data.ndim != expected or (channels == 3 and data.shape[-1] != 3):
        raise ShapeMismatchError(
            f"{name} must have shape {'(H, W, 3)' if channels == 3 else '(H, W)'}, got {data.shape}"
        )
    if data.shape[0] < 1 or data.shape[1] < 1:
        raise ShapeMismatchError(f"{name} must be non-empty, got shape {data.shape}")
    finite = np.isfinite(data)
    if not finite.all():
        idx = np.unravel_index(int(np.flatnonzero(~finite)[0]), data.shape)
        raise NonFiniteInputError(
            f"{name} contains a non-finite value at pixel {idx[:2]}", pixel=idx[:2]
        )
    if data.base is not None or data is arr:
        data = data.copy()
    n_clamped = 0
    if clamp:
        out_of_range = (data < 0.0) | (data > 1.0)
        n_clamped = int(out_of_range.sum())
        if n_clamped:
            log.warning("%s: clamped %d out-of-range value(s) to [0, 1]", name, n_clamped)
            np.clip(data, 0.0, 1.0, out=data)
    data.flags.writeable = False
    return data, n_clamped


@dataclasses.dataclass(frozen=True)
class LinearImage:
    """Scene-linear RGB image, (H, W, 3) float64 in [0, 1] after ingest."""

    data: np.ndarray
    n_clamped: int = 0

    @classmethod
    def from_array(cls, arr) -> "LinearImage":
        data, n_clamped = _ingest(arr, 3, "linear image", clamp=True)
        return cls(data=data, n_clamped=n_clamped)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclasses.dataclass(frozen=True)
class SrgbImage:
    """Display-referred sRGB image, (H, W, 3) float64 in [0, 1]."""

    data: np.ndarray
    n_clamped: int = 0

    @classmethod
    def from_array(cls, arr) -> "SrgbImage":
        data, n_clamped = _ingest(arr, 3, "sRGB image", clamp=True)
        return cls(data=data, n_clamped=n_clamped)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


# ---------------------------------------------------------------------------
# stage kernels (single source of truth for the arithmetic)
# ---------------------------------------------------------------------------


def _clip01(x: np.ndarray) -> np.ndarray:
    return np.clip(x, 0.0, 1.0)


def _wb_kernel(l: np.ndarray, gains: np.ndarray):
    # u_pre_c = w_c * l_c
    u_pre = gains * l
    return u_pre, _clip01(u_pre)


def _ccm_kernel(u: np.ndarray, ccm: np.ndarray) -> np.ndarray:
    # v_i = (C[i,0]*u_0 + C[i,1]*u_1) + C[i,2]*u_2 -- fixed association, no dot()
    u0, u1, u2 = u[..., 0], u[..., 1], u[..., 2]
    rows = [(ccm[i, 0] * u0 + ccm[i, 1] * u1) + ccm[i, 2] * u2 for i in range(3)]
    return np.stack(rows, axis=-1)


def _gamma_kernel(v: np.ndarray, epsilon: float, alpha: float):
    v_tilde = np.maximum(v, epsilon)
    return v_tilde, v_tilde ** alpha


def _tone_kernel(g: np.ndarray):
    # s_pre = g*g*(3 - 2g); left-associated product
    s_pre = g * g * (3.0 - 2.0 * g)
    return s_pre, _clip01(s_pre)


@dataclasses.dataclass(frozen=True)
class StageValues:
    """Every intermediate of the chain for one array of pixels."""

    u_pre: np.ndarray
    u: np.ndarray
    v: np.ndarray
    v_tilde: np.ndarray
    g: np.ndarray
    s_pre: np.ndarray
    s: np.ndarray


def run_stages(l, params: IspParams) -> StageValues:
    """Evaluate the full chain on an (..., 3) array, keeping intermediates.

    This is the path the Jacobian is differentiating: it must round exactly
    like :func:`forward_isp`.
    """
    l = np.asarray(l, dtype=np.float64)
    u_pre, u = _wb_kernel(l, params.wb_gains)
    v = _ccm_kernel(u, params.ccm)
    v_tilde, g = _gamma_kernel(v, params.epsilon, params.alpha)
    s_pre, s = _tone_kernel(g)
    return StageValues(u_pre=u_pre, u=u, v=v, v_tilde=v_tilde, g=g, s_pre=s_pre, s=s)


# ---------------------------------------------------------------------------
# public per-stage operations
# ---------------------------------------------------------------------------


def white_balance(l, params: IspParams) -> np.ndarray:
    """Apply per-channel gains and clip to [0, 1]. Accepts any (..., 3) array."""
    return _wb_kernel(np.asarray(l, dtype=np.float64), params.wb_gains)[1]


def color_correct(u, params: IspParams) -> np.ndarray:
    """Apply the 3x3 CCM. Deliberately unclipped: v may leave [0, 1]."""
    return _ccm_kernel(np.asarray(u, dtype=np.float64), params.ccm)


def gamma_compress(v, params: IspParams) -> np.ndarray:
    """g = max(v, eps) ** (1/gamma); the floor keeps the power total."""
    return _gamma_kernel(np.asarray(v, dtype=np.float64), params.epsilon, params.alpha)[1]


def tone_map(g) -> np.ndarray:
    """Cubic smoothstep s = clip(3 g^2 - 2 g^3, 0, 1)."""
    return _tone_kernel(np.asarray(g, dtype=np.float64))[1]


def forward_pixels(l, params: IspParams) -> np.ndarray:
    """Chain on a raw (..., 3) array with no ingest clamping.

    Used by the Jacobian/remainder machinery, which must evaluate the model
    at points slightly outside [0, 1].
    """
    return run_stages(l, params).s


def forward_isp(image: LinearImage, params: IspParams) -> SrgbImage:
    """Render a LinearImage to sRGB.

    Output is in [0, 1] by construction, so no ingest clamp is re-applied.
    """
    if not isinstance(image, LinearImage):
        raise ShapeMismatchError("forward_isp expects a LinearImage")
    s = forward_pixels(image.data, params)
    s.flags.writeable = False
    return SrgbImage(data=s, n_clamped=0)


def boundary_distance(l, params: IspParams) -> np.ndarray:
    """Min distance of a pixel's intermediates to any clip/clamp boundary.

    Measures |u_pre - {0, 1}|, |v - eps| and |s_pre - {0, 1}| per channel and
    returns the (...,)-shaped minimum. Pixels with a large distance have a
    Jacobian that is stable under small input perturbations; finite-difference
    checks and the remainder analysis sample where this exceeds their step.
    """
    st = run_stages(l, params)
    per_channel = np.minimum(
        np.minimum(np.abs(st.u_pre), np.abs(st.u_pre - 1.0)),
        np.minimum(
            np.abs(st.v - params.epsilon),
            np.minimum(np.abs(st.s_pre), np.abs(st.s_pre - 1.0)),
        ),
    )
    return per_channel.min(axis=-1)
