"""Spatial degradation map between a low-res RAW capture and a base render.

    M = L_lr - Mos(Down(L_b))

``Down`` is an area-average (box) downsample by an integer factor and ``Mos``
samples one channel per pixel on a 2x2 Bayer lattice. Both operands live on
the low-res mosaic grid, so M is a single-channel signed field in [-1, 1].
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .errors import InvalidParamsError, ShapeMismatchError
from .isp import LinearImage, _ingest

# channel index (0=R, 1=G, 2=B) of each 2x2 site, row-major
BAYER_PATTERNS = {
    "RGGB": ((0, 1), (1, 2)),
    "BGGR": ((2, 1), (1, 0)),
    "GRBG": ((1, 0), (2, 1)),
    "GBRG": ((1, 2), (0, 1)),
}

DOWNSAMPLE_METHODS = ("area", "bilinear")


def _check_pattern(pattern: str) -> str:
    p = str(pattern).upper()
    if p not in BAYER_PATTERNS:
        raise InvalidParamsError(
            f"unknown bayer pattern {pattern!r}; expected one of {sorted(BAYER_PATTERNS)}")
    return p


@dataclasses.dataclass(frozen=True)
class RawImage:
    """Single-channel mosaiced image, (H, W) float64 in [0, 1]."""

    data: np.ndarray
    pattern: str = "RGGB"

    @classmethod
    def from_array(cls, arr, pattern: str = "RGGB") -> "RawImage":
        data, _ = _ingest(arr, 1, "raw image", clamp=True)
        return cls(data=data, pattern=_check_pattern(pattern))

    def __post_init__(self):
        object.__setattr__(self, "pattern", _check_pattern(self.pattern))


@dataclasses.dataclass(frozen=True)
class DegradationMap:
    """Signed residual on the mosaic grid, (H, W) float64 in [-1, 1]."""

    data: np.ndarray
    pattern: str = "RGGB"


def downsample(image: LinearImage, factor: int, method: str = "area") -> LinearImage:
    """Integer-factor downsample. Dimensions must divide evenly.

    "area" is the reference kernel (each output pixel is the exact mean of a
    factor x factor block); "bilinear" resamples at block centers and exists
    for parity experiments against pipelines that interpolate.
    """
    factor = int(factor)
    if factor < 1:
        raise InvalidParamsError(f"downsample factor must be >= 1, got {factor}")
    if method not in DOWNSAMPLE_METHODS:
        raise InvalidParamsError(f"unknown downsample method {method!r}")
    data = image.data
    h, w = data.shape[:2]
    if h % factor or w % factor:
        raise ShapeMismatchError(
            f"image {h}x{w} is not divisible by downsample factor {factor}")
    if factor == 1:
        return image
    if method == "area":
        out = data.reshape(h // factor, factor, w // factor, factor, 3).mean(axis=(1, 3))
    else:
        out = _bilinear(data, h // factor, w // factor)
    out = np.clip(out, 0.0, 1.0)  # guard accumulated roundoff at the rim of [0, 1]
    out.flags.writeable = False
    return LinearImage(data=out, n_clamped=0)


def _bilinear(data, out_h, out_w):
    h, w = data.shape[:2]
    ys = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    y0 = np.clip(np.floor(ys).astype(np.int64), 0, h - 1)
    x0 = np.clip(np.floor(xs).astype(np.int64), 0, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = np.clip(ys - y0, 0.0, 1.0)[:, None, None]
    fx = np.clip(xs - x0, 0.0, 1.0)[None, :, None]
    top = data[y0[:, None], x0] * (1.0 - fx) + data[y0[:, None], x1] * fx
    bot = data[y1[:, None], x0] * (1.0 - fx) + data[y1[:, None], x1] * fx
    return top * (1.0 - fy) + bot * fy


def mosaic(image: LinearImage, pattern: str = "RGGB") -> RawImage:
    """Sample one channel per pixel on the 2x2 Bayer lattice."""
    pattern = _check_pattern(pattern)
    data = image.data
    h, w = data.shape[:2]
    if h % 2 or w % 2:
        raise ShapeMismatchError(f"mosaic needs even dimensions, got {h}x{w}")
    out = np.empty((h, w))
    sites = BAYER_PATTERNS[pattern]
    for i in (0, 1):
        for j in (0, 1):
            out[i::2, j::2] = data[i::2, j::2, sites[i][j]]
    out.flags.writeable = False
    return RawImage(data=out, pattern=pattern)


def degradation_map(l_lr: RawImage, l_b: LinearImage, factor: int = 4,
                    method: str = "area") -> DegradationMap:
    """M = l_lr - Mos(Down(l_b)) on the low-res mosaic grid.

    The pattern is taken from ``l_lr``. Shapes must be consistent:
    Down(l_b) must match l_lr exactly.
    """
    if not isinstance(l_lr, RawImage):
        raise ShapeMismatchError("degradation_map expects a RawImage for l_lr")
    down = downsample(l_b, factor, method)
    if down.data.shape[:2] != l_lr.data.shape:
        raise ShapeMismatchError(
            f"Down(l_b) is {down.data.shape[:2]}, l_lr is {l_lr.data.shape}")
    mos = mosaic(down, l_lr.pattern)
    m = l_lr.data - mos.data
    m.flags.writeable = False
    return DegradationMap(data=m, pattern=l_lr.pattern)


def degradation_summary(m: DegradationMap) -> dict:
    """Mean/max absolute residual plus per-channel-site means."""
    data = m.data
    sites = BAYER_PATTERNS[m.pattern]
    per_channel = {0: [], 1: [], 2: []}
    for i in (0, 1):
        for j in (0, 1):
            per_channel[sites[i][j]].append(data[i::2, j::2])
    means = {ch: float(np.concatenate([b.ravel() for b in blocks]).mean())
             for ch, blocks in per_channel.items()}
    return {
        "mean_abs": float(np.abs(data).mean()),
        "max_abs": float(np.abs(data).max()),
        "mean_r": means[0],
        "mean_g": means[1],
        "mean_b": means[2],
    }
