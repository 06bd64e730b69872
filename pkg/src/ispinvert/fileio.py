"""On-disk formats.

Image container (``.img``): 32-byte header + float32 little-endian planar
payload.  Header layout::

    bytes 0..7    magic  b"ISPIMG01"
    bytes 8..31   six uint32 LE: height, width, channels, domain, pattern, 0

``domain`` selects the typed wrapper on read: 0 linear RGB, 1 sRGB, 2 raw
mosaic, 3 degradation map.  ``pattern`` is the Bayer code for domains 2 and 3
and 0xFFFFFFFF otherwise.  Payload is channel-planar (all of channel 0, then
channel 1, ...), row-major within a plane; float64 values are rounded to
float32 (round-nearest-even) on write.

Parameter files are line-oriented text (``key = values``, ``#`` comments).
Reports and manifests are deterministic JSON: sorted keys, two-space indent,
no timing- or thread-dependent fields, non-finite floats encoded as strings
("inf", "-inf", "nan") so any strict JSON parser can read them.
"""

from __future__ import annotations

import json
import math
import os
import struct

import numpy as np

from .errors import FormatError, InvalidParamsError
from .isp import IspParams, LinearImage, SrgbImage
from .degradation import DegradationMap, RawImage
from .version import __version__

MAGIC = b"ISPIMG01"
HEADER_BYTES = 32

DOMAIN_LINEAR = 0
DOMAIN_SRGB = 1
DOMAIN_RAW = 2
DOMAIN_MAP = 3

PATTERN_NONE = 0xFFFFFFFF
# codes are part of the file format; order must never change
_PATTERN_CODES = {"RGGB": 0, "BGGR": 1, "GRBG": 2, "GBRG": 3}
_PATTERN_NAMES = {i: name for name, i in _PATTERN_CODES.items()}

_PARAM_KEYS = ("wb_gains", "ccm_row0", "ccm_row1", "ccm_row2", "gamma", "epsilon")


# ---------------------------------------------------------------------------
# image container
# ---------------------------------------------------------------------------

def _classify(image):
    if isinstance(image, LinearImage):
        return DOMAIN_LINEAR, PATTERN_NONE, image.data
    if isinstance(image, SrgbImage):
        return DOMAIN_SRGB, PATTERN_NONE, image.data
    if isinstance(image, RawImage):
        return DOMAIN_RAW, _PATTERN_CODES[image.pattern], image.data
    if isinstance(image, DegradationMap):
        return DOMAIN_MAP, _PATTERN_CODES[image.pattern], image.data
    raise FormatError(f"cannot serialize object of type {type(image).__name__}")


def write_image(path, image) -> None:
    """Serialize a typed image to the container format."""
    domain, pattern, data = _classify(image)
    if data.ndim == 2:
        h, w = data.shape
        channels = 1
        planes = data[None]
    else:
        h, w, channels = data.shape
        planes = np.moveaxis(data, -1, 0)
    header = struct.pack("<8sIIIIII", MAGIC, h, w, channels, domain, pattern, 0)
    payload = np.ascontiguousarray(planes, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_image(path, expect=None):
    """Read a container file into its typed wrapper.

    ``expect`` may name a wrapper class; a domain mismatch raises FormatError
    instead of silently reinterpreting the payload.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < HEADER_BYTES:
        raise FormatError(f"{path}: truncated header ({len(blob)} bytes)")
    magic, h, w, channels, domain, pattern, reserved = struct.unpack(
        "<8sIIIIII", blob[:HEADER_BYTES])
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if reserved != 0:
        raise FormatError(f"{path}: nonzero reserved field {reserved}")
    if channels not in (1, 3) or h == 0 or w == 0:
        raise FormatError(f"{path}: unsupported geometry {h}x{w}x{channels}")
    expected = HEADER_BYTES + 4 * h * w * channels
    if len(blob) != expected:
        raise FormatError(f"{path}: payload is {len(blob)} bytes, expected {expected}")
    planes = np.frombuffer(blob, dtype="<f4", offset=HEADER_BYTES).astype(np.float64)
    planes = planes.reshape(channels, h, w)
    data = planes[0] if channels == 1 else np.moveaxis(planes, 0, -1)

    if domain in (DOMAIN_RAW, DOMAIN_MAP):
        if pattern not in _PATTERN_NAMES:
            raise FormatError(f"{path}: unknown bayer pattern code {pattern}")
        pat = _PATTERN_NAMES[pattern]
    elif pattern != PATTERN_NONE:
        raise FormatError(f"{path}: pattern code {pattern} invalid for domain {domain}")

    if domain == DOMAIN_LINEAR and channels == 3:
        out = LinearImage.from_array(data)
    elif domain == DOMAIN_SRGB and channels == 3:
        out = SrgbImage.from_array(data)
    elif domain == DOMAIN_RAW and channels == 1:
        out = RawImage.from_array(data, pat)
    elif domain == DOMAIN_MAP and channels == 1:
        if not np.isfinite(data).all():
            raise FormatError(f"{path}: non-finite degradation map")
        if np.abs(data).max(initial=0.0) > 1.0 + 1e-6:
            raise FormatError(f"{path}: degradation map out of [-1, 1]")
        data = data.copy()
        data.flags.writeable = False
        out = DegradationMap(data=data, pattern=pat)
    else:
        raise FormatError(f"{path}: domain {domain} with {channels} channel(s)")

    if expect is not None and not isinstance(out, expect):
        raise FormatError(
            f"{path}: contains {type(out).__name__}, expected {expect.__name__}")
    return out


# ---------------------------------------------------------------------------
# parameter text files
# ---------------------------------------------------------------------------

def write_params(path, params: IspParams) -> None:
    # repr of Python floats is shortest-round-trip, so read(write(p)) == p
    g = [repr(float(x)) for x in params.wb_gains]
    c = [[repr(float(x)) for x in row] for row in params.ccm]
    lines = ["# rendering-chain parameters"]
    lines.append("wb_gains = {} {} {}".format(*g))
    for i in range(3):
        lines.append("ccm_row{} = {} {} {}".format(i, *c[i]))
    lines.append(f"gamma = {params.gamma!r}")
    lines.append(f"epsilon = {params.epsilon!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_params(path, strict: bool = False) -> IspParams:
    """Parse a parameter file.

    Unknown keys are ignored unless ``strict``; missing gain or CCM keys are
    always an error.  gamma and epsilon fall back to the defaults.
    """
    fields = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise FormatError(f"{path}:{lineno}: expected 'key = values'")
            key, _, rhs = line.partition("=")
            key = key.strip()
            if key not in _PARAM_KEYS:
                if strict:
                    raise FormatError(f"{path}:{lineno}: unknown key {key!r}")
                continue
            if key in fields:
                raise FormatError(f"{path}:{lineno}: duplicate key {key!r}")
            try:
                values = [float(tok) for tok in rhs.split()]
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
            want = 1 if key in ("gamma", "epsilon") else 3
            if len(values) != want:
                raise FormatError(
                    f"{path}:{lineno}: {key} takes {want} value(s), got {len(values)}")
            fields[key] = values
    for key in ("wb_gains", "ccm_row0", "ccm_row1", "ccm_row2"):
        if key not in fields:
            raise FormatError(f"{path}: missing required key {key!r}")
    ccm = np.array([fields["ccm_row0"], fields["ccm_row1"], fields["ccm_row2"]])
    kwargs = {}
    if "gamma" in fields:
        kwargs["gamma"] = fields["gamma"][0]
    if "epsilon" in fields:
        kwargs["epsilon"] = fields["epsilon"][0]
    try:
        return IspParams(wb_gains=np.array(fields["wb_gains"]), ccm=ccm, **kwargs)
    except InvalidParamsError as exc:
        raise FormatError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# deterministic JSON documents
# ---------------------------------------------------------------------------

def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_json_safe(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def write_json(path, doc: dict) -> None:
    """Stable serialization: sorted keys, 2-space indent, trailing newline."""
    text = json.dumps(_json_safe(doc), sort_keys=True, indent=2, allow_nan=False)
    with open(path, "w") as fh:
        fh.write(text + "\n")


def read_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def report_to_dict(report, config) -> dict:
    """JSON form of an inversion report.

    Thread counts and wall times are deliberately excluded: two runs of the
    same inversion must serialize to identical bytes.
    """
    return {
        "format": "inversion-report-v1",
        "library_version": __version__,
        "method": report.method,
        "config": {
            "beta": config.beta,
            "lambda_r": config.lambda_r,
            "sigma_rel_threshold": config.sigma_rel_threshold,
            "sigma_abs_floor": config.sigma_abs_floor,
            "cond_sigma_min": config.cond_sigma_min,
        },
        "counts": {
            "n_well_conditioned": report.n_well_conditioned,
            "n_tsvd": report.n_tsvd,
            "n_zero_jacobian": report.n_zero_jacobian,
            "total_pixels": report.total_pixels,
        },
        "delta_l_percentiles": {f"p{k}": v for k, v in report.delta_l_percentiles.items()},
        "max_abs_residual_srgb": report.max_abs_residual_srgb,
        "warnings": {"n_sb_mismatch": report.n_sb_mismatch},
    }


def write_report(path, report, config) -> None:
    write_json(path, report_to_dict(report, config))


# ---------------------------------------------------------------------------
# PNG export (preview only; quantized, not round-trippable)
# ---------------------------------------------------------------------------

def export_png(path, image) -> None:
    """8-bit preview: q = floor(255 * s + 0.5)."""
    from PIL import Image

    data = getattr(image, "data", None)
    if data is None:
        data = np.asarray(image, dtype=np.float64)
    if data.ndim not in (2, 3):
        raise FormatError(f"cannot export array of shape {data.shape} as PNG")
    q = np.floor(np.clip(data, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    mode = "L" if q.ndim == 2 else "RGB"
    Image.fromarray(q, mode=mode).save(path, format="PNG")


def corpus_paths(out_dir, case_index: int) -> dict:
    tag = f"case{case_index:03d}"
    return {
        "params": os.path.join(out_dir, f"{tag}_params.txt"),
        "l_b": os.path.join(out_dir, f"{tag}_lb.img"),
        "s_b": os.path.join(out_dir, f"{tag}_sb.img"),
        "s_d": os.path.join(out_dir, f"{tag}_sd.img"),
    }
