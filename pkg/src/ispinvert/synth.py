"""Synthetic stress-corpus generation.

Produces (params, L_b, S_b, S_d) cases with controlled difficulty: a target
fraction of saturated pixels (channel clipping or signal loss in the dark
floor), a band of near-boundary pixels whose Jacobians are ill conditioned
without being exactly singular, and a well-exposed interior remainder.

Reproducibility contract: every random draw comes from a PCG64 generator
seeded as SeedSequence([seed, case_index, stream_id]).  Regenerating with the
same config yields byte-identical corpora.
"""

from __future__ import annotations

import dataclasses
import importlib.resources
import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParamsError
from .isp import IspParams, LinearImage, SrgbImage, _ccm_kernel, forward_isp
from .degradation import _bilinear

GENERATOR_ID = "pcg64/stream-v1"

# Per-case stream ids.  New streams must be appended, never renumbered.
STREAM_PARAMS = 0
STREAM_IMAGE = 1
STREAM_PERTURB = 2

# A channel can only clip at the top (u_pre > 1) when its gain clears 1 with
# a little headroom; gains at or near 1 top out at u_pre == gain.
_MIN_CLIPPABLE_GAIN = 1.05

_PERTURB_GRID = 16  # coarse-noise cell size in pixels; keeps S_d low-frequency


def _positive_range(value, name):
    lo, hi = float(value[0]), float(value[1])
    if not (math.isfinite(lo) and math.isfinite(hi) and 0.0 < lo <= hi):
        raise InvalidParamsError(f"{name} must satisfy 0 < lo <= hi, got {value}")
    return lo, hi


@dataclass(frozen=True)
class SynthConfig:
    """Knobs for corpus generation.

    ``saturation_fraction`` is the fraction of pixels deliberately driven into
    clipping or the dark floor; ``near_boundary_fraction`` adds pixels whose
    color sits just inside a clip boundary, which is what separates the
    truncated solver from the plain regularized one.  The two fractions are
    disjoint populations; their sum may not exceed 1.
    """

    seed: int = 0
    count: int = 8
    height: int = 128
    width: int = 128
    saturation_fraction: float = 0.25
    near_boundary_fraction: float = 0.05
    perturbation_scale: float = 0.02
    wb_red_range: tuple = (1.5, 2.5)
    wb_green_range: tuple = (1.0, 1.0)
    wb_blue_range: tuple = (1.3, 2.0)
    gamma: float = 2.2
    epsilon: float = 1e-8
    interior_v_range: tuple = (0.1, 0.9)
    interior_u_margin: float = 0.02

    def __post_init__(self):
        if int(self.count) < 1:
            raise InvalidParamsError(f"count must be >= 1, got {self.count}")
        if int(self.height) < 2 or int(self.width) < 2:
            raise InvalidParamsError(
                f"image size must be at least 2x2, got {self.height}x{self.width}")
        for name in ("saturation_fraction", "near_boundary_fraction"):
            f = float(getattr(self, name))
            if not (0.0 <= f <= 1.0):
                raise InvalidParamsError(f"{name} must be in [0, 1], got {f}")
        if self.saturation_fraction + self.near_boundary_fraction > 1.0 + 1e-12:
            raise InvalidParamsError("saturation_fraction + near_boundary_fraction > 1")
        if not (0.0 <= float(self.perturbation_scale) <= 1.0):
            raise InvalidParamsError(
                f"perturbation_scale must be in [0, 1], got {self.perturbation_scale}")
        _positive_range(self.wb_red_range, "wb_red_range")
        _positive_range(self.wb_green_range, "wb_green_range")
        _positive_range(self.wb_blue_range, "wb_blue_range")
        lo, hi = float(self.interior_v_range[0]), float(self.interior_v_range[1])
        if not (0.0 < lo < hi < 1.0):
            raise InvalidParamsError(f"interior_v_range must be inside (0, 1), got {self.interior_v_range}")
        if not (0.0 < float(self.interior_u_margin) < 0.5):
            raise InvalidParamsError(
                f"interior_u_margin must be in (0, 0.5), got {self.interior_u_margin}")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for key in ("wb_red_range", "wb_green_range", "wb_blue_range", "interior_v_range"):
            d[key] = list(d[key])
        return d


def rng_for(seed: int, case_index: int, stream: int) -> np.random.Generator:
    """Independent per-case, per-purpose stream."""
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence([int(seed), int(case_index), int(stream)])))


def load_ccm_presets():
    text = importlib.resources.files("ispinvert.data").joinpath("ccm_presets.json").read_text()
    doc = json.loads(text)
    return [np.asarray(p["matrix"], dtype=np.float64) for p in doc["presets"]]


def random_isp_params(cfg: SynthConfig, rng: np.random.Generator) -> IspParams:
    """Draw gains per channel and a CCM as a convex mix of the presets.

    The mixed matrix has rows summing to 1 already; rows are renormalized
    anyway so the luminance-preservation property holds to round-off even if
    a preset file with unnormalized rows is swapped in.
    """
    w_r = rng.uniform(*cfg.wb_red_range)
    w_g = rng.uniform(*cfg.wb_green_range)
    w_b = rng.uniform(*cfg.wb_blue_range)
    presets = load_ccm_presets()
    weights = rng.dirichlet(np.ones(len(presets)))
    ccm = np.zeros((3, 3))
    for wt, mat in zip(weights, presets):
        ccm += wt * mat
    ccm /= ccm.sum(axis=1, keepdims=True)
    return IspParams(wb_gains=np.array([w_r, w_g, w_b]), ccm=ccm,
                     gamma=cfg.gamma, epsilon=cfg.epsilon)


def _interior_pixels(cfg: SynthConfig, params: IspParams, rng, count: int) -> np.ndarray:
    """Rejection-sample pixels that keep every stage away from its clips."""
    if count == 0:
        return np.zeros((0, 3))
    w = params.wb_gains
    margin = cfg.interior_u_margin
    lo_v, hi_v = cfg.interior_v_range
    l_lo = margin / w
    l_hi = (1.0 - margin) / w  # gains >= 1 keep this <= 1
    out = np.empty((count, 3))
    filled = 0
    for _ in range(64):
        need = count - filled
        if need == 0:
            break
        cand = l_lo + (l_hi - l_lo) * rng.random((need, 3))
        v = _ccm_kernel(w * cand, params.ccm)
        ok = (v >= lo_v).all(axis=-1) & (v <= hi_v).all(axis=-1)
        kept = cand[ok]
        out[filled:filled + kept.shape[0]] = kept
        filled += kept.shape[0]
    if filled < count:
        # Gray is always admissible when CCM rows sum to 1: v == u == t.
        t = rng.uniform(lo_v + 1e-3, hi_v - 1e-3, count - filled)
        out[filled:] = t[:, None] / w
    return out


def _bright_partial_pixels(params: IspParams, rng, count: int, clippable) -> np.ndarray:
    """One channel pushed over the top clip, the others high but interior."""
    if count == 0:
        return np.zeros((0, 3))
    w = params.wb_gains
    u = rng.uniform(0.7, 0.98, (count, 3))
    chan = clippable[rng.integers(0, clippable.size, count)]
    hi = np.minimum(1.6, w[chan] * 0.999)
    u[np.arange(count), chan] = rng.uniform(1.02, hi)
    return u / w


def _bright_full_pixels(params: IspParams, rng, count: int) -> np.ndarray:
    """All channels at or over the top clip (l == 1 where the gain lacks headroom)."""
    if count == 0:
        return np.zeros((0, 3))
    w = params.wb_gains
    l = np.ones((count, 3))
    for j in range(3):
        if w[j] > _MIN_CLIPPABLE_GAIN:
            u_t = rng.uniform(1.02, min(1.6, w[j] * 0.999), count)
            l[:, j] = u_t / w[j]
    return l


def _dark_pixels(params: IspParams, rng, count: int) -> np.ndarray:
    """Half exact zeros, half small enough that every CCM output is <= epsilon."""
    l = np.zeros((count, 3))
    half = count // 2
    if half < count:
        max_row = np.abs(params.ccm).sum(axis=1).max()
        cap = (0.5 * params.epsilon / max_row) / params.wb_gains
        l[half:] = rng.uniform(0.0, 1.0, (count - half, 3)) * cap
    return l


def _near_boundary_pixels(params: IspParams, rng, count: int) -> np.ndarray:
    """Pixels whose CCM output grazes the tone-input ceiling in one channel.

    One channel targets v = 1 - delta with delta log-uniform in [2e-6, 5e-4]:
    close enough that the smoothstep slope 6g(1-g) collapses one Jacobian
    direction far below the conditioning threshold, but never exactly zero.
    """
    if count == 0:
        return np.zeros((0, 3))
    w = params.wb_gains
    delta = 10.0 ** rng.uniform(math.log10(2e-6), math.log10(5e-4), count)
    out = np.empty((count, 3))
    done = np.zeros(count, dtype=bool)
    for _ in range(32):
        todo = np.flatnonzero(~done)
        if todo.size == 0:
            break
        v_t = rng.uniform(0.25, 0.7, (todo.size, 3))
        chan = rng.integers(0, 3, todo.size)
        v_t[np.arange(todo.size), chan] = 1.0 - delta[todo]
        u = np.linalg.solve(params.ccm, v_t.T).T
        l_cand = u / w
        ok = ((u >= 0.01).all(axis=-1) & (u <= 0.9995).all(axis=-1)
              & (l_cand <= 1.0).all(axis=-1))
        good = todo[ok]
        out[good] = l_cand[ok]
        done[good] = True
    rest = np.flatnonzero(~done)
    if rest.size:
        # Gray fallback: v = 1 - delta in every channel, still un-clipped.
        out[rest] = (1.0 - delta[rest])[:, None] / w
    return out


def make_stress_image(cfg: SynthConfig, params: IspParams, rng: np.random.Generator) -> LinearImage:
    """Assemble the stress populations at random locations.

    Guarantees (used as test oracles): the saturated population and only the
    saturated population renders with max(u_pre) >= 1 or max(v) <= epsilon,
    so the realized saturated fraction equals round(f * n) / n exactly.
    """
    h, w_px = int(cfg.height), int(cfg.width)
    n = h * w_px
    n_sat = int(round(cfg.saturation_fraction * n))
    n_band = min(int(round(cfg.near_boundary_fraction * n)), n - n_sat)
    n_interior = n - n_sat - n_band

    clippable = np.flatnonzero(params.wb_gains > _MIN_CLIPPABLE_GAIN)
    if clippable.size:
        n_bp = int(round(0.45 * n_sat))
        n_bf = int(round(0.25 * n_sat))
    else:
        n_bp = n_bf = 0  # no headroom anywhere: the whole budget goes dark
    n_dark = n_sat - n_bp - n_bf

    perm = rng.permutation(n)
    flat = np.empty((n, 3))
    stop_bp = n_bp
    stop_bf = n_bp + n_bf
    stop_dark = n_sat
    stop_band = n_sat + n_band
    flat[perm[:stop_bp]] = _bright_partial_pixels(params, rng, n_bp, clippable)
    flat[perm[stop_bp:stop_bf]] = _bright_full_pixels(params, rng, n_bf)
    flat[perm[stop_bf:stop_dark]] = _dark_pixels(params, rng, n_dark)
    flat[perm[stop_dark:stop_band]] = _near_boundary_pixels(params, rng, n_band)
    flat[perm[stop_band:]] = _interior_pixels(cfg, params, rng, n_interior)
    return LinearImage.from_array(flat.reshape(h, w_px, 3))


def perturb_srgb(s_b: SrgbImage, scale: float, rng: np.random.Generator) -> SrgbImage:
    """Smooth bounded perturbation: ||S_d - S_b||_inf <= scale by construction."""
    if not (math.isfinite(scale) and 0.0 <= scale <= 1.0):
        raise InvalidParamsError(f"perturbation scale must be in [0, 1], got {scale}")
    if scale == 0.0:
        return SrgbImage.from_array(s_b.data)
    h, w = s_b.height, s_b.width
    gh = max(2, -(-h // _PERTURB_GRID) + 1)
    gw = max(2, -(-w // _PERTURB_GRID) + 1)
    coarse = rng.uniform(-1.0, 1.0, (gh, gw, 3))
    field = _bilinear(coarse, h, w)
    p = np.clip(field * scale, -scale, scale)
    return SrgbImage.from_array(np.clip(s_b.data + p, 0.0, 1.0))


def make_case(cfg: SynthConfig, case_index: int):
    """One corpus case: (params, L_b, S_b, S_d)."""
    params = random_isp_params(cfg, rng_for(cfg.seed, case_index, STREAM_PARAMS))
    l_b = make_stress_image(cfg, params, rng_for(cfg.seed, case_index, STREAM_IMAGE))
    s_b = forward_isp(l_b, params)
    s_d = perturb_srgb(s_b, cfg.perturbation_scale,
                       rng_for(cfg.seed, case_index, STREAM_PERTURB))
    return params, l_b, s_b, s_d


def generate_corpus(cfg: SynthConfig, out_dir) -> dict:
    """Write all cases plus manifest.json; returns the manifest dict.

    Rerunning with the same config overwrites the same bytes, so the output
    directory can be compared with a plain recursive diff.
    """
    from . import fileio  # late import: fileio never imports synth
    from .version import __version__

    os.makedirs(out_dir, exist_ok=True)
    cases = []
    for i in range(cfg.count):
        params, l_b, s_b, s_d = make_case(cfg, i)
        paths = fileio.corpus_paths(out_dir, i)
        fileio.write_params(paths["params"], params)
        fileio.write_image(paths["l_b"], l_b)
        fileio.write_image(paths["s_b"], s_b)
        fileio.write_image(paths["s_d"], s_d)
        cases.append({
            "index": i,
            "files": {k: os.path.basename(v) for k, v in paths.items()},
        })
    manifest = {
        "format": "corpus-manifest-v1",
        "library_version": __version__,
        "generator": GENERATOR_ID,
        "config": cfg.to_dict(),
        "cases": cases,
    }
    fileio.write_json(os.path.join(out_dir, "manifest.json"), manifest)
    return manifest
