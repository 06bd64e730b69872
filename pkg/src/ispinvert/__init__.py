"""Forward camera rendering, analytic Jacobians, and robust inversion.

The pipeline maps scene-linear RGB through white balance, color correction,
gamma compression, and a smoothstep tone curve.  This package provides the
forward model, its exact per-pixel Jacobian, a conditioning-aware two-stage
inverse, a naive algebraic inverse for comparison, degradation maps against
mosaicked downsamples, synthetic stress corpora, and the file formats and
CLI that tie them together.
"""

from .version import __version__
from .errors import (ConsistencyError, FormatError, InvalidParamsError, IspError,
                     MetricsError, NonFiniteInputError, ShapeMismatchError,
                     SingularMatrixError, SolveError)
from .isp import (DEFAULT_EPSILON, DEFAULT_GAMMA, IspParams, LinearImage, SrgbImage,
                  boundary_distance, color_correct, forward_isp, forward_pixels,
                  gamma_compress, run_stages, tone_map, white_balance)
from .jacobian import JacobianField, PixelJacobian, jacobian_at, jacobian_image, jacobian_pixels
from .linalg3 import singular_values3, solve_spd3, svd3
from .invert import (METHOD_FIRST_ORDER, METHOD_ROBUST, InversionConfig,
                     InversionReport, blend_lambda_r, first_order_update,
                     invert_image, tsvd_update)
from .naive import (inverse_color_correct, inverse_gamma, inverse_tone_map,
                    inverse_white_balance, naive_invert_image, naive_invert_pixels)
from .degradation import (BAYER_PATTERNS, DegradationMap, RawImage, degradation_map,
                          degradation_summary, downsample, mosaic)
from .metrics import (delta_l_percentiles, lipschitz_estimate, nearest_rank,
                      pixel_norms, psnr,
                      remainder_scaling_check, taylor_remainder)
from .synth import (GENERATOR_ID, STREAM_IMAGE, STREAM_PARAMS, STREAM_PERTURB,
                    SynthConfig, generate_corpus, make_case, make_stress_image,
                    perturb_srgb, random_isp_params, rng_for)
from .evalsuite import evaluate_corpus
from .fileio import (export_png, read_image, read_json, read_params,
                     write_image, write_json, write_params, write_report)
from .selfcheck import run_self_test

__all__ = [
    "__version__",
    # errors
    "IspError", "InvalidParamsError", "NonFiniteInputError", "ShapeMismatchError",
    "SingularMatrixError", "SolveError", "FormatError", "ConsistencyError",
    "MetricsError",
    # forward model
    "DEFAULT_GAMMA", "DEFAULT_EPSILON", "IspParams", "LinearImage", "SrgbImage",
    "white_balance", "color_correct", "gamma_compress", "tone_map", "run_stages",
    "forward_pixels", "forward_isp", "boundary_distance",
    # jacobian + small linear algebra
    "PixelJacobian", "JacobianField", "jacobian_at", "jacobian_pixels",
    "jacobian_image", "svd3", "singular_values3", "solve_spd3",
    # inversion
    "InversionConfig", "InversionReport", "METHOD_ROBUST", "METHOD_FIRST_ORDER",
    "first_order_update", "tsvd_update", "blend_lambda_r", "invert_image",
    # naive inversion
    "inverse_tone_map", "inverse_gamma", "inverse_color_correct",
    "inverse_white_balance", "naive_invert_pixels", "naive_invert_image",
    # degradation maps
    "BAYER_PATTERNS", "RawImage", "DegradationMap", "downsample", "mosaic",
    "degradation_map", "degradation_summary",
    # metrics
    "psnr", "pixel_norms", "nearest_rank", "delta_l_percentiles", "taylor_remainder",
    "lipschitz_estimate", "remainder_scaling_check",
    # synthesis + evaluation
    "GENERATOR_ID", "STREAM_PARAMS", "STREAM_IMAGE", "STREAM_PERTURB",
    "SynthConfig", "rng_for", "random_isp_params", "make_stress_image",
    "perturb_srgb", "make_case", "generate_corpus", "evaluate_corpus",
    # i/o
    "read_image", "write_image", "read_params", "write_params",
    "read_json", "write_json", "write_report", "export_png",
    # diagnostics
    "run_self_test",
]
