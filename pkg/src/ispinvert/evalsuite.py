"""Corpus evaluation: naive inversion vs. the linearized solvers.

For every case the degraded render S_d is inverted three ways and compared
against the ground-truth linear image L_b:

* ``naive``        stage-by-stage algebraic inversion of S_d alone
* ``first-order``  single ridge step on the full image (ablation)
* ``robust``       conditioning-routed two-stage solver

Reported PSNRs pool squared error over all pixels of all cases (one MSE per
method, not a mean of per-case PSNRs, so empty-ish cases cannot distort the
aggregate).  Corpus images are float32-quantized on disk, so the base render
is recomputed from L_b instead of trusting the stored S_b; the linearization
then matches the forward model bit-for-bit.
"""

from __future__ import annotations

import dataclasses
import math
import os

import numpy as np

from . import fileio
from .errors import FormatError
from .invert import METHOD_FIRST_ORDER, METHOD_ROBUST, InversionConfig, invert_image
from .isp import LinearImage, SrgbImage, forward_isp
from .metrics import nearest_rank, pixel_norms
from .naive import naive_invert_image
from .version import __version__

METHOD_NAIVE = "naive"
EVAL_METHODS = (METHOD_NAIVE, METHOD_FIRST_ORDER, METHOD_ROBUST)

_PERCENTILES = (50, 95, 99)


def _pooled_psnr(sq_sum: float, count: int, peak: float = 1.0) -> float:
    mse = sq_sum / count
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def _sq_err(a: np.ndarray, b: np.ndarray) -> float:
    d = a - b
    return float(np.sum(d * d))


class _MethodAccumulator:
    def __init__(self):
        self.sq_linear = 0.0
        self.sq_srgb = 0.0
        self.count = 0
        self.norm_chunks = []
        self.per_case = []

    def add_case(self, index: int, l_hat: LinearImage, l_b: LinearImage,
                 s_d: SrgbImage, params) -> None:
        s_hat = forward_isp(l_hat, params)
        sq_lin = _sq_err(l_hat.data, l_b.data)
        sq_srgb = _sq_err(s_hat.data, s_d.data)
        n = l_b.data.shape[0] * l_b.data.shape[1] * 3
        self.sq_linear += sq_lin
        self.sq_srgb += sq_srgb
        self.count += n
        self.norm_chunks.append(pixel_norms(l_hat.data - l_b.data).ravel())
        self.per_case.append({
            "index": index,
            "psnr_linear_db": _pooled_psnr(sq_lin, n),
            "psnr_srgb_db": _pooled_psnr(sq_srgb, n),
        })

    def summary(self) -> dict:
        norms = np.sort(np.concatenate(self.norm_chunks))
        return {
            "psnr_linear_db": _pooled_psnr(self.sq_linear, self.count),
            "psnr_srgb_db": _pooled_psnr(self.sq_srgb, self.count),
            "delta_l_percentiles": {f"p{p}": nearest_rank(norms, p) for p in _PERCENTILES},
            "cases": self.per_case,
        }


def load_corpus(corpus_dir):
    """Yield (index, params, l_b, s_b, s_d) in manifest order."""
    manifest_path = os.path.join(corpus_dir, "manifest.json")
    if not os.path.exists(manifest_path):
        raise FormatError(f"{corpus_dir}: no manifest.json")
    manifest = fileio.read_json(manifest_path)
    if manifest.get("format") != "corpus-manifest-v1":
        raise FormatError(f"{manifest_path}: not a corpus manifest")
    for case in manifest["cases"]:
        files = {k: os.path.join(corpus_dir, v) for k, v in case["files"].items()}
        yield (case["index"],
               fileio.read_params(files["params"]),
               fileio.read_image(files["l_b"], expect=LinearImage),
               fileio.read_image(files["s_b"], expect=SrgbImage),
               fileio.read_image(files["s_d"], expect=SrgbImage))


def _invert_method(method, s_d, l_b, params, config, threads):
    if method == METHOD_NAIVE:
        return naive_invert_image(s_d, params)
    l_hat, _ = invert_image(s_d, None, l_b, params, config,
                            method=method, threads=threads)
    return l_hat


def evaluate_corpus(corpus_dir, config: InversionConfig | None = None,
                    methods=EVAL_METHODS, lambda_sweep=None, threads=None) -> dict:
    """Run the comparison over a generated corpus; returns the report dict."""
    config = config or InversionConfig()
    for m in methods:
        if m not in EVAL_METHODS:
            raise FormatError(f"unknown eval method {m!r}")

    acc = {m: _MethodAccumulator() for m in methods}
    sweep_acc = {float(lam): [0.0, 0] for lam in (lambda_sweep or ())}
    n_cases = 0
    for index, params, l_b, _s_b, s_d in load_corpus(corpus_dir):
        n_cases += 1
        for m in methods:
            l_hat = _invert_method(m, s_d, l_b, params, config, threads)
            acc[m].add_case(index, l_hat, l_b, s_d, params)
        for lam, bucket in sweep_acc.items():
            cfg = dataclasses.replace(config, lambda_r=lam)
            l_hat, _ = invert_image(s_d, None, l_b, params, cfg,
                                    method=METHOD_ROBUST, threads=threads)
            bucket[0] += _sq_err(l_hat.data, l_b.data)
            bucket[1] += l_b.data.size
    if n_cases == 0:
        raise FormatError(f"{corpus_dir}: corpus has no cases")

    report = {
        "format": "eval-report-v1",
        "library_version": __version__,
        "n_cases": n_cases,
        "inversion_config": {
            "beta": config.beta,
            "lambda_r": config.lambda_r,
            "sigma_rel_threshold": config.sigma_rel_threshold,
            "sigma_abs_floor": config.sigma_abs_floor,
            "cond_sigma_min": config.cond_sigma_min,
        },
        "methods": {m: acc[m].summary() for m in methods},
    }
    if sweep_acc:
        report["lambda_sweep"] = [
            {"lambda_r": lam, "psnr_linear_db": _pooled_psnr(sq, cnt)}
            for lam, (sq, cnt) in sorted(sweep_acc.items())
        ]
    return report


def format_eval_table(report: dict) -> str:
    """Fixed-width text table of the aggregate numbers."""
    rows = [f"{'method':<14}{'psnr_linear':>14}{'psnr_srgb':>14}"
            f"{'p50':>12}{'p95':>12}{'p99':>12}"]
    for m in EVAL_METHODS:
        if m not in report["methods"]:
            continue
        s = report["methods"][m]
        pct = s["delta_l_percentiles"]
        rows.append(f"{m:<14}{s['psnr_linear_db']:>14.4f}{s['psnr_srgb_db']:>14.4f}"
                    f"{pct['p50']:>12.3e}{pct['p95']:>12.3e}{pct['p99']:>12.3e}")
    if "lambda_sweep" in report:
        rows.append("")
        rows.append(f"{'lambda_r':<14}{'psnr_linear':>14}")
        for entry in report["lambda_sweep"]:
            rows.append(f"{entry['lambda_r']:<14.3f}{entry['psnr_linear_db']:>14.4f}")
    return "\n".join(rows)
