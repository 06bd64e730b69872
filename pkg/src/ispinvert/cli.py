"""Command-line front end.

Every subcommand is a thin adapter: parse arguments, load typed objects
through :mod:`ispinvert.fileio`, call one library function, write the result.
No numerical logic lives here.

Warnings and errors go to stderr as JSON lines; result files and the eval
table are the only stdout/disk outputs, so two runs that differ only in
``--threads`` produce byte-identical artifacts.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .degradation import (DOWNSAMPLE_METHODS, RawImage, degradation_map,
                          degradation_summary)
from .errors import IspError
from .evalsuite import evaluate_corpus, format_eval_table
from .fileio import (export_png, read_image, read_params, write_image, write_json,
                     write_params, write_report)
from .invert import METHOD_FIRST_ORDER, METHOD_ROBUST, InversionConfig, invert_image
from .isp import LinearImage, SrgbImage, forward_isp
from .metrics import psnr
from .naive import naive_invert_image
from .parallel import THREADS_ENV_VAR
from .selfcheck import run_self_test
from .synth import SynthConfig, generate_corpus
from .version import __version__

log = logging.getLogger("ispinvert.cli")


class _JsonLineFormatter(logging.Formatter):
    def format(self, record):
        return json.dumps({"level": record.levelname.lower(),
                           "logger": record.name,
                           "message": record.getMessage()}, sort_keys=True)


def _setup_logging(level: str) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(_JsonLineFormatter())
    root = logging.getLogger("ispinvert")
    root.handlers[:] = [handler]
    root.setLevel(getattr(logging, level.upper()))


def _add_threads(p) -> None:
    p.add_argument("--threads", type=int, default=None,
                   help=f"worker threads (default: ${THREADS_ENV_VAR} or 1)")


def _config_from_args(args) -> InversionConfig:
    kwargs = {}
    for name in ("beta", "lambda_r", "sigma_rel_threshold", "cond_sigma_min"):
        value = getattr(args, name, None)
        if value is not None:
            kwargs[name] = value
    return InversionConfig(**kwargs)


def cmd_render(args) -> int:
    params = read_params(args.params, strict=args.strict)
    image = read_image(args.input, expect=LinearImage)
    out = forward_isp(image, params)
    write_image(args.out, out)
    if args.png:
        export_png(args.png, out)
    return 0


def cmd_invert(args) -> int:
    params = read_params(args.params, strict=args.strict)
    s_d = read_image(args.degraded, expect=SrgbImage)
    l_b = read_image(args.base_linear, expect=LinearImage)
    s_b = read_image(args.base_srgb, expect=SrgbImage) if args.base_srgb else None
    config = _config_from_args(args)
    method = METHOD_FIRST_ORDER if args.first_order else METHOD_ROBUST
    l_d, report = invert_image(s_d, s_b, l_b, params, config,
                               method=method, strict=args.strict, threads=args.threads)
    write_image(args.out, l_d)
    if args.report:
        write_report(args.report, report, config)
    if args.png:
        export_png(args.png, l_d)
    if report.n_sb_mismatch:
        log.warning("supplied base render disagrees with forward(l_b) at %d pixel(s)",
                    report.n_sb_mismatch)
    return 0


def cmd_invert_naive(args) -> int:
    params = read_params(args.params, strict=args.strict)
    s_d = read_image(args.degraded, expect=SrgbImage)
    l_d = naive_invert_image(s_d, params)
    write_image(args.out, l_d)
    if args.png:
        export_png(args.png, l_d)
    return 0


def cmd_degradation(args) -> int:
    l_lr = read_image(args.raw, expect=RawImage)
    l_b = read_image(args.base_linear, expect=LinearImage)
    m = degradation_map(l_lr, l_b, factor=args.factor, method=args.down_method)
    write_image(args.out, m)
    if args.summary:
        doc = {"format": "degradation-summary-v1", "factor": args.factor,
               "pattern": m.pattern}
        doc.update(degradation_summary(m))
        write_json(args.summary, doc)
    return 0


def _parse_size(text: str):
    if "x" in text:
        h, _, w = text.partition("x")
        return int(h), int(w)
    return int(text), int(text)


def cmd_synth(args) -> int:
    height, width = _parse_size(args.size)
    cfg = SynthConfig(seed=args.seed, count=args.count, height=height, width=width,
                      saturation_fraction=args.saturation,
                      near_boundary_fraction=args.near_boundary,
                      perturbation_scale=args.perturb_scale)
    manifest = generate_corpus(cfg, args.out_dir)
    print(f"wrote {len(manifest['cases'])} case(s) to {args.out_dir}")
    return 0


def cmd_eval(args) -> int:
    sweep = None
    if args.lambda_sweep:
        sweep = [float(tok) for tok in args.lambda_sweep.split(",") if tok.strip()]
    report = evaluate_corpus(args.corpus, _config_from_args(args),
                             lambda_sweep=sweep, threads=args.threads)
    if args.report:
        write_json(args.report, report)
    print(format_eval_table(report))
    return 0


def cmd_psnr(args) -> int:
    a = read_image(args.a)
    b = read_image(args.b)
    value = psnr(a.data, b.data, peak=args.peak)
    if args.out:
        write_json(args.out, {"format": "psnr-report-v1", "psnr_db": value,
                              "peak": args.peak})
    print(f"{value:.6f}" if value != float("inf") else "inf")
    return 0


def cmd_check(args) -> int:
    result = run_self_test(seed=args.seed)
    if args.out:
        write_json(args.out, {"format": "self-test-v1",
                              "library_version": __version__, **result})
    for c in result["checks"]:
        status = "pass" if c["passed"] else "FAIL"
        print(f"{status}  {c['name']}: {c['value']:.3e} (threshold {c['threshold']:.0e})")
    return 0 if result["passed"] else 1


def cmd_params_init(args) -> int:
    from .synth import STREAM_PARAMS, random_isp_params, rng_for

    cfg = SynthConfig(seed=args.seed)
    params = random_isp_params(cfg, rng_for(cfg.seed, 0, STREAM_PARAMS))
    write_params(args.out, params)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ispinvert",
        description="Forward camera rendering, robust linearized inversion, "
                    "and degradation-map tooling.")
    parser.add_argument("--version", action="version", version=f"ispinvert {__version__}")
    parser.add_argument("--log-level", default="warning",
                        choices=("debug", "info", "warning", "error"))
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="forward-render a linear image to sRGB")
    p.add_argument("--input", required=True, help="linear image (.img)")
    p.add_argument("--params", required=True, help="parameter text file")
    p.add_argument("--out", required=True, help="output sRGB image (.img)")
    p.add_argument("--png", help="optional 8-bit preview")
    p.add_argument("--strict", action="store_true")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("invert", help="robust inversion of a degraded render")
    p.add_argument("--degraded", required=True, help="degraded sRGB image (.img)")
    p.add_argument("--base-linear", required=True, help="base linear image (.img)")
    p.add_argument("--base-srgb", help="base render; recomputed from the linear "
                                       "base when omitted (recommended)")
    p.add_argument("--params", required=True)
    p.add_argument("--out", required=True, help="output linear image (.img)")
    p.add_argument("--report", help="write the inversion report JSON here")
    p.add_argument("--png", help="optional 8-bit preview")
    p.add_argument("--first-order", action="store_true",
                   help="ablation: plain ridge step, no conditioning routing")
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--lambda-r", dest="lambda_r", type=float, default=None)
    p.add_argument("--sigma-rel-threshold", dest="sigma_rel_threshold",
                   type=float, default=None)
    p.add_argument("--cond-sigma-min", dest="cond_sigma_min", type=float, default=None)
    p.add_argument("--strict", action="store_true",
                   help="base-render mismatches raise instead of being counted")
    _add_threads(p)
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("invert-naive", help="stage-by-stage algebraic inversion")
    p.add_argument("--degraded", required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--png", help="optional 8-bit preview")
    p.add_argument("--strict", action="store_true")
    p.set_defaults(func=cmd_invert_naive)

    p = sub.add_parser("degradation", help="residual map against a mosaicked downsample")
    p.add_argument("--raw", required=True, help="low-res raw mosaic (.img)")
    p.add_argument("--base-linear", required=True)
    p.add_argument("--factor", type=int, default=4)
    p.add_argument("--down-method", default="area", choices=sorted(DOWNSAMPLE_METHODS))
    p.add_argument("--out", required=True, help="output degradation map (.img)")
    p.add_argument("--summary", help="write summary statistics JSON here")
    p.set_defaults(func=cmd_degradation)

    p = sub.add_parser("synth", help="generate a synthetic stress corpus")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=8)
    p.add_argument("--size", default="128", help="N or HxW (default 128)")
    p.add_argument("--saturation", type=float, default=0.25,
                   help="fraction of pixels driven into clipping")
    p.add_argument("--near-boundary", type=float, default=0.05,
                   help="fraction of pixels grazing a clip boundary")
    p.add_argument("--perturb-scale", type=float, default=0.02)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="compare inversion methods over a corpus")
    p.add_argument("--corpus", required=True, help="directory with manifest.json")
    p.add_argument("--report", help="write the eval report JSON here")
    p.add_argument("--lambda-sweep", help="comma-separated restoration strengths")
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--lambda-r", dest="lambda_r", type=float, default=None)
    _add_threads(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("psnr", help="PSNR between two image files")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--peak", type=float, default=1.0)
    p.add_argument("--out", help="write {psnr_db} JSON here")
    p.set_defaults(func=cmd_psnr)

    p = sub.add_parser("check", help="run the numerical self-test")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the self-test report JSON here")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("params-init", help="write a randomly drawn parameter file")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_params_init)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    _setup_logging(args.log_level)
    try:
        return args.func(args)
    except (IspError, OSError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
