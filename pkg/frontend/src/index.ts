/**
 * High-level bindings.  Each function mirrors one CLI operation: inputs are
 * serialized to a private temp directory, the CLI runs out-of-process, and
 * its outputs are decoded back.  Inputs are never mutated; every number
 * passes through the shortest-round-trip decimal form, so values reach the
 * core bit-exactly and results come back bit-exactly (float32 payloads).
 *
 * Because the work runs in a subprocess, calls may be issued concurrently;
 * per-call core parallelism is set with `threads`.
 */
import { readFile, writeFile } from "node:fs/promises";
import { join } from "node:path";

import { decodeImage, encodeImage, type Image } from "./container.js";
import { FormatError } from "./errors.js";
import { serializeParams, type IspParams } from "./params.js";
import { runCli, withTempDir } from "./runner.js";

export {
  decodeImage, encodeImage, makeImage, sampleAt,
  HEADER_BYTES, MAGIC, PATTERN_NONE,
} from "./container.js";
export type { BayerPattern, Domain, Image } from "./container.js";
export { CliError, FormatError } from "./errors.js";
export {
  DEFAULT_EPSILON, DEFAULT_GAMMA, parseParams, serializeParams,
} from "./params.js";
export type { IspParams, Mat3, Vec3 } from "./params.js";
export { pythonExecutable, runCli } from "./runner.js";

export interface InversionOptions {
  /** Ridge regularization strength. */
  beta?: number;
  /** Restoration strength in [0, 1]; 0 returns the base image exactly. */
  lambdaR?: number;
  /** Relative singular-value cutoff for the truncated-SVD path. */
  sigmaRelThreshold?: number;
  /** Smallest σ₃ treated as well-conditioned. */
  condSigmaMin?: number;
  /** Ablation: plain ridge step everywhere, no conditioning routing. */
  firstOrder?: boolean;
  /** Base render; recomputed from the linear base when omitted. */
  baseSrgb?: Image;
  /** Fail on base-render inconsistencies instead of counting them. */
  strict?: boolean;
  /** Worker threads for the core; never changes the result bytes. */
  threads?: number;
}

export interface InversionReport {
  format: string;
  method: string;
  library_version: string;
  config: {
    beta: number;
    cond_sigma_min: number;
    lambda_r: number;
    sigma_abs_floor: number;
    sigma_rel_threshold: number;
  };
  counts: {
    total_pixels: number;
    n_well_conditioned: number;
    n_tsvd: number;
    n_zero_jacobian: number;
  };
  delta_l_percentiles: Record<string, number>;
  max_abs_residual_srgb: number | string;
  warnings: { n_sb_mismatch: number };
}

export interface InversionResult {
  image: Image;
  report: InversionReport;
}

export interface DegradationSummary {
  mean_abs: number;
  max_abs: number;
  mean_r: number;
  mean_g: number;
  mean_b: number;
  [key: string]: number;
}

export interface DegradationResult {
  map: Image;
  summary: DegradationSummary;
}

function requireDomain(img: Image, domain: Image["domain"], what: string): void {
  if (img.domain !== domain) {
    throw new FormatError(`${what} must be a ${domain} image, got ${img.domain}`);
  }
}

async function writeInputs(
  dir: string, images: Record<string, Image>, params?: IspParams,
): Promise<Record<string, string>> {
  const paths: Record<string, string> = {};
  for (const [name, img] of Object.entries(images)) {
    const p = join(dir, `${name}.img`);
    await writeFile(p, encodeImage(img));
    paths[name] = p;
  }
  if (params !== undefined) {
    const p = join(dir, "params.txt");
    await writeFile(p, serializeParams(params), "utf8");
    paths["params"] = p;
  }
  return paths;
}

/** Render a linear image through the forward chain to sRGB. */
export async function forwardIsp(baseLinear: Image, params: IspParams): Promise<Image> {
  requireDomain(baseLinear, "linear", "input");
  return withTempDir(async (dir) => {
    const paths = await writeInputs(dir, { input: baseLinear }, params);
    const out = join(dir, "out.img");
    await runCli(["render", "--input", paths["input"] as string,
                  "--params", paths["params"] as string, "--out", out]);
    return decodeImage(await readFile(out));
  });
}

/** Robust linearized inversion of a degraded render around a base image. */
export async function invertImage(
  degraded: Image, baseLinear: Image, params: IspParams,
  options: InversionOptions = {},
): Promise<InversionResult> {
  requireDomain(degraded, "srgb", "degraded input");
  requireDomain(baseLinear, "linear", "base");
  if (options.baseSrgb !== undefined) {
    requireDomain(options.baseSrgb, "srgb", "base render");
  }
  return withTempDir(async (dir) => {
    const images: Record<string, Image> = { degraded, base_linear: baseLinear };
    if (options.baseSrgb !== undefined) {
      images["base_srgb"] = options.baseSrgb;
    }
    const paths = await writeInputs(dir, images, params);
    const out = join(dir, "out.img");
    const reportPath = join(dir, "report.json");
    const args = ["invert",
                  "--degraded", paths["degraded"] as string,
                  "--base-linear", paths["base_linear"] as string,
                  "--params", paths["params"] as string,
                  "--out", out, "--report", reportPath];
    if (paths["base_srgb"] !== undefined) args.push("--base-srgb", paths["base_srgb"]);
    if (options.beta !== undefined) args.push("--beta", String(options.beta));
    if (options.lambdaR !== undefined) args.push("--lambda-r", String(options.lambdaR));
    if (options.sigmaRelThreshold !== undefined) {
      args.push("--sigma-rel-threshold", String(options.sigmaRelThreshold));
    }
    if (options.condSigmaMin !== undefined) {
      args.push("--cond-sigma-min", String(options.condSigmaMin));
    }
    if (options.firstOrder === true) args.push("--first-order");
    if (options.strict === true) args.push("--strict");
    if (options.threads !== undefined) args.push("--threads", String(options.threads));
    await runCli(args);
    const image = decodeImage(await readFile(out));
    const report = JSON.parse(await readFile(reportPath, "utf8")) as InversionReport;
    return { image, report };
  });
}

/** Stage-by-stage algebraic inversion (exact off clipping, lossy on it). */
export async function naiveInvertImage(degraded: Image, params: IspParams): Promise<Image> {
  requireDomain(degraded, "srgb", "degraded input");
  return withTempDir(async (dir) => {
    const paths = await writeInputs(dir, { degraded }, params);
    const out = join(dir, "out.img");
    await runCli(["invert-naive", "--degraded", paths["degraded"] as string,
                  "--params", paths["params"] as string, "--out", out]);
    return decodeImage(await readFile(out));
  });
}

/** Residual between an observed mosaic and the re-degraded reference. */
export async function degradationMap(
  raw: Image, baseLinear: Image, factor: number,
  options: { downMethod?: "area" | "bilinear" } = {},
): Promise<DegradationResult> {
  requireDomain(raw, "raw", "raw input");
  requireDomain(baseLinear, "linear", "reference");
  if (!Number.isInteger(factor) || factor <= 0) {
    throw new FormatError(`factor must be a positive integer, got ${factor}`);
  }
  return withTempDir(async (dir) => {
    const paths = await writeInputs(dir, { raw, base_linear: baseLinear });
    const out = join(dir, "map.img");
    const summaryPath = join(dir, "summary.json");
    const args = ["degradation", "--raw", paths["raw"] as string,
                  "--base-linear", paths["base_linear"] as string,
                  "--factor", String(factor), "--out", out, "--summary", summaryPath];
    if (options.downMethod !== undefined) args.push("--down-method", options.downMethod);
    await runCli(args);
    const map = decodeImage(await readFile(out));
    const summary = JSON.parse(await readFile(summaryPath, "utf8")) as DegradationSummary;
    return { map, summary };
  });
}

/** Peak signal-to-noise ratio between two images; Infinity when identical. */
export async function psnr(a: Image, b: Image, peak?: number): Promise<number> {
  return withTempDir(async (dir) => {
    const paths = await writeInputs(dir, { a, b });
    const args = ["psnr", "--a", paths["a"] as string, "--b", paths["b"] as string];
    if (peak !== undefined) args.push("--peak", String(peak));
    const { stdout } = await runCli(args);
    const text = stdout.trim();
    return text === "inf" ? Infinity : Number(text);
  });
}

/** Core library version ("X.Y.Z"); the binding tracks it one-to-one. */
export async function version(): Promise<string> {
  const { stdout } = await runCli(["--version"]);
  return stdout.trim().replace(/^ispinvert\s+/, "");
}
