/**
 * Codec for the binary image container used by the ispinvert CLI.
 *
 * Layout: a 32-byte little-endian header
 *
 *     magic "ISPIMG01" | u32 height | u32 width | u32 channels
 *     | u32 domain | u32 pattern | u32 reserved (must be 0)
 *
 * followed by the pixel payload as channel-planar, row-major, little-endian
 * float32.  Pixels are kept as a `Float32Array` in that same planar order so
 * decode → encode reproduces the input bytes exactly and no precision is
 * invented by the binding.
 */
import { FormatError } from "./errors.js";

export const MAGIC = "ISPIMG01";
export const HEADER_BYTES = 32;

export type Domain = "linear" | "srgb" | "raw" | "map";
export type BayerPattern = "RGGB" | "BGGR" | "GRBG" | "GBRG";

const DOMAIN_CODES: Record<Domain, number> = { linear: 0, srgb: 1, raw: 2, map: 3 };
const DOMAIN_NAMES: Record<number, Domain> = { 0: "linear", 1: "srgb", 2: "raw", 3: "map" };

const PATTERN_CODES: Record<BayerPattern, number> = { RGGB: 0, BGGR: 1, GRBG: 2, GBRG: 3 };
const PATTERN_NAMES: Record<number, BayerPattern> = { 0: "RGGB", 1: "BGGR", 2: "GRBG", 3: "GBRG" };
export const PATTERN_NONE = 0xffffffff;

export interface Image {
  readonly domain: Domain;
  readonly height: number;
  readonly width: number;
  /** 3 for linear/srgb, 1 for raw/map. */
  readonly channels: 1 | 3;
  /** Bayer pattern; present exactly when domain is "raw" or "map". */
  readonly pattern?: BayerPattern;
  /** Channel-planar row-major samples, length channels*height*width. */
  readonly planes: Float32Array;
}

function expectedChannels(domain: Domain): 1 | 3 {
  return domain === "linear" || domain === "srgb" ? 3 : 1;
}

function checkGeometry(img: Image): void {
  if (!Number.isInteger(img.height) || !Number.isInteger(img.width) ||
      img.height <= 0 || img.width <= 0) {
    throw new FormatError(`unsupported geometry ${img.height}x${img.width}`);
  }
  const channels = expectedChannels(img.domain);
  if (img.channels !== channels) {
    throw new FormatError(
      `domain ${img.domain} requires ${channels} channel(s), got ${img.channels}`);
  }
  const n = img.channels * img.height * img.width;
  if (img.planes.length !== n) {
    throw new FormatError(
      `payload has ${img.planes.length} samples, geometry needs ${n}`);
  }
  const isBayer = img.domain === "raw" || img.domain === "map";
  if (isBayer && img.pattern === undefined) {
    throw new FormatError(`domain ${img.domain} requires a bayer pattern`);
  }
  if (!isBayer && img.pattern !== undefined) {
    throw new FormatError(`domain ${img.domain} must not carry a bayer pattern`);
  }
}

/** Validating constructor for in-memory images. The samples are copied. */
export function makeImage(fields: {
  domain: Domain;
  height: number;
  width: number;
  pattern?: BayerPattern;
  planes: ArrayLike<number>;
}): Image {
  const img: Image = {
    domain: fields.domain,
    height: fields.height,
    width: fields.width,
    channels: expectedChannels(fields.domain),
    ...(fields.pattern !== undefined ? { pattern: fields.pattern } : {}),
    planes: Float32Array.from(fields.planes),
  };
  checkGeometry(img);
  return img;
}

/** Sample accessor (channel, row, column) into the planar payload. */
export function sampleAt(img: Image, c: number, y: number, x: number): number {
  const v = img.planes[(c * img.height + y) * img.width + x];
  if (v === undefined) {
    throw new RangeError(`sample (${c},${y},${x}) outside ${img.channels}x${img.height}x${img.width}`);
  }
  return v;
}

/** Serialize an image to container bytes. The input is not mutated. */
export function encodeImage(img: Image): Buffer {
  checkGeometry(img);
  const n = img.planes.length;
  const out = Buffer.allocUnsafe(HEADER_BYTES + 4 * n);
  out.write(MAGIC, 0, 8, "latin1");
  out.writeUInt32LE(img.height, 8);
  out.writeUInt32LE(img.width, 12);
  out.writeUInt32LE(img.channels, 16);
  out.writeUInt32LE(DOMAIN_CODES[img.domain], 20);
  const pattern = img.pattern === undefined ? PATTERN_NONE : PATTERN_CODES[img.pattern];
  out.writeUInt32LE(pattern, 24);
  out.writeUInt32LE(0, 28);
  const view = new DataView(out.buffer, out.byteOffset + HEADER_BYTES, 4 * n);
  for (let i = 0; i < n; i++) {
    view.setFloat32(4 * i, img.planes[i] as number, true);
  }
  return out;
}

/** Parse container bytes, running the same validation as the CLI reader. */
export function decodeImage(blob: Buffer | Uint8Array): Image {
  const buf = Buffer.isBuffer(blob) ? blob : Buffer.from(blob.buffer, blob.byteOffset, blob.byteLength);
  if (buf.length < HEADER_BYTES) {
    throw new FormatError(`truncated header (${buf.length} bytes)`);
  }
  const magic = buf.toString("latin1", 0, 8);
  if (magic !== MAGIC) {
    throw new FormatError(`bad magic ${JSON.stringify(magic)}`);
  }
  const height = buf.readUInt32LE(8);
  const width = buf.readUInt32LE(12);
  const channels = buf.readUInt32LE(16);
  const domainCode = buf.readUInt32LE(20);
  const patternCode = buf.readUInt32LE(24);
  const reserved = buf.readUInt32LE(28);
  if (reserved !== 0) {
    throw new FormatError(`nonzero reserved field ${reserved}`);
  }
  if ((channels !== 1 && channels !== 3) || height === 0 || width === 0) {
    throw new FormatError(`unsupported geometry ${height}x${width}x${channels}`);
  }
  const n = channels * height * width;
  const expected = HEADER_BYTES + 4 * n;
  if (buf.length !== expected) {
    throw new FormatError(`payload is ${buf.length} bytes, expected ${expected}`);
  }
  const domain = DOMAIN_NAMES[domainCode];
  if (domain === undefined) {
    throw new FormatError(`unknown domain code ${domainCode}`);
  }

  let pattern: BayerPattern | undefined;
  if (domain === "raw" || domain === "map") {
    pattern = PATTERN_NAMES[patternCode];
    if (pattern === undefined) {
      throw new FormatError(`unknown bayer pattern code ${patternCode}`);
    }
  } else if (patternCode !== PATTERN_NONE) {
    throw new FormatError(`pattern code ${patternCode} invalid for domain ${domainCode}`);
  }
  if (expectedChannels(domain) !== channels) {
    throw new FormatError(`domain ${domainCode} with ${channels} channel(s)`);
  }

  const view = new DataView(buf.buffer, buf.byteOffset + HEADER_BYTES, 4 * n);
  const planes = new Float32Array(n);
  for (let i = 0; i < n; i++) {
    planes[i] = view.getFloat32(4 * i, true);
  }

  if (domain === "map") {
    for (let i = 0; i < n; i++) {
      const v = planes[i] as number;
      if (!Number.isFinite(v)) {
        throw new FormatError("non-finite degradation map");
      }
      if (Math.abs(v) > 1.0 + 1e-6) {
        throw new FormatError("degradation map out of [-1, 1]");
      }
    }
  }

  const img: Image = {
    domain,
    height,
    width,
    channels,
    ...(pattern !== undefined ? { pattern } : {}),
    planes,
  };
  return img;
}
