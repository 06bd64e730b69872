/**
 * Codec for the `key = value` parameter text format used by the CLI.
 *
 * Keys: `wb_gains` (3 floats), `ccm_row0..2` (3 floats each), optional
 * `gamma` and `epsilon`.  `#` starts a comment.  Unknown keys are ignored
 * unless `strict`.  Floats are serialized with the shortest round-trip
 * decimal (JavaScript number-to-string), so write → read preserves every
 * value exactly.
 */
import { FormatError } from "./errors.js";

export type Vec3 = [number, number, number];
export type Mat3 = [Vec3, Vec3, Vec3];

export interface IspParams {
  readonly wbGains: Vec3;
  readonly ccm: Mat3;
  readonly gamma: number;
  readonly epsilon: number;
}

export const DEFAULT_GAMMA = 2.2;
export const DEFAULT_EPSILON = 1e-8;

const KNOWN_KEYS = new Set([
  "wb_gains", "ccm_row0", "ccm_row1", "ccm_row2", "gamma", "epsilon",
]);

function parseFloatStrict(token: string, where: string): number {
  const value = Number(token);
  if (token === "" || Number.isNaN(value) && token.trim().toLowerCase() !== "nan") {
    throw new FormatError(`${where}: not a float: ${JSON.stringify(token)}`);
  }
  return value;
}

function splitFloats(rhs: string, count: number, where: string): number[] {
  const tokens = rhs.split(/\s+/).filter((t) => t.length > 0);
  if (tokens.length !== count) {
    throw new FormatError(`${where}: expected ${count} value(s), got ${tokens.length}`);
  }
  return tokens.map((t) => parseFloatStrict(t, where));
}

/** Parse parameter text. Mirrors the CLI reader's tolerance for unknown keys. */
export function parseParams(text: string, options?: { strict?: boolean }): IspParams {
  const strict = options?.strict ?? false;
  const fields = new Map<string, number[]>();
  const lines = text.split("\n");
  for (let lineno = 1; lineno <= lines.length; lineno++) {
    const raw = lines[lineno - 1] as string;
    const line = (raw.split("#", 1)[0] as string).trim();
    if (line === "") {
      continue;
    }
    const eq = line.indexOf("=");
    if (eq < 0) {
      throw new FormatError(`line ${lineno}: expected 'key = values'`);
    }
    const key = line.slice(0, eq).trim();
    const rhs = line.slice(eq + 1).trim();
    if (!KNOWN_KEYS.has(key)) {
      if (strict) {
        throw new FormatError(`line ${lineno}: unknown key ${JSON.stringify(key)}`);
      }
      continue;
    }
    if (fields.has(key)) {
      throw new FormatError(`line ${lineno}: duplicate key ${JSON.stringify(key)}`);
    }
    const count = key === "gamma" || key === "epsilon" ? 1 : 3;
    fields.set(key, splitFloats(rhs, count, `line ${lineno} (${key})`));
  }

  const wb = fields.get("wb_gains");
  if (wb === undefined) {
    throw new FormatError("missing key 'wb_gains'");
  }
  const ccmRows: Vec3[] = [];
  for (let i = 0; i < 3; i++) {
    const row = fields.get(`ccm_row${i}`);
    if (row === undefined) {
      throw new FormatError(`missing key 'ccm_row${i}'`);
    }
    ccmRows.push(row as Vec3);
  }
  return {
    wbGains: wb as Vec3,
    ccm: ccmRows as Mat3,
    gamma: fields.get("gamma")?.[0] ?? DEFAULT_GAMMA,
    epsilon: fields.get("epsilon")?.[0] ?? DEFAULT_EPSILON,
  };
}

/** Serialize parameters to the text format accepted by the CLI. */
export function serializeParams(params: IspParams): string {
  const lines = ["# rendering-chain parameters"];
  lines.push(`wb_gains = ${params.wbGains.map(String).join(" ")}`);
  for (let i = 0; i < 3; i++) {
    lines.push(`ccm_row${i} = ${(params.ccm[i] as Vec3).map(String).join(" ")}`);
  }
  lines.push(`gamma = ${String(params.gamma)}`);
  lines.push(`epsilon = ${String(params.epsilon)}`);
  return lines.join("\n") + "\n";
}
