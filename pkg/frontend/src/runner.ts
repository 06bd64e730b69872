/**
 * Subprocess plumbing: every operation in this package delegates to the
 * `ispinvert` command-line tool; no numerical logic lives on the Node side.
 *
 * The interpreter is `$ISPINVERT_PYTHON` (default `python3`) and the CLI is
 * invoked as `python -m ispinvert.cli ...`, so the binding works wherever
 * the Python package is importable, with no reliance on script shims.
 */
import { execFile } from "node:child_process";
import { mkdtemp, rm } from "node:fs/promises";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { CliError } from "./errors.js";

export interface RunResult {
  stdout: string;
  stderr: string;
}

export function pythonExecutable(): string {
  const env = process.env["ISPINVERT_PYTHON"];
  return env !== undefined && env !== "" ? env : "python3";
}

/** Run one CLI command; resolves on exit 0, rejects with CliError otherwise. */
export function runCli(args: string[]): Promise<RunResult> {
  return new Promise((resolve, reject) => {
    execFile(
      pythonExecutable(),
      ["-m", "ispinvert.cli", ...args],
      { maxBuffer: 256 * 1024 * 1024, windowsHide: true },
      (error, stdout, stderr) => {
        if (error === null) {
          resolve({ stdout, stderr });
          return;
        }
        const code = typeof error.code === "number" ? error.code : null;
        const detail = stderr.trim() === "" ? error.message : stderr.trim();
        reject(new CliError(
          `ispinvert ${args[0] ?? ""} failed (exit ${code ?? "?"}): ${detail}`,
          code, stderr));
      });
  });
}

/** Run `fn` with a fresh temp directory that is removed afterwards. */
export async function withTempDir<T>(fn: (dir: string) => Promise<T>): Promise<T> {
  const dir = await mkdtemp(join(tmpdir(), "ispinvert-"));
  try {
    return await fn(dir);
  } finally {
    await rm(dir, { recursive: true, force: true });
  }
}
