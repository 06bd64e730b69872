/** Malformed container bytes, parameter text, or inconsistent image geometry. */
export class FormatError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "FormatError";
  }
}

/** A CLI invocation exited nonzero (or could not be spawned at all). */
export class CliError extends Error {
  readonly exitCode: number | null;
  readonly stderr: string;

  constructor(message: string, exitCode: number | null, stderr: string) {
    super(message);
    this.name = "CliError";
    this.exitCode = exitCode;
    this.stderr = stderr;
  }
}
