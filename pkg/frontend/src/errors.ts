/**
 * Error surface of the bindings.
 *
 * Each class mirrors the name the core uses for the same condition, so a
 * caller can branch on `err.name` the same way on either side of the
 * process boundary.
 */

/** Base class for every error the bindings raise on purpose. */
export class TreenetError extends Error {
  constructor(message: string) {
    super(message);
    this.name = new.target.name;
  }
}

/** An operation was attempted on a handle after close(). */
export class ClosedHandle extends TreenetError {
  constructor(operation: string) {
    super(`handle is closed; cannot ${operation}`);
  }
}

/** Input width or length disagrees with what the model expects. */
export class DimensionMismatch extends TreenetError {
  constructor(expected: number, got: number) {
    super(`expected dimension ${expected}, got ${got}`);
  }
}

/** A document is structurally wrong; message starts with the JSON path. */
export class SchemaViolation extends TreenetError {
  constructor(path: string, detail: string) {
    super(`${path}: ${detail}`);
  }
}

/** A model file declares a format_version this code does not read. */
export class UnsupportedVersion extends TreenetError {
  constructor(version: unknown) {
    super(`unsupported format_version: ${String(version)}`);
  }
}

/** The CLI rejected the input data; carries the CLI's own message. */
export class DataError extends TreenetError {}

/** The CLI rejected the invocation itself (exit code 1). */
export class UsageError extends TreenetError {}

/** The CLI failed unexpectedly (exit code 3) or could not be spawned. */
export class CliError extends TreenetError {
  readonly exitCode: number | null;

  constructor(message: string, exitCode: number | null) {
    super(message);
    this.exitCode = exitCode;
  }
}
