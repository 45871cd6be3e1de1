/**
 * Spawns the core's command-line executable and maps failures onto the
 * bindings' error classes. The executable is found on PATH as `treenet`
 * unless the TREENET_CLI environment variable points elsewhere.
 */

import { execFileSync } from "node:child_process";

import { CliError, DataError, SchemaViolation, UnsupportedVersion, UsageError } from "./errors.js";

export function cliExecutable(): string {
  return process.env.TREENET_CLI ?? "treenet";
}

interface SpawnFailure {
  status?: number | null;
  stderr?: Buffer | string;
  code?: string;
  message?: string;
}

/** Run one CLI invocation; returns captured stdout. */
export function runCli(args: string[]): string {
  try {
    return execFileSync(cliExecutable(), args, {
      encoding: "utf8",
      stdio: ["ignore", "pipe", "pipe"],
      maxBuffer: 64 * 1024 * 1024,
    });
  } catch (err) {
    throw mapFailure(err as SpawnFailure);
  }
}

function mapFailure(failure: SpawnFailure): Error {
  const stderr =
    typeof failure.stderr === "string"
      ? failure.stderr
      : failure.stderr?.toString("utf8") ?? "";
  const message = stderr.trim() || failure.message || "CLI invocation failed";
  if (failure.code === "ENOENT") {
    return new CliError(
      `executable ${cliExecutable()} not found; install the core package or set TREENET_CLI`,
      null,
    );
  }
  // Recover the two error shapes callers are expected to branch on; the
  // CLI prints messages, not class names, so match their fixed texts.
  const version = /unsupported format_version:? (\S+)/.exec(message);
  if (version) {
    return new UnsupportedVersion(version[1]);
  }
  if (failure.status === 2 && /^error: ([^:]+): (.+)$/m.test(message)) {
    const m = /^error: ([^:]+): (.+)$/m.exec(message)!;
    if (m[2] === "unknown key" || /schema/i.test(m[2]!)) {
      return new SchemaViolation(m[1]!, m[2]!);
    }
  }
  if (failure.status === 1) return new UsageError(message);
  if (failure.status === 2) return new DataError(message);
  return new CliError(message, failure.status ?? null);
}
