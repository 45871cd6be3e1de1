/** Public surface of the bindings package. */

export { ModelHandle, type FitConfig } from "./handle.js";
export {
  TreenetError,
  ClosedHandle,
  DimensionMismatch,
  SchemaViolation,
  UnsupportedVersion,
  DataError,
  UsageError,
  CliError,
} from "./errors.js";
export { readModelFile, probaOne, argmax, type ModelFile } from "./modelFile.js";
export { cliExecutable } from "./runner.js";
