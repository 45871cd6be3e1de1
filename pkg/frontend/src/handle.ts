/**
 * ModelHandle: the bindings' one stateful object.
 *
 * A handle owns a scratch directory holding one model document. Training
 * and scoring delegate to the core executable through its CSV and JSON
 * interfaces; probability queries evaluate the model document directly.
 * Handles stay valid until close(); afterwards every operation raises
 * ClosedHandle. Prediction may be called concurrently on a shared handle,
 * each call works on its own scratch files.
 */

import { copyFileSync, mkdtempSync, rmSync, unlinkSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { randomUUID } from "node:crypto";

import { writeFeatureCsv, writeLabeledCsv, readSingleColumnCsv } from "./csv.js";
import {
  ClosedHandle,
  DataError,
  DimensionMismatch,
  SchemaViolation,
} from "./errors.js";
import { argmax, probaOne, readModelFile, type ModelFile } from "./modelFile.js";
import { runCli } from "./runner.js";

/** Keys accepted in a fit() config, matching the core's training knobs. */
const CONFIG_KEYS = new Set([
  "forests_per_layer",
  "trees_per_forest",
  "k_folds",
  "max_layers",
  "patience",
  "improvement_tolerance",
  "growth_metric",
  "seed",
  "max_depth",
  "min_samples_leaf",
]);

export type FitConfig = Record<string, number | string | null>;

function checkMatrix(features: number[][], width: number | null): number {
  if (features.length === 0) throw new DataError("features must be nonempty");
  const d = features[0]!.length;
  if (width !== null && d !== width) throw new DimensionMismatch(width, d);
  for (const row of features) {
    if (row.length !== d) throw new DimensionMismatch(d, row.length);
    for (const v of row) {
      if (!Number.isFinite(v)) throw new DataError("features must be finite");
    }
  }
  return d;
}

export class ModelHandle {
  private dir: string | null;
  private readonly file: ModelFile;

  /** Class-name strings aligned with label indices, when the model has them. */
  readonly classNames: string[] | null;
  readonly nClasses: number;
  readonly inputDim: number;

  private constructor(dir: string, file: ModelFile) {
    this.dir = dir;
    this.file = file;
    this.classNames = file.class_names;
    this.nClasses = file.n_classes;
    this.inputDim = file.input_dim;
  }

  /** Train a cascade on in-memory arrays via the core executable. */
  static fit(features: number[][], labels: number[], config: FitConfig = {}): ModelHandle {
    checkMatrix(features, null);
    if (labels.length !== features.length) {
      throw new DimensionMismatch(features.length, labels.length);
    }
    for (const l of labels) {
      if (!Number.isInteger(l) || l < 0) {
        throw new DataError(`labels must be nonnegative integers, got ${l}`);
      }
    }
    for (const key of Object.keys(config)) {
      if (!CONFIG_KEYS.has(key)) {
        throw new SchemaViolation(`config.${key}`, "unknown key");
      }
    }
    const dir = mkdtempSync(join(tmpdir(), "treenet-bindings-"));
    try {
      const dataPath = join(dir, "train.csv");
      const modelPath = join(dir, "model.json");
      writeLabeledCsv(dataPath, features, labels.map((l) => String(l)));
      const args = ["train", "--data", dataPath, "--out", modelPath];
      if (Object.keys(config).length > 0) {
        const configPath = join(dir, "config.json");
        writeFileSync(configPath, JSON.stringify(config), "utf8");
        args.push("--config", configPath);
      }
      runCli(args);
      unlinkSync(dataPath);
      return new ModelHandle(dir, readModelFile(modelPath));
    } catch (err) {
      rmSync(dir, { recursive: true, force: true });
      throw err;
    }
  }

  /** Open a model document written by the core or by save(). */
  static load(path: string): ModelHandle {
    const file = readModelFile(path);
    const dir = mkdtempSync(join(tmpdir(), "treenet-bindings-"));
    copyFileSync(path, join(dir, "model.json"));
    return new ModelHandle(dir, file);
  }

  private scratch(operation: string): string {
    if (this.dir === null) throw new ClosedHandle(operation);
    return this.dir;
  }

  private get modelPath(): string {
    return join(this.scratch("use model"), "model.json");
  }

  /** Predicted class index per row, via the core executable. */
  predict(features: number[][]): number[] {
    const dir = this.scratch("predict");
    checkMatrix(features, this.inputDim);
    const tag = randomUUID();
    const dataPath = join(dir, `probe-${tag}.csv`);
    const outPath = join(dir, `preds-${tag}.csv`);
    writeFeatureCsv(dataPath, features);
    try {
      runCli(["predict", "--model", this.modelPath, "--data", dataPath, "--out", outPath]);
      const names = readSingleColumnCsv(outPath, "prediction");
      return names.map((name) => this.labelIndex(name));
    } finally {
      for (const p of [dataPath, outPath]) {
        try {
          unlinkSync(p);
        } catch {
          // scratch file may not exist if the CLI failed early
        }
      }
    }
  }

  private labelIndex(name: string): number {
    if (this.classNames) {
      const idx = this.classNames.indexOf(name);
      if (idx < 0) throw new DataError(`prediction ${name} not in class names`);
      return idx;
    }
    const v = Number.parseInt(name, 10);
    if (Number.isNaN(v)) throw new DataError(`unparseable prediction ${name}`);
    return v;
  }

  /** Class probabilities per row, evaluated from the model document. */
  predictProba(features: number[][]): number[][] {
    this.scratch("predict probabilities");
    checkMatrix(features, this.inputDim);
    return features.map((row) => probaOne(this.file, row));
  }

  /** Same as predictProba followed by a lowest-index argmax per row. */
  predictFromProba(features: number[][]): number[] {
    return this.predictProba(features).map(argmax);
  }

  /** Score labeled rows via the core executable; flat metric mapping. */
  evaluate(features: number[][], labels: number[]): Record<string, number> {
    const dir = this.scratch("evaluate");
    checkMatrix(features, this.inputDim);
    if (labels.length !== features.length) {
      throw new DimensionMismatch(features.length, labels.length);
    }
    const names = labels.map((l) => {
      if (!Number.isInteger(l) || l < 0 || l >= this.nClasses) {
        throw new DataError(`label ${l} outside [0, ${this.nClasses})`);
      }
      return this.classNames ? this.classNames[l]! : String(l);
    });
    const tag = randomUUID();
    const dataPath = join(dir, `eval-${tag}.csv`);
    writeLabeledCsv(dataPath, features, names);
    try {
      const doc = JSON.parse(
        runCli(["evaluate", "--model", this.modelPath, "--data", dataPath]),
      ) as { metrics: Record<string, number> };
      return doc.metrics;
    } finally {
      try {
        unlinkSync(dataPath);
      } catch {
        // scratch file may not exist if the CLI failed early
      }
    }
  }

  /** Copy the model document to path, byte for byte. */
  save(path: string): void {
    this.scratch("save");
    copyFileSync(this.modelPath, path);
  }

  /** Release the scratch directory; the handle is unusable afterwards. */
  close(): void {
    if (this.dir !== null) {
      rmSync(this.dir, { recursive: true, force: true });
      this.dir = null;
    }
  }

  get closed(): boolean {
    return this.dir === null;
  }
}
