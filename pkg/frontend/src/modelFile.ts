/**
 * Reader and evaluator for the versioned cascade model document.
 *
 * The document is the contract between the core and these bindings: a
 * single JSON object whose trees are flat parallel arrays. Probability
 * evaluation here replays the core's arithmetic step for step (same
 * accumulation order, same divisions), so the doubles that come out are
 * bit-identical to the core's on the same inputs.
 */

import { readFileSync } from "node:fs";

import { SchemaViolation, UnsupportedVersion } from "./errors.js";

export const FORMAT_VERSION = 1;

export interface TreeArrays {
  /** Split feature per node; -1 marks a leaf. */
  feature: number[];
  threshold: number[];
  left: number[];
  right: number[];
  rows: number[];
  gain: number[];
  /** Class counts per leaf node; null on internal nodes. */
  counts: (number[] | null)[];
}

export interface ForestRecord {
  config: { n_trees: number; kind: string; seed: number; tree: Record<string, unknown> };
  trees: TreeArrays[];
}

export interface LayerRecord {
  layer_index: number;
  validation_metric: number;
  forests: ForestRecord[];
}

export interface ModelFile {
  format_version: number;
  kind: string;
  n_classes: number;
  input_dim: number;
  class_names: string[] | null;
  config: Record<string, unknown>;
  history: number[];
  layers: LayerRecord[];
}

function fail(path: string, detail: string): never {
  throw new SchemaViolation(path, detail);
}

function wantArray(value: unknown, path: string): unknown[] {
  if (!Array.isArray(value)) fail(path, "expected an array");
  return value;
}

function wantNumberArray(value: unknown, path: string): number[] {
  const arr = wantArray(value, path);
  for (let i = 0; i < arr.length; i++) {
    if (typeof arr[i] !== "number") fail(`${path}[${i}]`, "expected a number");
  }
  return arr as number[];
}

function checkTree(tree: TreeArrays, nClasses: number, path: string): void {
  const n = tree.feature.length;
  const aligned =
    tree.threshold.length === n &&
    tree.left.length === n &&
    tree.right.length === n &&
    tree.counts.length === n;
  if (!aligned) fail(path, "parallel arrays disagree on length");
  if (n === 0) fail(path, "empty tree");
  for (let i = 0; i < n; i++) {
    if (tree.feature[i]! >= 0) {
      const l = tree.left[i]!;
      const r = tree.right[i]!;
      if (l <= i || l >= n || r <= i || r >= n) {
        fail(`${path}.left/right[${i}]`, "child index out of range");
      }
    } else {
      const counts = tree.counts[i];
      if (!Array.isArray(counts) || counts.length !== nClasses) {
        fail(`${path}.counts[${i}]`, "leaf counts missing or wrong length");
      }
    }
  }
}

/** Parse and structurally validate a model document from disk. */
export function readModelFile(path: string): ModelFile {
  let raw: unknown;
  try {
    raw = JSON.parse(readFileSync(path, "utf8"));
  } catch (err) {
    if (err instanceof SyntaxError) fail("$", "not valid JSON");
    throw err;
  }
  if (typeof raw !== "object" || raw === null || Array.isArray(raw)) {
    fail("$", "expected a JSON object");
  }
  const doc = raw as Record<string, unknown>;
  if (!("format_version" in doc)) fail("format_version", "missing");
  if (doc.format_version !== FORMAT_VERSION) {
    throw new UnsupportedVersion(doc.format_version);
  }
  const nClasses = doc.n_classes;
  const inputDim = doc.input_dim;
  if (typeof nClasses !== "number" || nClasses < 2) fail("n_classes", "expected >= 2");
  if (typeof inputDim !== "number" || inputDim < 1) fail("input_dim", "expected >= 1");
  const names = doc.class_names;
  if (names !== null && names !== undefined) {
    const arr = wantArray(names, "class_names");
    if (arr.length !== nClasses) fail("class_names", "wrong length");
    if (arr.some((v) => typeof v !== "string")) fail("class_names", "expected strings");
  }
  const layers = wantArray(doc.layers, "layers") as LayerRecord[];
  if (layers.length === 0) fail("layers", "model has no layers");
  layers.forEach((layer, li) => {
    const forests = wantArray(layer.forests, `layers[${li}].forests`) as ForestRecord[];
    forests.forEach((forest, fi) => {
      const trees = wantArray(
        forest.trees,
        `layers[${li}].forests[${fi}].trees`,
      ) as TreeArrays[];
      if (trees.length === 0) fail(`layers[${li}].forests[${fi}].trees`, "empty forest");
      trees.forEach((tree, ti) => {
        const p = `layers[${li}].forests[${fi}].trees[${ti}]`;
        wantNumberArray(tree.feature, `${p}.feature`);
        wantNumberArray(tree.threshold, `${p}.threshold`);
        wantNumberArray(tree.left, `${p}.left`);
        wantNumberArray(tree.right, `${p}.right`);
        wantArray(tree.counts, `${p}.counts`);
        checkTree(tree, nClasses, p);
      });
    });
  });
  return {
    format_version: FORMAT_VERSION,
    kind: String(doc.kind),
    n_classes: nClasses,
    input_dim: inputDim,
    class_names: (names ?? null) as string[] | null,
    config: (doc.config ?? {}) as Record<string, unknown>,
    history: wantNumberArray(doc.history ?? [], "history"),
    layers,
  };
}

function treeProba(tree: TreeArrays, x: number[], nClasses: number): number[] {
  let i = 0;
  while (tree.feature[i]! >= 0) {
    i = x[tree.feature[i]!]! <= tree.threshold[i]! ? tree.left[i]! : tree.right[i]!;
  }
  const counts = tree.counts[i]!;
  let total = 0;
  for (const c of counts) total += c;
  const out = new Array<number>(nClasses);
  for (let c = 0; c < nClasses; c++) out[c] = counts[c]! / total;
  return out;
}

/** Class probabilities for one sample, replaying the core's arithmetic. */
export function probaOne(model: ModelFile, x: number[]): number[] {
  const C = model.n_classes;
  const raw = x;
  let current = raw;
  let last: number[][] = [];
  const L = model.layers.length;
  for (let li = 0; li < L; li++) {
    const outputs: number[][] = [];
    for (const forest of model.layers[li]!.forests) {
      const acc = new Array<number>(C).fill(0);
      for (const tree of forest.trees) {
        const p = treeProba(tree, current, C);
        for (let c = 0; c < C; c++) acc[c]! += p[c]!;
      }
      const nTrees = forest.trees.length;
      outputs.push(acc.map((a) => a / nTrees));
    }
    last = outputs;
    if (li + 1 < L) {
      const nxt = raw.slice();
      for (const out of outputs) nxt.push(...out);
      current = nxt;
    }
  }
  const final = new Array<number>(C).fill(0);
  for (const out of last) {
    for (let c = 0; c < C; c++) final[c]! += out[c]!;
  }
  return final.map((v) => v / last.length);
}

/** Index of the largest probability; ties go to the lowest index. */
export function argmax(p: number[]): number {
  let best = 0;
  for (let c = 1; c < p.length; c++) {
    if (p[c]! > p[best]!) best = c;
  }
  return best;
}
