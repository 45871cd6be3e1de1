/**
 * Minimal CSV support for the core's feature-file schema: one header row,
 * unquoted cells, numeric feature columns, optional label column. This is
 * deliberately not a general CSV parser; the core writes nothing that
 * needs quoting and these bindings write nothing that does either.
 */

import { readFileSync, writeFileSync } from "node:fs";

import { DataError } from "./errors.js";

/** Split file text into nonempty lines, accepting LF or CRLF endings. */
function splitLines(text: string): string[] {
  return text
    .split("\n")
    .map((l) => (l.endsWith("\r") ? l.slice(0, -1) : l))
    .filter((l) => l.length > 0);
}

/** Write features only; header f0..f(d-1). */
export function writeFeatureCsv(path: string, features: number[][]): void {
  const d = features[0]?.length ?? 0;
  const header = Array.from({ length: d }, (_, j) => `f${j}`);
  const lines = [header.join(",")];
  for (const row of features) {
    lines.push(row.map((v) => String(v)).join(","));
  }
  writeFileSync(path, lines.join("\n") + "\n", "utf8");
}

/** Write features plus a trailing label column of class-name strings. */
export function writeLabeledCsv(
  path: string,
  features: number[][],
  labelNames: string[],
): void {
  const d = features[0]?.length ?? 0;
  const header = [...Array.from({ length: d }, (_, j) => `f${j}`), "label"];
  const lines = [header.join(",")];
  for (let i = 0; i < features.length; i++) {
    lines.push([...features[i]!.map((v) => String(v)), labelNames[i]!].join(","));
  }
  writeFileSync(path, lines.join("\n") + "\n", "utf8");
}

/** Read a one-column CSV (a predictions file); returns the cell strings. */
export function readSingleColumnCsv(path: string, expectHeader: string): string[] {
  const lines = splitLines(readFileSync(path, "utf8"));
  if (lines[0] !== expectHeader) {
    throw new DataError(`expected header ${expectHeader}, got ${lines[0] ?? "nothing"}`);
  }
  return lines.slice(1);
}

/** Parse a labeled feature CSV into arrays (used for fixtures and tooling). */
export function readLabeledCsv(path: string): {
  features: number[][];
  labels: string[];
  featureNames: string[];
} {
  const lines = splitLines(readFileSync(path, "utf8"));
  if (lines.length < 2) throw new DataError(`${path} has no data rows`);
  const header = lines[0]!.split(",");
  const labelIdx = header.indexOf("label");
  if (labelIdx < 0) throw new DataError(`${path} has no label column`);
  const features: number[][] = [];
  const labels: string[] = [];
  for (const line of lines.slice(1)) {
    const cells = line.split(",");
    if (cells.length !== header.length) {
      throw new DataError(`${path}: ragged row ${features.length}`);
    }
    const row: number[] = [];
    cells.forEach((cell, i) => {
      if (i === labelIdx) {
        labels.push(cell);
      } else {
        const v = Number(cell);
        if (!Number.isFinite(v)) {
          throw new DataError(`${path}: non-numeric cell ${cell}`);
        }
        row.push(v);
      }
    });
    features.push(row);
  }
  return {
    features,
    labels,
    featureNames: header.filter((_, i) => i !== labelIdx),
  };
}
