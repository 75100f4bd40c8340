/**
 * Reader for the embedding export format: a `dim=<d>` header line followed
 * by one `x1,...,xd,label` row per pair.
 */

import { readFileSync } from "node:fs";

export interface EmbeddingTable {
  matrix: number[][];
  labels: string[];
  dim: number;
  source: string;
}

export class ParseError extends Error {}

export function parseEmbeddings(text: string, source: string): EmbeddingTable {
  const lines = text.split(/\r?\n/);
  if (lines.length === 0 || !lines[0].startsWith("dim=")) {
    throw new ParseError(`${source}:1: expected 'dim=<d>' header, got ${JSON.stringify(lines[0] ?? "")}`);
  }
  const dim = Number(lines[0].slice(4));
  if (!Number.isInteger(dim) || dim < 1) {
    throw new ParseError(`${source}:1: invalid dimension ${JSON.stringify(lines[0].slice(4))}`);
  }
  const matrix: number[][] = [];
  const labels: string[] = [];
  for (let i = 1; i < lines.length; i++) {
    const line = lines[i];
    if (line.trim() === "") continue;
    const fields = line.split(",");
    if (fields.length !== dim + 1) {
      throw new ParseError(`${source}:${i + 1}: expected ${dim + 1} fields, got ${fields.length}`);
    }
    const row = new Array<number>(dim);
    for (let j = 0; j < dim; j++) {
      const value = Number(fields[j]);
      if (!Number.isFinite(value)) {
        throw new ParseError(`${source}:${i + 1}: field ${j + 1} is not a finite number: ${fields[j]}`);
      }
      row[j] = value;
    }
    const label = fields[dim].trim();
    if (label === "") {
      throw new ParseError(`${source}:${i + 1}: empty label`);
    }
    matrix.push(row);
    labels.push(label);
  }
  return { matrix, labels, dim, source };
}

export function loadEmbeddings(path: string): EmbeddingTable {
  return parseEmbeddings(readFileSync(path, "utf-8"), path);
}
