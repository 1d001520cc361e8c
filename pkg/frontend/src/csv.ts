/**
 * CSV readers for the simulator's output files.
 *
 * Every reader validates the header against the documented schema and
 * throws a SchemaError naming the offending file and column, so a renamed
 * or truncated input fails loudly instead of producing an empty figure.
 */

import * as fs from "fs";
import * as path from "path";

export class SchemaError extends Error {}

export interface Table {
  path: string;
  header: string[];
  rows: number[][];
}

export function parseCsvFile(filePath: string): Table {
  const text = fs.readFileSync(filePath, "utf-8");
  const lines = text.split(/\r?\n/).filter((line) => line.length > 0);
  if (lines.length === 0) {
    throw new SchemaError(`${filePath}: empty file, expected a CSV header`);
  }
  const header = lines[0].split(",");
  const rows: number[][] = [];
  for (let i = 1; i < lines.length; i++) {
    const cells = lines[i].split(",");
    if (cells.length !== header.length) {
      throw new SchemaError(
        `${filePath}: row ${i} has ${cells.length} cells, header has ${header.length}`);
    }
    rows.push(cells.map((c) => {
      const v = Number(c);
      if (Number.isNaN(v)) {
        throw new SchemaError(`${filePath}: row ${i} value ${c} is not numeric`);
      }
      return v;
    }));
  }
  return { path: filePath, header, rows };
}

export function requireColumns(table: Table, expected: string[]): void {
  for (let i = 0; i < expected.length; i++) {
    if (table.header[i] !== expected[i]) {
      throw new SchemaError(
        `${table.path}: column ${i + 1} is ${table.header[i] ?? "(missing)"}, ` +
        `expected ${expected[i]}`);
    }
  }
  if (table.header.length !== expected.length) {
    throw new SchemaError(
      `${table.path}: ${table.header.length} columns, expected ${expected.length} ` +
      `(${expected.join(",")})`);
  }
}

function column(table: Table, idx: number): number[] {
  return table.rows.map((r) => r[idx]);
}

/** Trajectory CSV: t,event_index,Y_1..Y_K,Ybar_1..Ybar_K */
export interface Trajectory {
  path: string;
  K: number;
  t: number[];
  ybar: number[][]; // [K][rows]
}

export function readTrajectory(filePath: string): Trajectory {
  const table = parseCsvFile(filePath);
  const K = (table.header.length - 2) / 2;
  if (!Number.isInteger(K) || K < 1) {
    throw new SchemaError(`${filePath}: header does not match trajectory schema`);
  }
  const expected = ["t", "event_index"];
  for (let k = 1; k <= K; k++) expected.push(`Y_${k}`);
  for (let k = 1; k <= K; k++) expected.push(`Ybar_${k}`);
  requireColumns(table, expected);
  if (table.rows.length === 0) {
    throw new SchemaError(`${filePath}: trajectory has no rows`);
  }
  const ybar: number[][] = [];
  for (let k = 0; k < K; k++) ybar.push(column(table, 2 + K + k));
  return { path: filePath, K, t: column(table, 0), ybar };
}

/** Fluid CSV: t,y_1..y_K */
export interface FluidPath {
  path: string;
  K: number;
  t: number[];
  y: number[][]; // [K][rows]
}

export function readFluid(filePath: string): FluidPath {
  const table = parseCsvFile(filePath);
  const K = table.header.length - 1;
  if (K < 1) {
    throw new SchemaError(`${filePath}: header does not match fluid schema`);
  }
  const expected = ["t"];
  for (let k = 1; k <= K; k++) expected.push(`y_${k}`);
  requireColumns(table, expected);
  if (table.rows.length < 2) {
    throw new SchemaError(`${filePath}: fluid path needs at least two samples`);
  }
  const y: number[][] = [];
  for (let k = 0; k < K; k++) y.push(column(table, 1 + k));
  return { path: filePath, K, t: column(table, 0), y };
}

/** Tail-estimate CSVs (concentration and auxiliary variants). */
export interface TailRow {
  N: number;
  epsilon: number;
  trials: number;
  exceedances: number;
  pHat: number;
  ciLow: number;
  ciHigh: number;
  ceiling?: number;
}

const TAIL_BASE = ["N", "epsilon", "trials", "exceedances", "p_hat",
                   "ci_low", "ci_high"];

export function readTailEstimates(filePath: string,
                                  withCeiling: boolean): TailRow[] {
  const table = parseCsvFile(filePath);
  requireColumns(table, withCeiling ? TAIL_BASE.concat("ceiling") : TAIL_BASE);
  return table.rows.map((r) => ({
    N: r[0], epsilon: r[1], trials: r[2], exceedances: r[3],
    pHat: r[4], ciLow: r[5], ciHigh: r[6],
    ...(withCeiling ? { ceiling: r[7] } : {}),
  }));
}

/** Modulus CSV: N,delta,omega */
export interface ModulusRow {
  N: number;
  delta: number;
  omega: number;
}

export function readModulus(filePath: string): ModulusRow[] {
  const table = parseCsvFile(filePath);
  requireColumns(table, ["N", "delta", "omega"]);
  return table.rows.map((r) => ({ N: r[0], delta: r[1], omega: r[2] }));
}

/** Line-fit CSV: slope,intercept,r_squared */
export interface LineFit {
  slope: number;
  intercept: number;
  rSquared: number;
}

export function readLineFit(filePath: string): LineFit {
  const table = parseCsvFile(filePath);
  requireColumns(table, ["slope", "intercept", "r_squared"]);
  if (table.rows.length !== 1) {
    throw new SchemaError(`${filePath}: expected exactly one fit row`);
  }
  const [slope, intercept, rSquared] = table.rows[0];
  return { slope, intercept, rSquared };
}

/**
 * Minimal glob: '*' wildcards in the basename (directories are literal).
 * Returns matches sorted by path for deterministic figure ordering.
 */
export function globFiles(pattern: string): string[] {
  const dir = path.dirname(pattern);
  const base = path.basename(pattern);
  if (!base.includes("*")) {
    return fs.existsSync(pattern) ? [pattern] : [];
  }
  const regex = new RegExp(
    "^" + base.split("*").map(escapeRegex).join(".*") + "$");
  if (!fs.existsSync(dir)) return [];
  return fs.readdirSync(dir)
    .filter((name) => regex.test(name))
    .sort()
    .map((name) => path.join(dir, name));
}

function escapeRegex(text: string): string {
  return text.replace(/[.*+?^${}()|[\]\\]/g, "\\$&");
}
