/**
 * Strict loaders for the analysis CSVs. Every loader checks the header
 * against the documented schema and names the first missing column, so a
 * renamed or truncated export fails loudly instead of plotting garbage.
 */

import Papa from "papaparse";

export class SchemaError extends Error {
  constructor(public readonly file: string, public readonly column: string) {
    super(`${file}: missing required column "${column}"`);
    this.name = "SchemaError";
  }
}

export interface ConditionStatsRow {
  condition: string;
  n: number;
  mean: number;
  std: number | null;
  ci95: number | null;
  pct_vs_control: number | null;
}

export interface TrajectoryRow {
  condition: string;
  round: number;
  mean: number;
  std: number | null;
  ci95: number | null;
}

export interface TrialTrajectoryRow {
  condition: string;
  trial: number;
  round: number;
  value: number;
}

export interface WordFrequencyRow {
  word: string;
  count: number;
}

function rows(file: string, text: string, required: string[]): Record<string, string>[] {
  const parsed = Papa.parse<Record<string, string>>(text.trim(), {
    header: true,
    skipEmptyLines: true,
  });
  const hardErrors = parsed.errors.filter((e) => e.code !== "UndetectableDelimiter");
  if (hardErrors.length > 0) {
    const err = hardErrors[0];
    throw new Error(`${file}: CSV parse error at row ${err.row}: ${err.message}`);
  }
  const fields = parsed.meta.fields ?? [];
  for (const column of required) {
    if (!fields.includes(column)) {
      throw new SchemaError(file, column);
    }
  }
  return parsed.data;
}

function num(file: string, row: Record<string, string>, column: string): number {
  const value = Number(row[column]);
  if (row[column] === "" || row[column] === undefined || Number.isNaN(value)) {
    throw new Error(`${file}: column "${column}" has non-numeric value "${row[column]}"`);
  }
  return value;
}

function numOrNull(file: string, row: Record<string, string>, column: string): number | null {
  if (row[column] === "" || row[column] === undefined) {
    return null;
  }
  return num(file, row, column);
}

export function parseConditionStats(text: string, file: string): ConditionStatsRow[] {
  return rows(file, text, ["condition", "n", "mean", "std", "ci95", "pct_vs_control"]).map(
    (row) => ({
      condition: row.condition,
      n: num(file, row, "n"),
      mean: num(file, row, "mean"),
      std: numOrNull(file, row, "std"),
      ci95: numOrNull(file, row, "ci95"),
      pct_vs_control: numOrNull(file, row, "pct_vs_control"),
    }),
  );
}

export function parseTrajectory(text: string, file: string): TrajectoryRow[] {
  return rows(file, text, ["condition", "round", "mean", "std", "ci95"]).map((row) => ({
    condition: row.condition,
    round: num(file, row, "round"),
    mean: num(file, row, "mean"),
    std: numOrNull(file, row, "std"),
    ci95: numOrNull(file, row, "ci95"),
  }));
}

export function parseTrialTrajectory(text: string, file: string): TrialTrajectoryRow[] {
  return rows(file, text, ["condition", "trial", "round", "value"]).map((row) => ({
    condition: row.condition,
    trial: num(file, row, "trial"),
    round: num(file, row, "round"),
    value: num(file, row, "value"),
  }));
}

export function parseWordFrequency(text: string, file: string): WordFrequencyRow[] {
  return rows(file, text, ["word", "count"]).map((row) => ({
    word: row.word,
    count: num(file, row, "count"),
  }));
}
