/**
 * Schemas and strict parsers for the solver CLI outputs.
 *
 * rates.csv    - convergence table (one row per case/level)
 * verify.json  - identity-check report with the boundary-operator spectrum
 * solution.csv - probe table with per-method velocity columns
 *
 * Missing columns or malformed numbers are hard errors: these files are the
 * only contract between the solver and the plots.
 */

import { z } from "zod";

export class SchemaError extends Error {}

export const RATES_COLUMNS = [
  "case",
  "mu",
  "R",
  "n",
  "h",
  "err_l2_velocity",
  "err_h1_velocity",
  "probe_rel_err",
  "order_l2",
  "order_h1",
  "residual_momentum",
  "residual_mass",
] as const;

export interface RatesRow {
  case: string;
  mu: string;
  R: number;
  n: number;
  h: number;
  err_l2_velocity: number | null;
  err_h1_velocity: number | null;
  probe_rel_err: number | null;
  order_l2: number | null;
  order_h1: number | null;
}

function parseOptionalNumber(raw: string, column: string, line: number): number | null {
  if (raw === "") return null;
  const v = Number(raw);
  if (!Number.isFinite(v)) {
    throw new SchemaError(`line ${line}: column ${column} is not a number: ${raw}`);
  }
  return v;
}

function splitLine(line: string, lineno: number): string[] {
  // RFC-4180 fields without embedded newlines; quotes protect commas
  const cells: string[] = [];
  let cur = "";
  let quoted = false;
  for (let i = 0; i < line.length; i++) {
    const ch = line[i];
    if (quoted) {
      if (ch === '"') {
        if (line[i + 1] === '"') {
          cur += '"';
          i++;
        } else {
          quoted = false;
        }
      } else {
        cur += ch;
      }
    } else if (ch === '"') {
      quoted = true;
    } else if (ch === ",") {
      cells.push(cur);
      cur = "";
    } else {
      cur += ch;
    }
  }
  if (quoted) throw new SchemaError(`line ${lineno}: unterminated quote`);
  cells.push(cur);
  return cells;
}

export function splitCsv(text: string): string[][] {
  return text
    .split(/\r?\n/)
    .filter((line) => line.length > 0)
    .map((line, i) => splitLine(line, i + 1));
}

export function parseRatesCsv(text: string): RatesRow[] {
  const lines = splitCsv(text);
  if (lines.length === 0) throw new SchemaError("rates.csv is empty");
  const header = lines[0];
  for (const col of RATES_COLUMNS) {
    if (!header.includes(col)) throw new SchemaError(`rates.csv misses column ${col}`);
  }
  const idx = (c: string) => header.indexOf(c);
  const rows: RatesRow[] = [];
  for (let k = 1; k < lines.length; k++) {
    const cells = lines[k];
    if (cells.length !== header.length) {
      throw new SchemaError(`line ${k + 1}: expected ${header.length} cells, got ${cells.length}`);
    }
    rows.push({
      case: cells[idx("case")],
      mu: cells[idx("mu")],
      R: Number(cells[idx("R")]),
      n: Number(cells[idx("n")]),
      h: Number(cells[idx("h")]),
      err_l2_velocity: parseOptionalNumber(cells[idx("err_l2_velocity")], "err_l2_velocity", k + 1),
      err_h1_velocity: parseOptionalNumber(cells[idx("err_h1_velocity")], "err_h1_velocity", k + 1),
      probe_rel_err: parseOptionalNumber(cells[idx("probe_rel_err")], "probe_rel_err", k + 1),
      order_l2: parseOptionalNumber(cells[idx("order_l2")], "order_l2", k + 1),
      order_h1: parseOptionalNumber(cells[idx("order_h1")], "order_h1", k + 1),
    });
    if (!Number.isFinite(rows[rows.length - 1].h)) {
      throw new SchemaError(`line ${k + 1}: bad mesh size h`);
    }
  }
  return rows;
}

export const verifySchema = z.object({
  config: z.record(z.unknown()),
  checks: z.array(
    z.object({
      name: z.string(),
      residual: z.number(),
      tolerance: z.number(),
      passed: z.boolean(),
    }),
  ),
  spectrum: z.object({
    eigenvalues: z.array(z.number()).min(1),
    ellipticity_eigenvalues: z.array(z.number()).optional(),
  }),
  all_pass: z.boolean(),
});

export type VerifyReport = z.infer<typeof verifySchema>;

export function parseVerifyJson(text: string): VerifyReport {
  let data: unknown;
  try {
    data = JSON.parse(text);
  } catch (err) {
    throw new SchemaError(`verify.json is not valid JSON: ${err}`);
  }
  const result = verifySchema.safeParse(data);
  if (!result.success) {
    throw new SchemaError(`verify.json schema violation: ${result.error.message}`);
  }
  return result.data;
}

export interface SolutionTable {
  points: number[][];
  methods: Record<string, number[][]>;
}

const METHOD_COLUMNS = ["variational", "potential", "oracle"] as const;

export function parseSolutionCsv(text: string): SolutionTable {
  const lines = splitCsv(text);
  if (lines.length < 2) throw new SchemaError("solution.csv has no data rows");
  const header = lines[0];
  for (const col of ["x", "y", "z"]) {
    if (!header.includes(col)) throw new SchemaError(`solution.csv misses column ${col}`);
  }
  const present = METHOD_COLUMNS.filter((m) => header.includes(`ux_${m}`));
  if (present.length === 0) {
    throw new SchemaError("solution.csv carries no velocity columns");
  }
  const idx = (c: string) => header.indexOf(c);
  const points: number[][] = [];
  const methods: Record<string, number[][]> = {};
  for (const m of present) methods[m] = [];
  for (let k = 1; k < lines.length; k++) {
    const cells = lines[k];
    points.push([Number(cells[idx("x")]), Number(cells[idx("y")]), Number(cells[idx("z")])]);
    for (const m of present) {
      const vec = ["x", "y", "z"].map((t) => Number(cells[idx(`u${t}_${m}`)]));
      if (vec.some((v) => !Number.isFinite(v))) {
        throw new SchemaError(`line ${k + 1}: bad velocity for method ${m}`);
      }
      methods[m].push(vec);
    }
  }
  return { points, methods };
}
