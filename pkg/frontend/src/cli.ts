#!/usr/bin/env node
/**
 * varstokes-plots <report-dir> [--out DIR]
 *
 * Reads whatever CLI outputs exist in <report-dir> (rates.csv, verify.json,
 * solution.csv) and writes the matching SVG figures next to them (or to
 * --out).  Exits non-zero when a present file violates its schema or when no
 * known report file is found.
 */

import fs from "node:fs";
import path from "node:path";

import { plotAgreement, plotRates, plotSpectrum } from "./plots.js";
import { parseRatesCsv, parseSolutionCsv, parseVerifyJson, SchemaError } from "./schema.js";

export function run(argv: string[]): number {
  const args = argv.filter((a) => a !== "");
  if (args.length < 1 || args[0].startsWith("--")) {
    process.stderr.write("usage: varstokes-plots <report-dir> [--out DIR]\n");
    return 2;
  }
  const reportDir = args[0];
  let outDir = reportDir;
  const outIdx = args.indexOf("--out");
  if (outIdx >= 0) {
    if (outIdx + 1 >= args.length) {
      process.stderr.write("--out needs a directory\n");
      return 2;
    }
    outDir = args[outIdx + 1];
  }
  if (!fs.existsSync(reportDir) || !fs.statSync(reportDir).isDirectory()) {
    process.stderr.write(`not a directory: ${reportDir}\n`);
    return 2;
  }
  fs.mkdirSync(outDir, { recursive: true });

  const tasks: Array<[string, string, (text: string) => string]> = [
    ["rates.csv", "rates.svg", (t) => plotRates(parseRatesCsv(t))],
    ["verify.json", "spectrum.svg", (t) => plotSpectrum(parseVerifyJson(t))],
    ["solution.csv", "agreement.svg", (t) => plotAgreement(parseSolutionCsv(t))],
  ];
  let produced = 0;
  for (const [input, output, build] of tasks) {
    const src = path.join(reportDir, input);
    if (!fs.existsSync(src)) continue;
    try {
      const svg = build(fs.readFileSync(src, "utf-8"));
      fs.writeFileSync(path.join(outDir, output), svg);
      process.stdout.write(`${input} -> ${output}\n`);
      produced += 1;
    } catch (err) {
      if (err instanceof SchemaError || err instanceof Error) {
        process.stderr.write(`${input}: ${err.message}\n`);
        return 1;
      }
      throw err;
    }
  }
  if (produced === 0) {
    process.stderr.write(`no report files found in ${reportDir}\n`);
    return 1;
  }
  return 0;
}

const isMain = process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${path.resolve(process.argv[1])}`).href;
if (isMain) {
  process.exit(run(process.argv.slice(2)));
}
