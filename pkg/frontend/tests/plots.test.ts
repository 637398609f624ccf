import fs from "node:fs";
import os from "node:os";
import path from "node:path";

import { describe, expect, it } from "vitest";

import { run } from "../src/cli.js";
import { plotAgreement, plotRates, plotSpectrum, ratesSeries } from "../src/plots.js";
import { parseRatesCsv, parseSolutionCsv, parseVerifyJson, RATES_COLUMNS } from "../src/schema.js";

const HEADER = RATES_COLUMNS.join(",");
const TESTDATA = path.join(__dirname, "..", "testdata");

function syntheticRates(): string {
  // exact first- and second-order errors over three levels
  const rows = [1.0, 0.5, 0.25].map(
    (h) => `synthetic,const:1,2.0,${Math.round(2 / h)},${h},${h * h},${h},,,,1e-12,1e-12`,
  );
  return [HEADER, ...rows].join("\n") + "\n";
}

describe("rates figure", () => {
  it("annotates slopes 1.00 and 2.00 within 0.01 on synthetic data", () => {
    const rows = parseRatesCsv(syntheticRates());
    const series = ratesSeries(rows);
    const l2 = series.find((s) => s.label.includes("L2"))!;
    const h1 = series.find((s) => s.label.includes("H1"))!;
    expect(Math.abs(l2.slope - 2.0)).toBeLessThan(0.01);
    expect(Math.abs(h1.slope - 1.0)).toBeLessThan(0.01);
    const svg = plotRates(rows);
    expect(svg).toContain("slope 2.00");
    expect(svg).toContain("slope 1.00");
    expect(svg.startsWith("<svg")).toBe(true);
  });

  it("refuses single-level files", () => {
    const single = `${HEADER}\nonly,const:1,2.0,4,1.0,0.5,1.0,,,,0,0\n`;
    expect(() => plotRates(parseRatesCsv(single))).toThrow(/2 levels/);
  });
});

describe("spectrum figure", () => {
  it("highlights exactly the near-zero eigenvalue", () => {
    const rep = {
      config: {},
      checks: [],
      spectrum: { eigenvalues: [1e-16, 0.06, 0.07, 0.3] },
      all_pass: true,
    };
    const svg = plotSpectrum(rep as never);
    expect(svg).toContain("1 near-zero eigenvalue");
    expect(svg).toContain("#d1242f"); // kernel bar color present once
  });

  it("renders an all-equal spectrum", () => {
    const rep = {
      config: {},
      checks: [],
      spectrum: { eigenvalues: [0.5, 0.5, 0.5] },
      all_pass: true,
    };
    const svg = plotSpectrum(rep as never);
    expect(svg).toContain("0 near-zero");
  });
});

describe("real solver outputs", () => {
  it("renders every committed report headlessly", () => {
    const rates = fs.readFileSync(path.join(TESTDATA, "rates.csv"), "utf-8");
    const verify = fs.readFileSync(path.join(TESTDATA, "verify.json"), "utf-8");
    const solution = fs.readFileSync(path.join(TESTDATA, "solution.csv"), "utf-8");
    expect(plotRates(parseRatesCsv(rates))).toContain("slope");
    expect(plotSpectrum(parseVerifyJson(verify))).toContain("near-zero");
    expect(plotAgreement(parseSolutionCsv(solution))).toContain("probe agreement");
  });

  it("cli run writes svg files and reports missing dirs", () => {
    const out = fs.mkdtempSync(path.join(os.tmpdir(), "vsplots-"));
    expect(run([TESTDATA, "--out", out])).toBe(0);
    for (const name of ["rates.svg", "spectrum.svg", "agreement.svg"]) {
      expect(fs.existsSync(path.join(out, name))).toBe(true);
    }
    expect(run(["/no/such/dir"])).toBe(2);
    const empty = fs.mkdtempSync(path.join(os.tmpdir(), "vsplots-empty-"));
    expect(run([empty])).toBe(1);
  });
});
