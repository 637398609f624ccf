/**
 * Figure builders: log-log convergence chart with annotated slopes, spectrum
 * bars with the near-zero eigenvalue highlighted, and the probe-agreement
 * scatter.  Pure data-to-SVG, no display server.
 */

import { leastSquaresSlope } from "./slopes.js";
import { RatesRow, SchemaError, SolutionTable, VerifyReport } from "./schema.js";
import { logTicks, scale, Svg } from "./svg.js";

const SERIES_COLORS = ["#1f6feb", "#d1242f", "#1a7f37", "#8250df", "#9a6700"];

interface Series {
  label: string;
  h: number[];
  err: number[];
  slope: number;
}

export function ratesSeries(rows: RatesRow[]): Series[] {
  const series: Series[] = [];
  const groups = new Map<string, RatesRow[]>();
  for (const row of rows) {
    const key = `${row.case}|R=${row.R}`;
    if (!groups.has(key)) groups.set(key, []);
    groups.get(key)!.push(row);
  }
  for (const [key, group] of groups) {
    for (const field of ["err_l2_velocity", "err_h1_velocity"] as const) {
      const pts = group
        .filter((r) => r[field] !== null)
        .sort((a, b) => b.h - a.h);
      if (pts.length < 2) continue;
      const h = pts.map((r) => r.h);
      const err = pts.map((r) => r[field] as number);
      series.push({
        label: `${key.split("|")[0]} ${field === "err_l2_velocity" ? "L2" : "H1"}`,
        h,
        err,
        slope: leastSquaresSlope(h, err),
      });
    }
  }
  if (series.length === 0) {
    throw new SchemaError("rates.csv holds no series with at least 2 levels");
  }
  return series;
}

export function plotRates(rows: RatesRow[]): string {
  const series = ratesSeries(rows);
  const svg = new Svg(660, 460);
  const hs = series.flatMap((s) => s.h);
  const errs = series.flatMap((s) => s.err);
  const xDom: [number, number] = [Math.min(...hs) / 1.3, Math.max(...hs) * 1.3];
  const yDom: [number, number] = [Math.min(...errs) / 2, Math.max(...errs) * 2];
  const sx = (v: number) =>
    scale([Math.log10(xDom[0]), Math.log10(xDom[1])], [svg.margin.left, svg.width - svg.margin.right])(Math.log10(v));
  const sy = (v: number) =>
    scale([Math.log10(yDom[0]), Math.log10(yDom[1])], [svg.height - svg.margin.bottom, svg.margin.top])(Math.log10(v));

  for (const t of logTicks(xDom[0], xDom[1])) {
    if (t < xDom[0] || t > xDom[1]) continue;
    svg.line(sx(t), svg.margin.top, sx(t), svg.height - svg.margin.bottom, "#ddd");
    svg.text(sx(t), svg.height - svg.margin.bottom + 16, `1e${Math.round(Math.log10(t))}`, { anchor: "middle", size: 10 });
  }
  for (const t of logTicks(yDom[0], yDom[1])) {
    if (t < yDom[0] || t > yDom[1]) continue;
    svg.line(svg.margin.left, sy(t), svg.width - svg.margin.right, sy(t), "#ddd");
    svg.text(svg.margin.left - 6, sy(t) + 3, `1e${Math.round(Math.log10(t))}`, { anchor: "end", size: 10 });
  }
  svg.line(svg.margin.left, svg.height - svg.margin.bottom, svg.width - svg.margin.right, svg.height - svg.margin.bottom);
  svg.line(svg.margin.left, svg.margin.top, svg.margin.left, svg.height - svg.margin.bottom);
  svg.text(svg.width / 2, svg.height - 10, "mesh size h", { anchor: "middle" });
  svg.text(16, svg.height / 2, "error", { anchor: "middle", rotate: -90 });
  svg.text(svg.width / 2, 20, "convergence (log-log) with least-squares slopes", { anchor: "middle", size: 14 });

  series.forEach((s, i) => {
    const color = SERIES_COLORS[i % SERIES_COLORS.length];
    const pts = s.h.map((h, k) => [sx(h), sy(s.err[k])] as [number, number]);
    svg.polyline(pts, color);
    for (const [x, y] of pts) svg.circle(x, y, 3.2, color);
    const [lx, ly] = pts[pts.length - 1];
    svg.text(lx + 6, ly - 6, `${s.label}: slope ${s.slope.toFixed(2)}`, { size: 11, fill: color });
  });
  return svg.render();
}

export function plotSpectrum(report: VerifyReport, nearZeroTol = 1e-8): string {
  const evals = report.spectrum.eigenvalues;
  const svg = new Svg(Math.max(480, Math.min(900, evals.length * 3 + 120)), 420);
  const floor = 1e-17;
  const vals = evals.map((v) => Math.max(v, floor));
  const yDom: [number, number] = [Math.min(...vals) / 10, Math.max(...vals) * 10];
  const sy = (v: number) =>
    scale([Math.log10(yDom[0]), Math.log10(yDom[1])], [svg.height - svg.margin.bottom, svg.margin.top])(Math.log10(v));
  const x0 = svg.margin.left;
  const bw = svg.plotWidth / vals.length;
  const base = svg.height - svg.margin.bottom;
  let nearZero = 0;
  vals.forEach((v, i) => {
    const isKernel = evals[i] <= nearZeroTol;
    if (isKernel) nearZero += 1;
    svg.rect(x0 + i * bw, sy(v), Math.max(bw - 0.5, 0.5), base - sy(v), isKernel ? "#d1242f" : "#1f6feb");
  });
  for (const t of logTicks(yDom[0], yDom[1])) {
    if (Math.log10(t) % 4 !== 0) continue;
    svg.text(svg.margin.left - 6, sy(t) + 3, `1e${Math.round(Math.log10(t))}`, { anchor: "end", size: 10 });
  }
  svg.line(x0, base, svg.width - svg.margin.right, base);
  svg.text(svg.width / 2, 20,
    `boundary-operator spectrum: ${nearZero} near-zero eigenvalue${nearZero === 1 ? "" : "s"} (kernel = span of the normal)`,
    { anchor: "middle", size: 13 });
  svg.text(svg.width / 2, svg.height - 10, "eigenvalue index (ascending)", { anchor: "middle" });
  return svg.render();
}

export function plotAgreement(table: SolutionTable): string {
  const methods = Object.keys(table.methods);
  if (methods.length < 2) {
    throw new SchemaError("agreement scatter needs two velocity columns");
  }
  const [a, b] = methods.includes("variational") && methods.includes("potential")
    ? ["variational", "potential"]
    : [methods[0], methods[1]];
  const mag = (vec: number[]) => Math.hypot(vec[0], vec[1], vec[2]);
  const xs = table.methods[a].map(mag);
  const ys = table.methods[b].map(mag);
  const m = Math.max(...xs, ...ys, 1e-300) * 1.1;
  const svg = new Svg(480, 480);
  const sx = scale([0, m], [svg.margin.left, svg.width - svg.margin.right]);
  const sy = scale([0, m], [svg.height - svg.margin.bottom, svg.margin.top]);
  svg.line(sx(0), sy(0), sx(m), sy(m), "#999", 1);
  xs.forEach((x, i) => svg.circle(sx(x), sy(ys[i]), 3.5, "#1f6feb"));
  svg.line(svg.margin.left, svg.height - svg.margin.bottom, svg.width - svg.margin.right, svg.height - svg.margin.bottom);
  svg.line(svg.margin.left, svg.margin.top, svg.margin.left, svg.height - svg.margin.bottom);
  svg.text(svg.width / 2, svg.height - 10, `|u| ${a}`, { anchor: "middle" });
  svg.text(16, svg.height / 2, `|u| ${b}`, { anchor: "middle", rotate: -90 });
  svg.text(svg.width / 2, 20, "probe agreement between solution routes", { anchor: "middle", size: 14 });
  return svg.render();
}
