/** Tiny SVG scene builder: enough for log-log charts, bars and scatters. */

export interface Margin {
  top: number;
  right: number;
  bottom: number;
  left: number;
}

const DEFAULT_MARGIN: Margin = { top: 36, right: 24, bottom: 48, left: 64 };

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export class Svg {
  readonly width: number;
  readonly height: number;
  readonly margin: Margin;
  private parts: string[] = [];

  constructor(width = 640, height = 440, margin: Partial<Margin> = {}) {
    this.width = width;
    this.height = height;
    this.margin = { ...DEFAULT_MARGIN, ...margin };
  }

  get plotWidth(): number {
    return this.width - this.margin.left - this.margin.right;
  }

  get plotHeight(): number {
    return this.height - this.margin.top - this.margin.bottom;
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke = "#444", width = 1) {
    this.parts.push(
      `<line x1="${x1.toFixed(2)}" y1="${y1.toFixed(2)}" x2="${x2.toFixed(2)}" ` +
        `y2="${y2.toFixed(2)}" stroke="${stroke}" stroke-width="${width}"/>`,
    );
  }

  polyline(pts: [number, number][], stroke: string, width = 1.6, dash = "") {
    const d = pts.map(([x, y]) => `${x.toFixed(2)},${y.toFixed(2)}`).join(" ");
    const dashAttr = dash ? ` stroke-dasharray="${dash}"` : "";
    this.parts.push(
      `<polyline points="${d}" fill="none" stroke="${stroke}" stroke-width="${width}"${dashAttr}/>`,
    );
  }

  circle(x: number, y: number, r: number, fill: string) {
    this.parts.push(
      `<circle cx="${x.toFixed(2)}" cy="${y.toFixed(2)}" r="${r}" fill="${fill}"/>`,
    );
  }

  rect(x: number, y: number, w: number, h: number, fill: string) {
    this.parts.push(
      `<rect x="${x.toFixed(2)}" y="${y.toFixed(2)}" width="${Math.max(w, 0).toFixed(2)}" ` +
        `height="${Math.max(h, 0).toFixed(2)}" fill="${fill}"/>`,
    );
  }

  text(x: number, y: number, s: string, opts: { size?: number; anchor?: string; fill?: string; rotate?: number } = {}) {
    const size = opts.size ?? 12;
    const anchor = opts.anchor ?? "start";
    const fill = opts.fill ?? "#222";
    const rot = opts.rotate ? ` transform="rotate(${opts.rotate} ${x} ${y})"` : "";
    this.parts.push(
      `<text x="${x.toFixed(2)}" y="${y.toFixed(2)}" font-size="${size}" ` +
        `font-family="sans-serif" text-anchor="${anchor}" fill="${fill}"${rot}>${esc(s)}</text>`,
    );
  }

  render(): string {
    return (
      `<svg xmlns="http://www.w3.org/2000/svg" width="${this.width}" height="${this.height}" ` +
      `viewBox="0 0 ${this.width} ${this.height}">\n<rect width="100%" height="100%" fill="white"/>\n` +
      this.parts.join("\n") +
      "\n</svg>\n"
    );
  }
}

/** Monotone map from a data interval to pixels. */
export function scale(domain: [number, number], range: [number, number]) {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  return (v: number) => r0 + ((v - d0) / span) * (r1 - r0);
}

export function logTicks(lo: number, hi: number): number[] {
  const ticks: number[] = [];
  for (let e = Math.floor(Math.log10(lo)); e <= Math.ceil(Math.log10(hi)); e++) {
    ticks.push(10 ** e);
  }
  return ticks;
}
