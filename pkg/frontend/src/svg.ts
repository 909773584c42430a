/** Deterministic SVG assembly: scales, axes, series, legends. */

export interface Margin {
  top: number;
  right: number;
  bottom: number;
  left: number;
}

export const PALETTE = ["#4472c4", "#ed7d31", "#70ad47", "#9e480e", "#7030a0", "#c00000"];

export function linearScale(domain: [number, number], range: [number, number]) {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  return (x: number) => r0 + ((x - d0) / span) * (r1 - r0);
}

export function log2Scale(domain: [number, number], range: [number, number]) {
  const lin = linearScale([Math.log2(domain[0]), Math.log2(domain[1])], range);
  return (x: number) => lin(Math.log2(x));
}

export function ticks(lo: number, hi: number, count = 5): number[] {
  const span = hi - lo || 1;
  const step = Math.pow(10, Math.floor(Math.log10(span / count)));
  const err = (span / count) / step;
  const mult = err >= 7.5 ? 10 : err >= 3.5 ? 5 : err >= 1.5 ? 2 : 1;
  const s = step * mult;
  const start = Math.ceil(lo / s) * s;
  const out: number[] = [];
  for (let v = start; v <= hi + 1e-9; v += s) {
    out.push(Number(v.toFixed(10)));
  }
  return out;
}

export function fmt(v: number): string {
  if (Number.isInteger(v)) return String(v);
  return String(Number(v.toPrecision(4)));
}

export class SvgBuilder {
  readonly width: number;
  readonly height: number;
  readonly margin: Margin;
  private parts: string[] = [];

  constructor(width = 640, height = 400,
              margin: Margin = { top: 28, right: 20, bottom: 48, left: 64 }) {
    this.width = width;
    this.height = height;
    this.margin = margin;
  }

  get plotLeft() { return this.margin.left; }
  get plotRight() { return this.width - this.margin.right; }
  get plotTop() { return this.margin.top; }
  get plotBottom() { return this.height - this.margin.bottom; }

  add(fragment: string): void {
    this.parts.push(fragment);
  }

  text(x: number, y: number, s: string, attrs = ""): void {
    this.add(`<text x="${fmt(x)}" y="${fmt(y)}" font-family="sans-serif" font-size="12" ${attrs}>${escapeXml(s)}</text>`);
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke = "#333", width = 1): void {
    this.add(`<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" stroke="${stroke}" stroke-width="${width}"/>`);
  }

  polyline(points: [number, number][], stroke: string, width = 2, dash = ""): void {
    const pts = points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
    const d = dash ? ` stroke-dasharray="${dash}"` : "";
    this.add(`<polyline points="${pts}" fill="none" stroke="${stroke}" stroke-width="${width}"${d}/>`);
  }

  circle(x: number, y: number, r: number, fill: string, attrs = ""): void {
    this.add(`<circle cx="${fmt(x)}" cy="${fmt(y)}" r="${r}" fill="${fill}" ${attrs}/>`);
  }

  rect(x: number, y: number, w: number, h: number, fill: string, attrs = ""): void {
    this.add(`<rect x="${fmt(x)}" y="${fmt(y)}" width="${fmt(w)}" height="${fmt(h)}" fill="${fill}" ${attrs}/>`);
  }

  xAxis(scale: (v: number) => number, values: number[], label: string,
        format: (v: number) => string = fmt): void {
    const y = this.plotBottom;
    this.line(this.plotLeft, y, this.plotRight, y);
    for (const v of values) {
      const x = scale(v);
      this.line(x, y, x, y + 5);
      this.text(x, y + 18, format(v), 'text-anchor="middle"');
    }
    this.text((this.plotLeft + this.plotRight) / 2, this.height - 8, label,
              'text-anchor="middle" font-weight="bold"');
  }

  yAxis(scale: (v: number) => number, values: number[], label: string): void {
    const x = this.plotLeft;
    this.line(x, this.plotTop, x, this.plotBottom);
    for (const v of values) {
      const y = scale(v);
      this.line(x - 5, y, x, y);
      this.text(x - 8, y + 4, fmt(v), 'text-anchor="end"');
    }
    this.add(`<text x="14" y="${fmt((this.plotTop + this.plotBottom) / 2)}" font-family="sans-serif" font-size="12" font-weight="bold" text-anchor="middle" transform="rotate(-90 14 ${fmt((this.plotTop + this.plotBottom) / 2)})">${escapeXml(label)}</text>`);
  }

  legend(entries: [string, string][], x?: number, y?: number): void {
    let yy = y ?? this.plotTop + 4;
    const xx = x ?? this.plotRight - 130;
    for (const [name, color] of entries) {
      this.line(xx, yy, xx + 18, yy, color, 3);
      this.text(xx + 24, yy + 4, name);
      yy += 16;
    }
  }

  title(s: string): void {
    this.text(this.width / 2, 16, s, 'text-anchor="middle" font-weight="bold" font-size="14"');
  }

  render(): string {
    return `<svg xmlns="http://www.w3.org/2000/svg" width="${this.width}" height="${this.height}" viewBox="0 0 ${this.width} ${this.height}">\n<rect width="100%" height="100%" fill="white"/>\n${this.parts.join("\n")}\n</svg>\n`;
  }
}

export function escapeXml(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}
