// Minimal deterministic SVG builder: figures are plain strings with
// fixed-precision coordinates, so identical inputs give identical bytes.

export const WIDTH = 640;
export const HEIGHT = 480;
export const MARGIN = 52;

export function fmt(x: number): string {
  if (!Number.isFinite(x)) return "0";
  const v = Math.round(x * 1e4) / 1e4;
  return Object.is(v, -0) ? "0" : String(v);
}

export interface Scale {
  (v: number): number;
  domain: [number, number];
}

export function linearScale(
  domain: [number, number],
  range: [number, number],
): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  const f = ((v: number) => r0 + ((v - d0) / span) * (r1 - r0)) as Scale;
  f.domain = domain;
  return f;
}

export function extent(values: number[], pad = 0.05): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (!Number.isFinite(lo)) return [0, 1];
  if (lo === hi) {
    lo -= 1;
    hi += 1;
  }
  const p = (hi - lo) * pad;
  return [lo - p, hi + p];
}

export class Svg {
  private parts: string[] = [];

  constructor(readonly manifestHash: string, title: string) {
    this.parts.push(
      `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}">`,
      `<metadata id="manifest">${manifestHash}</metadata>`,
      `<!-- manifest:${manifestHash} -->`,
      `<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`,
      `<text x="${WIDTH / 2}" y="24" text-anchor="middle" font-family="sans-serif" font-size="15">${escapeXml(title)}</text>`,
    );
  }

  polyline(points: Array<[number, number]>, stroke: string, width = 1.5, dash = ""): void {
    const pts = points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
    const dashAttr = dash ? ` stroke-dasharray="${dash}"` : "";
    this.parts.push(
      `<polyline points="${pts}" fill="none" stroke="${stroke}" stroke-width="${width}"${dashAttr}/>`,
    );
  }

  polygon(points: Array<[number, number]>, stroke: string, fill: string): void {
    const pts = points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
    this.parts.push(
      `<polygon points="${pts}" fill="${fill}" stroke="${stroke}" stroke-width="1.2"/>`,
    );
  }

  circle(x: number, y: number, r: number, fill: string): void {
    this.parts.push(
      `<circle cx="${fmt(x)}" cy="${fmt(y)}" r="${fmt(r)}" fill="${fill}"/>`,
    );
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke: string, width = 1): void {
    this.parts.push(
      `<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" stroke="${stroke}" stroke-width="${width}"/>`,
    );
  }

  rect(x: number, y: number, w: number, h: number, fill: string): void {
    this.parts.push(
      `<rect x="${fmt(x)}" y="${fmt(y)}" width="${fmt(w)}" height="${fmt(h)}" fill="${fill}"/>`,
    );
  }

  text(x: number, y: number, content: string, size = 11, anchor = "middle"): void {
    this.parts.push(
      `<text x="${fmt(x)}" y="${fmt(y)}" text-anchor="${anchor}" font-family="sans-serif" font-size="${size}">${escapeXml(content)}</text>`,
    );
  }

  axes(xs: Scale, ys: Scale, xLabel: string, yLabel: string): void {
    const x0 = MARGIN;
    const x1 = WIDTH - MARGIN;
    const y0 = HEIGHT - MARGIN;
    const y1 = MARGIN;
    this.line(x0, y0, x1, y0, "#222");
    this.line(x0, y0, x0, y1, "#222");
    for (const t of ticks(xs.domain)) {
      const px = xs(t);
      this.line(px, y0, px, y0 + 4, "#222");
      this.text(px, y0 + 18, fmt(t));
    }
    for (const t of ticks(ys.domain)) {
      const py = ys(t);
      this.line(x0 - 4, py, x0, py, "#222");
      this.text(x0 - 8, py + 4, fmt(t), 11, "end");
    }
    this.text((x0 + x1) / 2, HEIGHT - 14, xLabel, 12);
    this.parts.push(
      `<text x="16" y="${(y0 + y1) / 2}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 16 ${(y0 + y1) / 2})">${escapeXml(yLabel)}</text>`,
    );
  }

  legend(entries: Array<[string, string]>): void {
    entries.forEach(([label, color], i) => {
      const y = MARGIN + 16 * i;
      this.rect(WIDTH - MARGIN - 120, y - 8, 10, 10, color);
      this.text(WIDTH - MARGIN - 104, y + 1, label, 11, "start");
    });
  }

  render(): string {
    return this.parts.join("\n") + "\n</svg>\n";
  }
}

export function ticks([lo, hi]: [number, number], count = 5): number[] {
  const span = hi - lo;
  if (span <= 0) return [lo];
  const raw = span / count;
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => span / s <= count) ?? mag * 10;
  const out: number[] = [];
  for (let t = Math.ceil(lo / step) * step; t <= hi + 1e-12; t += step) {
    out.push(Math.abs(t) < step * 1e-9 ? 0 : t);
  }
  return out;
}

function escapeXml(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}
