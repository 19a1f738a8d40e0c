/** Minimal SVG assembly: fixed canvas, linear/log scales, axis ticks. */

export const WIDTH = 760;
export const HEIGHT = 520;
export const MARGIN = { left: 78, right: 24, top: 46, bottom: 58 };

export interface Scale {
  (v: number): number;
  domain: [number, number];
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const f = ((v: number) => r0 + ((v - d0) / (d1 - d0 || 1)) * (r1 - r0)) as Scale;
  f.domain = domain;
  return f;
}

export function logScale(domain: [number, number], range: [number, number]): Scale {
  if (domain[0] <= 0 || domain[1] <= 0) {
    throw new Error("log scale needs positive domain");
  }
  const inner = linearScale([Math.log10(domain[0]), Math.log10(domain[1])], range);
  const f = ((v: number) => inner(Math.log10(v))) as Scale;
  f.domain = domain;
  return f;
}

export function decadeTicks(domain: [number, number]): number[] {
  const ticks: number[] = [];
  const lo = Math.ceil(Math.log10(domain[0]) - 1e-9);
  const hi = Math.floor(Math.log10(domain[1]) + 1e-9);
  for (let e = lo; e <= hi; e++) ticks.push(10 ** e);
  if (ticks.length === 0) ticks.push(domain[0], domain[1]);
  return ticks;
}

export function niceTicks(domain: [number, number], count = 6): number[] {
  const span = domain[1] - domain[0];
  if (span <= 0) return [domain[0]];
  const rawStep = span / count;
  const mag = 10 ** Math.floor(Math.log10(rawStep));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => s >= rawStep) ?? rawStep;
  const ticks: number[] = [];
  for (let v = Math.ceil(domain[0] / step) * step; v <= domain[1] + 1e-12; v += step) {
    ticks.push(Number(v.toPrecision(12)));
  }
  return ticks;
}

export function fmt(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) return v.toExponential(0).replace("e", "e");
  return String(Number(v.toPrecision(4)));
}

const esc = (s: string) =>
  s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;").replace(/"/g, "&quot;");

export class SvgDoc {
  private parts: string[] = [];

  add(part: string): void {
    this.parts.push(part);
  }

  line(x1: number, y1: number, x2: number, y2: number, style: string): void {
    this.add(
      `<line x1="${r2(x1)}" y1="${r2(y1)}" x2="${r2(x2)}" y2="${r2(y2)}" ${style}/>`
    );
  }

  circle(cx: number, cy: number, rad: number, style: string): void {
    this.add(`<circle cx="${r2(cx)}" cy="${r2(cy)}" r="${rad}" ${style}/>`);
  }

  polyline(points: Array<[number, number]>, style: string): void {
    const pts = points.map(([x, y]) => `${r2(x)},${r2(y)}`).join(" ");
    this.add(`<polyline fill="none" points="${pts}" ${style}/>`);
  }

  text(x: number, y: number, content: string, style = ""): void {
    this.add(`<text x="${r2(x)}" y="${r2(y)}" ${style}>${esc(content)}</text>`);
  }

  render(title: string): string {
    const head =
      `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" ` +
      `viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="Helvetica, Arial, sans-serif" font-size="13">\n` +
      `<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>\n` +
      `<text x="${WIDTH / 2}" y="26" text-anchor="middle" font-size="17">${esc(title)}</text>`;
    return `${head}\n${this.parts.join("\n")}\n</svg>\n`;
  }
}

function r2(v: number): string {
  return (Math.round(v * 100) / 100).toFixed(2);
}

export function drawAxes(
  doc: SvgDoc,
  xScale: Scale,
  yScale: Scale,
  xTicks: number[],
  yTicks: number[],
  xLabel: string,
  yLabel: string
): void {
  const x0 = MARGIN.left;
  const x1 = WIDTH - MARGIN.right;
  const y0 = HEIGHT - MARGIN.bottom;
  const y1 = MARGIN.top;
  const axisStyle = 'stroke="#222" stroke-width="1"';
  doc.line(x0, y0, x1, y0, axisStyle);
  doc.line(x0, y0, x0, y1, axisStyle);
  for (const t of xTicks) {
    const px = xScale(t);
    doc.line(px, y0, px, y0 + 5, axisStyle);
    doc.line(px, y0, px, y1, 'stroke="#ddd" stroke-width="0.6"');
    doc.text(px, y0 + 20, fmt(t), 'text-anchor="middle"');
  }
  for (const t of yTicks) {
    const py = yScale(t);
    doc.line(x0 - 5, py, x0, py, axisStyle);
    doc.line(x0, py, x1, py, 'stroke="#ddd" stroke-width="0.6"');
    doc.text(x0 - 9, py + 4, fmt(t), 'text-anchor="end"');
  }
  doc.text((x0 + x1) / 2, HEIGHT - 14, xLabel, 'text-anchor="middle"');
  doc.text(
    18,
    (y0 + y1) / 2,
    yLabel,
    `text-anchor="middle" transform="rotate(-90 18 ${(y0 + y1) / 2})"`
  );
}

export const SERIES_COLORS = ["#1965b0", "#dc050c", "#4eb265", "#f4a736", "#882e72"];
