import { readCsv, requireColumns } from "./csv.js";
import {
  HEIGHT,
  MARGIN,
  SERIES_COLORS,
  SvgDoc,
  WIDTH,
  decadeTicks,
  drawAxes,
  logScale,
} from "./svg.js";

export interface RiskSeries {
  path: string;
  label: string;
}

export interface RiskPlotSpec {
  series: RiskSeries[];
  referenceSlopes: number[]; // drawn anchored at the largest-n point
  title: string;
}

interface Curve {
  label: string;
  n: number[];
  risk: number[];
  stderr: number[];
}

function loadCurve(series: RiskSeries): Curve {
  const table = readCsv(series.path);
  const [ni, ri, si] = requireColumns(
    table,
    ["n", "mean_risk", "stderr"],
    series.path
  );
  requireColumns(table, ["mean_Lfrak", "failures"], series.path);
  if (table.rows.length === 0) {
    throw new Error(`${series.path}: no data rows`);
  }
  const n = table.rows.map((r) => r[ni]);
  const risk = table.rows.map((r) => r[ri]);
  if (risk.some((v) => !(v > 0))) {
    throw new Error(`${series.path}: log-log risk plot needs positive mean_risk`);
  }
  return { label: series.label, n, risk, stderr: table.rows.map((r) => r[si]) };
}

/** Log-log risk curves with error bars and anchored reference slope lines. */
export function renderRiskPlot(spec: RiskPlotSpec): string {
  if (spec.series.length === 0) {
    throw new Error("risk plot needs at least one input CSV");
  }
  const curves = spec.series.map(loadCurve);
  const allN = curves.flatMap((c) => c.n);
  const allLo = curves.flatMap((c) =>
    c.risk.map((v, i) => Math.max(v - 2 * c.stderr[i], v / 10))
  );
  const allHi = curves.flatMap((c) => c.risk.map((v, i) => v + 2 * c.stderr[i]));
  const xDom: [number, number] = [Math.min(...allN) / 1.15, Math.max(...allN) * 1.15];
  const yDom: [number, number] = [Math.min(...allLo) / 1.3, Math.max(...allHi) * 1.3];
  const xS = logScale(xDom, [MARGIN.left, WIDTH - MARGIN.right]);
  const yS = logScale(yDom, [HEIGHT - MARGIN.bottom, MARGIN.top]);

  const doc = new SvgDoc();
  drawAxes(
    doc,
    xS,
    yS,
    decadeTicks(xDom),
    decadeTicks(yDom),
    "sample size n",
    "mean squared risk"
  );

  curves.forEach((curve, ci) => {
    const color = SERIES_COLORS[ci % SERIES_COLORS.length];
    const lineStyle = `stroke="${color}" stroke-width="1.6"`;
    doc.polyline(
      curve.n.map((n, i) => [xS(n), yS(curve.risk[i])] as [number, number]),
      lineStyle
    );
    curve.n.forEach((n, i) => {
      const lo = Math.max(curve.risk[i] - 2 * curve.stderr[i], yDom[0]);
      const hi = curve.risk[i] + 2 * curve.stderr[i];
      if (hi > lo) {
        doc.line(xS(n), yS(lo), xS(n), yS(hi), `stroke="${color}" stroke-width="1"`);
      }
      doc.circle(xS(n), yS(curve.risk[i]), 3.2, `fill="${color}"`);
    });
  });

  // reference lines anchored at the last point of the first curve
  const anchor = curves[0];
  const nA = anchor.n[anchor.n.length - 1];
  const rA = anchor.risk[anchor.risk.length - 1];
  spec.referenceSlopes.forEach((slope, k) => {
    const ref = (n: number) => rA * (n / nA) ** slope;
    const nLo = xDom[0] * 1.02;
    doc.line(
      xS(nLo),
      yS(ref(nLo)),
      xS(nA),
      yS(rA),
      'stroke="#555" stroke-width="1.2" stroke-dasharray="6 4"'
    );
    doc.text(
      xS(nLo) + 6,
      yS(ref(nLo)) - 6 - 14 * k,
      `slope ${slope.toFixed(3)}`,
      'fill="#555"'
    );
  });

  // legend
  curves.forEach((curve, ci) => {
    const color = SERIES_COLORS[ci % SERIES_COLORS.length];
    const y = MARGIN.top + 16 + 18 * ci;
    const x = WIDTH - MARGIN.right - 170;
    doc.line(x, y - 4, x + 26, y - 4, `stroke="${color}" stroke-width="2"`);
    doc.text(x + 32, y, curve.label);
  });

  return doc.render(spec.title);
}
