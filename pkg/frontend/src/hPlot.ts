import { readCsv, requireColumns } from "./csv.js";
import {
  HEIGHT,
  MARGIN,
  SvgDoc,
  WIDTH,
  drawAxes,
  linearScale,
  niceTicks,
} from "./svg.js";

export interface HPlotSpec {
  path: string;
  title: string;
}

/** Complexity profile H(t) with error bars and the grid maximizer marked. */
export function renderHPlot(spec: HPlotSpec): string {
  const table = readCsv(spec.path);
  const [ti, hi, si] = requireColumns(
    table,
    ["t", "H_mean", "H_stderr"],
    spec.path
  );
  requireColumns(table, ["solver_failures"], spec.path);
  if (table.rows.length < 2) {
    throw new Error(`${spec.path}: need at least two radii to draw a profile`);
  }
  const t = table.rows.map((r) => r[ti]);
  const h = table.rows.map((r) => r[hi]);
  const err = table.rows.map((r) => r[si]);

  const lo = h.map((v, i) => v - 2 * err[i]);
  const hiV = h.map((v, i) => v + 2 * err[i]);
  const xDom: [number, number] = [0, Math.max(...t) * 1.05];
  const span = Math.max(...hiV) - Math.min(...lo) || 1;
  const yDom: [number, number] = [
    Math.min(0, Math.min(...lo)) - 0.05 * span,
    Math.max(0, Math.max(...hiV)) + 0.05 * span,
  ];
  const xS = linearScale(xDom, [MARGIN.left, WIDTH - MARGIN.right]);
  const yS = linearScale(yDom, [HEIGHT - MARGIN.bottom, MARGIN.top]);

  const doc = new SvgDoc();
  drawAxes(
    doc,
    xS,
    yS,
    niceTicks(xDom),
    niceTicks(yDom),
    "localization radius t",
    "H(t)"
  );
  // zero level
  doc.line(
    MARGIN.left,
    yS(0),
    WIDTH - MARGIN.right,
    yS(0),
    'stroke="#999" stroke-width="0.8" stroke-dasharray="3 3"'
  );

  const color = "#1965b0";
  doc.polyline(
    t.map((tv, i) => [xS(tv), yS(h[i])] as [number, number]),
    `stroke="${color}" stroke-width="1.6"`
  );
  t.forEach((tv, i) => {
    doc.line(xS(tv), yS(lo[i]), xS(tv), yS(hiV[i]), `stroke="${color}" stroke-width="1"`);
    doc.circle(xS(tv), yS(h[i]), 3.0, `fill="${color}"`);
  });

  // mark the grid maximizer
  const best = h.indexOf(Math.max(...h));
  const tStar = t[best];
  doc.line(
    xS(tStar),
    yS(yDom[0]),
    xS(tStar),
    yS(yDom[1]),
    'stroke="#dc050c" stroke-width="1.2" stroke-dasharray="6 4"'
  );
  doc.text(xS(tStar) + 6, MARGIN.top + 14, `t* = ${tStar.toPrecision(3)}`, 'fill="#dc050c"');

  return doc.render(spec.title);
}
