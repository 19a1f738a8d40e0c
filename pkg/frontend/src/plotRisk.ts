import { writeFileSync } from "fs";
import { readCsv, requireColumns } from "./csv.js";
import { renderRiskPlot, RiskSeries } from "./riskPlot.js";

function usage(): never {
  console.error(
    "usage: plot-risk --input curve.csv[:label] [--input ...] --output plot.svg\n" +
      "                 [--reference-slope S ...] [--rates rates.csv] [--title T]"
  );
  process.exit(1);
}

export function main(argv: string[]): void {
  const series: RiskSeries[] = [];
  const slopes: number[] = [];
  let output = "";
  let title = "Risk against sample size";
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    const next = () => {
      i += 1;
      if (i >= argv.length) usage();
      return argv[i];
    };
    if (arg === "--input") {
      const raw = next();
      const sep = raw.lastIndexOf(":");
      if (sep > 1 && !raw.slice(sep + 1).includes("/")) {
        series.push({ path: raw.slice(0, sep), label: raw.slice(sep + 1) });
      } else {
        series.push({ path: raw, label: `curve ${series.length + 1}` });
      }
    } else if (arg === "--reference-slope") {
      slopes.push(Number(next()));
    } else if (arg === "--rates") {
      const table = readCsv(next());
      const [theoryIdx] = requireColumns(table, ["theory_slope"], "rates csv");
      for (const row of table.rows) {
        const s = row[theoryIdx];
        if (!slopes.some((v) => Math.abs(v - s) < 1e-12)) slopes.push(s);
      }
    } else if (arg === "--output") {
      output = next();
    } else if (arg === "--title") {
      title = next();
    } else {
      usage();
    }
  }
  if (series.length === 0 || output === "") usage();
  const svg = renderRiskPlot({ series, referenceSlopes: slopes, title });
  writeFileSync(output, svg);
  console.log(`wrote ${output} (${series.length} series, ${slopes.length} reference lines)`);
}

main(process.argv.slice(2));
