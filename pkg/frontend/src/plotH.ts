import { writeFileSync } from "fs";
import { renderHPlot } from "./hPlot.js";

function usage(): never {
  console.error("usage: plot-h --input profile.csv --output plot.svg [--title T]");
  process.exit(1);
}

export function main(argv: string[]): void {
  let input = "";
  let output = "";
  let title = "Localized complexity profile";
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    const next = () => {
      i += 1;
      if (i >= argv.length) usage();
      return argv[i];
    };
    if (arg === "--input") input = next();
    else if (arg === "--output") output = next();
    else if (arg === "--title") title = next();
    else usage();
  }
  if (input === "" || output === "") usage();
  const svg = renderHPlot({ path: input, title });
  writeFileSync(output, svg);
  console.log(`wrote ${output}`);
}

main(process.argv.slice(2));
