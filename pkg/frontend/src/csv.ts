import { readFileSync } from "fs";

export interface Table {
  header: string[];
  rows: number[][];
}

/** Parse a small numeric CSV with a header row. */
export function readCsv(path: string): Table {
  const text = readFileSync(path, "utf8").trim();
  if (text.length === 0) {
    throw new Error(`${path}: empty CSV`);
  }
  const lines = text.split(/\r?\n/);
  const header = lines[0].split(",").map((s) => s.trim());
  const rows: number[][] = [];
  for (let i = 1; i < lines.length; i++) {
    if (lines[i].trim() === "") continue;
    const parts = lines[i].split(",");
    if (parts.length !== header.length) {
      throw new Error(
        `${path}: row ${i + 1} has ${parts.length} fields, expected ${header.length}`
      );
    }
    rows.push(parts.map((p) => Number(p)));
  }
  return { header, rows };
}

/** Require the given columns, returning their indices. */
export function requireColumns(table: Table, columns: string[], path: string): number[] {
  return columns.map((name) => {
    const idx = table.header.indexOf(name);
    if (idx < 0) {
      throw new Error(
        `${path}: missing column '${name}' (header: ${table.header.join(",")})`
      );
    }
    return idx;
  });
}
