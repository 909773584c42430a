/** Minimal CSV handling for the simulator's output files (no quoting). */

export interface Table {
  columns: string[];
  rows: Record<string, string>[];
}

export class CsvError extends Error {}

export function parseCsv(text: string, path = "<csv>"): Table {
  const lines = text.split(/\r?\n/).filter((l) => l.trim().length > 0);
  if (lines.length === 0) {
    throw new CsvError(`${path}: empty input`);
  }
  const columns = lines[0].split(",").map((c) => c.trim());
  const rows = lines.slice(1).map((line, i) => {
    const cells = line.split(",");
    if (cells.length !== columns.length) {
      throw new CsvError(`${path}:${i + 2}: expected ${columns.length} fields, got ${cells.length}`);
    }
    const row: Record<string, string> = {};
    columns.forEach((c, j) => (row[c] = cells[j].trim()));
    return row;
  });
  if (rows.length === 0) {
    throw new CsvError(`${path}: no data rows`);
  }
  return { columns, rows };
}

export function requireColumns(table: Table, needed: string[], path = "<csv>"): void {
  const missing = needed.filter((c) => !table.columns.includes(c));
  if (missing.length > 0) {
    throw new CsvError(`${path}: missing column(s): ${missing.join(", ")}`);
  }
}

export function num(row: Record<string, string>, column: string): number {
  const v = Number(row[column]);
  if (!Number.isFinite(v)) {
    throw new CsvError(`bad numeric value ${row[column]!} in column ${column}`);
  }
  return v;
}
