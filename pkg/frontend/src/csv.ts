/**
 * Parser for the harness CSV artifact format: a schema comment line
 * `# aircomp-csv-schema <version> kind=<kind>` followed by a header row and
 * data rows. Files with a different schema version are rejected.
 */

export const SUPPORTED_SCHEMA_VERSION = 1;

export class SchemaError extends Error {}
export class EmptyDataError extends Error {}

export interface Table {
  kind: string;
  columns: string[];
  rows: Record<string, string>[];
}

export function parseCsv(text: string, expectKind?: string): Table {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new SchemaError("empty file");
  }
  const m = /^#\s*aircomp-csv-schema\s+(\d+)\s+kind=(\S+)$/.exec(lines[0]);
  if (!m) {
    throw new SchemaError("missing aircomp-csv-schema comment line");
  }
  const version = Number(m[1]);
  if (version !== SUPPORTED_SCHEMA_VERSION) {
    throw new SchemaError(
      `unsupported schema version ${version} (supported: ${SUPPORTED_SCHEMA_VERSION})`,
    );
  }
  const kind = m[2];
  if (expectKind !== undefined && kind !== expectKind) {
    throw new SchemaError(`expected kind=${expectKind}, got kind=${kind}`);
  }
  if (lines.length < 2) {
    throw new SchemaError("missing header row");
  }
  const columns = lines[1].split(",");
  const rows = lines.slice(2).map((line) => {
    const cells = line.split(",");
    const row: Record<string, string> = {};
    columns.forEach((c, i) => {
      row[c] = cells[i] ?? "";
    });
    return row;
  });
  if (rows.length === 0) {
    throw new EmptyDataError("no data rows");
  }
  return { kind, columns, rows };
}

export function num(row: Record<string, string>, col: string): number {
  const v = Number(row[col]);
  if (!Number.isFinite(v)) {
    throw new SchemaError(`non-numeric value in column ${col}: ${row[col]}`);
  }
  return v;
}
