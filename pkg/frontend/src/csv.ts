/**
 * Reader for the versioned CSV files the solver CLI emits.
 *
 * Every file starts with `# heatmeasure-csv <kind> v<par>` followed by optional
 * `# key=value` metadata comments and a header row. Schema mismatches are
 * reported with the expected kind and version so stale files fail loudly.
 */

import * as fs from "node:fs";

export interface CsvTable {
    kind: string;
    version: string;
    meta: Record<string, string>;
    header: string[];
    rows: string[][];
}

const MAGIC = /^# heatmeasure-csv (\S+) (v\d+)$/;

export function readCsv(path: string, expectedKind: string, expectedVersion = "v1"): CsvTable {
    const text = fs.readFileSync(path, "utf-8");
    const lines = text.split(/\r?\n/).filter((ln) => ln.length > 0);
    if (lines.length === 0) {
        throw new Error(`${path}: empty file, expected schema 'heatmeasure-csv ${expectedKind} ${expectedVersion}'`);
    }
    const magic = lines[0].match(MAGIC);
    if (!magic) {
        throw new Error(
            `${path}: missing schema line, expected 'heatmeasure-csv ${expectedKind} ${expectedVersion}'`
        );
    }
    const [, kind, version] = magic;
    if (kind !== expectedKind || version !== expectedVersion) {
        throw new Error(
            `${path}: schema is '${kind} ${version}', expected '${expectedKind} ${expectedVersion}'`
        );
    }
    const meta: Record<string, string> = {};
    let i = 1;
    for (; i < lines.length && lines[i].startsWith("#"); i++) {
        const m = lines[i].slice(1).trim().match(/^([^=]+)=(.*)$/);
        if (m) {
            meta[m[1].trim()] = m[2].trim();
        }
    }
    if (i >= lines.length) {
        throw new Error(`${path}: no header row`);
    }
    const header = lines[i].split(",");
    const rows = lines.slice(i + 1).map((ln) => ln.split(","));
    if (rows.length === 0) {
        throw new Error(`${path}: no data rows`);
    }
    return { kind, version, meta, header, rows };
}

export function column(table: CsvTable, name: string): string[] {
    const idx = table.header.indexOf(name);
    if (idx < 0) {
        throw new Error(`column '${name}' not in header [${table.header.join(", ")}]`);
    }
    return table.rows.map((r) => r[idx]);
}

export function numericColumn(table: CsvTable, name: string): number[] {
    return column(table, name).map((v) => {
        const x = Number(v);
        if (!Number.isFinite(x)) {
            throw new Error(`column '${name}' has non-numeric entry '${v}'`);
        }
        return x;
    });
}

export function metaNumber(table: CsvTable, key: string): number | undefined {
    const raw = table.meta[key];
    if (raw === undefined) return undefined;
    const x = Number(raw);
    return Number.isFinite(x) ? x : undefined;
}
