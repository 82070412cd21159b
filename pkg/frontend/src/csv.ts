/**
 * Reader for the result tables: comma-separated with '#'-prefixed
 * metadata lines ("# key: value") above the header row.
 */

export interface Table {
    meta: Record<string, string>;
    header: string[];
    rows: Record<string, string>[];
}

export function parseCsv(text: string): Table {
    const meta: Record<string, string> = {};
    let header: string[] | null = null;
    const rows: Record<string, string>[] = [];
    for (const raw of text.split(/\r?\n/)) {
        const line = raw.trimEnd();
        if (line === "") continue;
        if (line.startsWith("#")) {
            const idx = line.indexOf(":");
            if (idx > 1) {
                meta[line.slice(1, idx).trim()] = line.slice(idx + 1).trim();
            }
            continue;
        }
        const cells = line.split(",");
        if (header === null) {
            header = cells;
            continue;
        }
        if (cells.length !== header.length) {
            throw new Error(`row has ${cells.length} cells, expected ${header.length}`);
        }
        const row: Record<string, string> = {};
        header.forEach((name, i) => (row[name] = cells[i]));
        rows.push(row);
    }
    if (header === null) {
        throw new Error("no header row found");
    }
    return { meta, header, rows };
}

export function num(row: Record<string, string>, key: string): number {
    const v = Number(row[key]);
    if (!Number.isFinite(v) && row[key] !== "nan") {
        throw new Error(`column ${key} is not numeric: ${row[key]}`);
    }
    return v;
}

/** Throws when tables carry different config fingerprints (unless allowed). */
export function checkFingerprints(tables: Table[], allowMixed: boolean): string {
    const prints = new Set(tables.map(t => t.meta["fingerprint"] ?? ""));
    if (prints.size > 1 && !allowMixed) {
        throw new Error(
            "refusing to mix fingerprints " + [...prints].join(", ") +
            " in one figure (pass --allow-mixed to override)"
        );
    }
    return [...prints][0] ?? "";
}
