#!/usr/bin/env node
/**
 * Command line entry point: read result tables from an input directory and
 * write the report figures as SVG files to an output directory.
 *
 *   ewlab-report --in <dir> --out <dir> [--allow-mixed]
 *
 * Tables are matched by file name: variance_scaling*.csv, draws.csv, and
 * cov_decay.csv.  Tables from runs with different configuration
 * fingerprints are refused unless --allow-mixed is given.
 */

import { readFileSync, readdirSync, writeFileSync, mkdirSync } from "node:fs";
import { join } from "node:path";
import { Table, parseCsv, checkFingerprints } from "./csv.js";
import { plotVarianceScaling, plotQqNormal, plotCovDecay } from "./plots.js";

interface Args {
    inDir: string;
    outDir: string;
    allowMixed: boolean;
}

export function parseArgs(argv: string[]): Args {
    let inDir: string | null = null;
    let outDir: string | null = null;
    let allowMixed = false;
    for (let i = 0; i < argv.length; i++) {
        const a = argv[i];
        if (a === "--in") inDir = argv[++i];
        else if (a === "--out") outDir = argv[++i];
        else if (a === "--allow-mixed") allowMixed = true;
        else throw new Error(`unknown argument: ${a}`);
    }
    if (!inDir || !outDir) {
        throw new Error("usage: report --in <dir> --out <dir> [--allow-mixed]");
    }
    return { inDir, outDir, allowMixed };
}

function loadTables(dir: string): Map<string, Table> {
    const tables = new Map<string, Table>();
    for (const name of readdirSync(dir).sort()) {
        if (!name.endsWith(".csv")) continue;
        tables.set(name, parseCsv(readFileSync(join(dir, name), "utf8")));
    }
    return tables;
}

/** Builds every figure supported by the available tables. */
export function buildReport(tables: Map<string, Table>, allowMixed: boolean): Map<string, string> {
    const used = [...tables.entries()].filter(([name]) =>
        name.startsWith("variance_scaling") || name === "draws.csv" || name === "cov_decay.csv"
    );
    if (used.length === 0) {
        throw new Error("no recognized tables found in input directory");
    }
    checkFingerprints(used.map(([, t]) => t), allowMixed);

    const figures = new Map<string, string>();
    for (const [name, table] of used) {
        if (name.startsWith("variance_scaling")) {
            const suffix = name.slice("variance_scaling".length, -".csv".length);
            figures.set(`variance_scaling${suffix}.svg`, plotVarianceScaling(table));
        } else if (name === "draws.csv") {
            figures.set("qq_normal.svg", plotQqNormal(table));
        } else if (name === "cov_decay.csv") {
            figures.set("cov_decay.svg", plotCovDecay(table));
        }
    }
    return figures;
}

export function main(argv: string[]): number {
    let args: Args;
    try {
        args = parseArgs(argv);
    } catch (e) {
        console.error(String(e instanceof Error ? e.message : e));
        return 2;
    }
    try {
        const tables = loadTables(args.inDir);
        const figures = buildReport(tables, args.allowMixed);
        mkdirSync(args.outDir, { recursive: true });
        for (const [name, svg] of figures) {
            writeFileSync(join(args.outDir, name), svg);
            console.log(`wrote ${join(args.outDir, name)}`);
        }
        return 0;
    } catch (e) {
        console.error(String(e instanceof Error ? e.message : e));
        return 1;
    }
}

if (process.argv[1] && process.argv[1].endsWith("report.js")) {
    process.exit(main(process.argv.slice(2)));
}
