import { describe, expect, it } from "vitest";
import { mkdtempSync, readFileSync, cpSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, dirname } from "node:path";
import { fileURLToPath } from "node:url";
import { parseCsv, checkFingerprints, num } from "../src/csv.js";
import { linearScale, logScale, ticks, fmt } from "../src/svg.js";
import {
    normalQuantile,
    plotCovDecay,
    plotQqNormal,
    plotVarianceScaling,
    wlsLine,
} from "../src/plots.js";
import { buildReport, main } from "../src/report.js";

const FIXTURES = join(dirname(fileURLToPath(import.meta.url)), "fixtures");

function fixture(name: string) {
    return parseCsv(readFileSync(join(FIXTURES, name), "utf8"));
}

describe("csv parsing", () => {
    it("reads metadata, header, and rows", () => {
        const t = fixture("variance_scaling.csv");
        expect(t.meta["fingerprint"]).toBe("f00dfeedf00dfeed");
        expect(t.meta["command"]).toBe("fluctuations");
        expect(t.header).toEqual([
            "eps", "n", "mean_X", "var_X_rescaled", "var_ci_lo", "var_ci_hi",
            "theory_sigma2", "ratio",
        ]);
        expect(t.rows).toHaveLength(3);
        expect(num(t.rows[0], "eps")).toBe(0.5);
    });

    it("rejects ragged rows and headerless files", () => {
        expect(() => parseCsv("a,b\n1,2,3\n")).toThrow(/expected 2/);
        expect(() => parseCsv("# only: meta\n")).toThrow(/no header/);
    });

    it("refuses mixed fingerprints unless allowed", () => {
        const a = fixture("variance_scaling.csv");
        const b = fixture("mixed/cov_decay.csv");
        expect(() => checkFingerprints([a, b], false)).toThrow(/allow-mixed/);
        expect(checkFingerprints([a, b], true)).toBeTruthy();
        expect(checkFingerprints([a, a], false)).toBe("f00dfeedf00dfeed");
    });
});

describe("scales and formatting", () => {
    it("maps domains linearly and logarithmically", () => {
        const lin = linearScale([0, 10], [100, 200]);
        expect(lin(5)).toBeCloseTo(150);
        const lg = logScale([1, 100], [0, 2]);
        expect(lg(10)).toBeCloseTo(1);
        expect(() => logScale([0, 1], [0, 1])).toThrow(/positive/);
    });

    it("produces round ticks inside the domain", () => {
        const ts = ticks(linearScale([0, 1], [0, 1]));
        expect(ts[0]).toBeGreaterThanOrEqual(0);
        expect(ts[ts.length - 1]).toBeLessThanOrEqual(1);
        expect(ts.length).toBeGreaterThanOrEqual(3);
        const lts = ticks(logScale([0.05, 50], [0, 1]));
        expect(lts).toContain(1);
        expect(lts).toContain(10);
    });

    it("formats coordinates with a fixed width", () => {
        expect(fmt(1.23456789)).toBe("1.2346");
        expect(fmt(-1e-9)).toBe("0.0000");
    });
});

describe("numerics", () => {
    it("inverts the normal CDF at known points", () => {
        expect(normalQuantile(0.5)).toBeCloseTo(0, 9);
        expect(normalQuantile(0.975)).toBeCloseTo(1.959963985, 7);
        expect(normalQuantile(0.0013498980316301)).toBeCloseTo(-3, 6);
        expect(() => normalQuantile(0)).toThrow();
    });

    it("recovers an exact line in weighted least squares", () => {
        const x = [1, 2, 3, 4];
        const y = x.map(v => 2.5 - 1.25 * v);
        const { slope, intercept } = wlsLine(x, y, [1, 4, 2, 1]);
        expect(slope).toBeCloseTo(-1.25, 12);
        expect(intercept).toBeCloseTo(2.5, 12);
    });
});

describe("figures", () => {
    it("variance scaling: one point per rung plus the theory line", () => {
        const svg = plotVarianceScaling(fixture("variance_scaling.csv"));
        expect(svg).toContain('<g class="series" data-n="3">');
        expect((svg.match(/<circle /g) ?? []).length).toBe(3);
        expect(svg).toContain("limit prediction");
        expect(svg).toContain('class="theory-line"');
        expect(svg).toContain("smoothing radius");
        // every rung has both whisker caps: 3 lines per point
        expect(svg.split('class="series"')[1].match(/<line /g)).toHaveLength(9);
    });

    it("qq plot: uses only the finest rung and draws the reference line", () => {
        const t = fixture("draws.csv");
        const svg = plotQqNormal(t);
        expect(svg).toContain('data-n="120"');
        expect((svg.match(/<circle /g) ?? []).length).toBe(120);
        expect(svg).toContain('class="reference-line"');
        expect(svg).toContain("radius 0.125");
    });

    it("covariance decay: two series, slope annotation near -1", () => {
        const svg = plotCovDecay(fixture("cov_decay.csv"));
        expect(svg).toContain('data-tag="identity"');
        expect(svg).toContain('data-tag="square"');
        const m = svg.match(/fitted slope (-?\d+\.\d+)/);
        expect(m).not.toBeNull();
        const slope = Number(m![1]);
        // the fixture decays close to offset^-1.5
        expect(slope).toBeLessThan(-1.2);
        expect(slope).toBeGreaterThan(-1.8);
    });

    it("rejects empty tables", () => {
        const empty = parseCsv("eps,n\n");
        expect(() => plotVarianceScaling(empty as any)).toThrow(/no rows/);
        expect(() => plotQqNormal(parseCsv("eps,index,z\n"))).toThrow(/no rows/);
        expect(() => plotCovDecay(parseCsv("offset,cov,cov_se,f_tag\n"))).toThrow(/no positive/);
    });

    it("variance scaling: a noiseless table renders markers on the theory line", () => {
        const header = "eps,n,mean_X,var_X_rescaled,var_ci_lo,var_ci_hi,theory_sigma2,ratio\n";
        const exact = parseCsv(
            header + "0.5,100,0.0,2.0,2.0,2.0,2.0,1.0\n0.25,100,0.0,2.0,2.0,2.0,2.0,1.0\n"
        );
        const svg = plotVarianceScaling(exact);
        // the theory line and both markers sit at the same vertical position
        const lineY = svg.match(/class="theory-line">\n<line [^>]*y1="([0-9.]+)"/)![1];
        const markerYs = [...svg.matchAll(/<circle [^>]*cy="([0-9.]+)"/g)].map(m => m[1]);
        expect(markerYs).toEqual([lineY, lineY]);
        // a degenerate all-zero table still renders
        const flat = parseCsv(
            header + "0.5,100,0.0,0.0,0.0,0.0,0.0,nan\n"
        );
        expect(plotVarianceScaling(flat)).toContain("</svg>");
    });

    it("qq plot: exact normal quantiles land on the reference line", () => {
        const n = 50;
        const lines = ["eps,index,z"];
        for (let i = 0; i < n; i++) {
            lines.push(`0.125,${i},${normalQuantile((i + 0.5) / n)}`);
        }
        const svg = plotQqNormal(parseCsv(lines.join("\n") + "\n"));
        const pts = [...svg.matchAll(/<circle cx="([0-9.]+)" cy="([0-9.]+)"/g)];
        expect(pts).toHaveLength(n);
        // x and y pixel coordinates coincide up to formatting for every point
        const area = { x0: 72, x1: 616, y0: 388, y1: 40 };
        for (const [, cx, cy] of pts) {
            const fx = (Number(cx) - area.x0) / (area.x1 - area.x0);
            const fy = (area.y0 - Number(cy)) / (area.y0 - area.y1);
            expect(fy).toBeCloseTo(fx, 3);
        }
    });

    it("qq plot: exponential draws depart convexly from the line", () => {
        const n = 80;
        const lines = ["eps,index,z"];
        const raw: number[] = [];
        for (let i = 0; i < n; i++) raw.push(-Math.log(1 - (i + 0.5) / n));
        const mean = raw.reduce((a, b) => a + b) / n;
        const sd = Math.sqrt(raw.reduce((a, b) => a + (b - mean) ** 2, 0) / (n - 1));
        raw.forEach((v, i) => lines.push(`0.125,${i},${(v - mean) / sd}`));
        const svg = plotQqNormal(parseCsv(lines.join("\n") + "\n"));
        const pts = [...svg.matchAll(/<circle cx="([0-9.]+)" cy="([0-9.]+)"/g)]
            .map(m => [Number(m[1]), Number(m[2])]);
        // upper tail of the sample sits above the identity line (smaller cy)
        const area = { x0: 72, x1: 616, y0: 388, y1: 40 };
        const last = pts[pts.length - 1];
        const fx = (last[0] - area.x0) / (area.x1 - area.x0);
        const fy = (area.y0 - last[1]) / (area.y0 - area.y1);
        expect(fy).toBeGreaterThan(fx + 0.02);
    });

    it("covariance decay: exact power law annotates slope -1.000 and footnotes exclusions", () => {
        const lines = ["offset,cov,cov_se,f_tag"];
        for (const o of [2, 4, 8, 16]) lines.push(`${o},${1 / o},0.0,identity`);
        lines.push("32,0.0,0.0,identity");
        lines.push("48,-0.001,0.0,identity");
        const svg = plotCovDecay(parseCsv(lines.join("\n") + "\n"));
        expect(svg).toContain("fitted slope -1.000");
        expect(svg).toContain("2 non-positive covariance rows excluded");
    });
});

describe("report command", () => {
    it("writes one SVG per recognized table", () => {
        const out = mkdtempSync(join(tmpdir(), "report-"));
        expect(main(["--in", FIXTURES, "--out", out])).toBe(0);
        const names = ["variance_scaling.svg", "qq_normal.svg", "cov_decay.svg"];
        for (const n of names) {
            expect(readFileSync(join(out, n), "utf8")).toContain("</svg>");
        }
    });

    it("re-rendering is byte-identical", () => {
        const a = mkdtempSync(join(tmpdir(), "report-a-"));
        const b = mkdtempSync(join(tmpdir(), "report-b-"));
        expect(main(["--in", FIXTURES, "--out", a])).toBe(0);
        expect(main(["--in", FIXTURES, "--out", b])).toBe(0);
        for (const n of ["variance_scaling.svg", "qq_normal.svg", "cov_decay.svg"]) {
            expect(readFileSync(join(a, n))).toEqual(readFileSync(join(b, n)));
        }
    });

    it("refuses mixed fingerprints without --allow-mixed", () => {
        const dir = mkdtempSync(join(tmpdir(), "mixed-"));
        cpSync(join(FIXTURES, "variance_scaling.csv"), join(dir, "variance_scaling.csv"));
        cpSync(join(FIXTURES, "mixed/cov_decay.csv"), join(dir, "cov_decay.csv"));
        const out = mkdtempSync(join(tmpdir(), "mixed-out-"));
        expect(main(["--in", dir, "--out", out])).toBe(1);
        expect(main(["--in", dir, "--out", out, "--allow-mixed"])).toBe(0);
    });

    it("fails cleanly on bad arguments and empty inputs", () => {
        expect(main(["--in", FIXTURES])).toBe(2);
        expect(main(["--whatever"])).toBe(2);
        const dir = mkdtempSync(join(tmpdir(), "empty-"));
        writeFileSync(join(dir, "unrelated.csv"), "a,b\n1,2\n");
        expect(main(["--in", dir, "--out", dir])).toBe(1);
    });

    it("buildReport names tagged variance tables after their tag", () => {
        const tables = new Map([
            ["variance_scaling_log.csv", fixture("variance_scaling.csv")],
        ]);
        const figs = buildReport(tables, false);
        expect([...figs.keys()]).toEqual(["variance_scaling_log.svg"]);
    });
});
