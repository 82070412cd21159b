/**
 * The three report figures, each a pure function from parsed tables to an
 * SVG string.
 */

import { Table, num } from "./csv.js";
import { DEFAULT_FRAME, SvgBuilder, linearScale, logScale } from "./svg.js";

const POINT = `fill="#1f4e8c" stroke="none"`;
const WHISKER = `stroke="#1f4e8c" stroke-width="1.2"`;
const THEORY = `stroke="#c03020" stroke-width="1.5" stroke-dasharray="6 4"`;
const FIT = `stroke="#444444" stroke-width="1.2" stroke-dasharray="4 3"`;
const SERIES_COLORS = ["#1f4e8c", "#c03020", "#2a7d2a", "#8c5e1f"];

function plotArea(frame = DEFAULT_FRAME) {
    return {
        x0: frame.margin.left,
        x1: frame.width - frame.margin.right,
        y0: frame.height - frame.margin.bottom,
        y1: frame.margin.top,
    };
}

function pad(lo: number, hi: number, frac = 0.08): [number, number] {
    const span = hi - lo || Math.abs(hi) || 1;
    return [lo - frac * span, hi + frac * span];
}

function padLog(lo: number, hi: number, frac = 0.15): [number, number] {
    const r = Math.pow(hi / lo, frac);
    return [lo / r, hi * r];
}

/**
 * Rescaled smoothed-field variance against the smoothing radius, with
 * confidence whiskers and the predicted limit level as a horizontal line.
 */
export function plotVarianceScaling(table: Table): string {
    const rows = [...table.rows].sort((a, b) => num(b, "eps") - num(a, "eps"));
    if (rows.length === 0) throw new Error("variance table has no rows");
    const eps = rows.map(r => num(r, "eps"));
    const vals = rows.map(r => num(r, "var_X_rescaled"));
    const los = rows.map(r => num(r, "var_ci_lo"));
    const his = rows.map(r => num(r, "var_ci_hi"));
    const theory = num(rows[0], "theory_sigma2");

    const area = plotArea();
    const xs = logScale(padLog(Math.min(...eps), Math.max(...eps)), [area.x0, area.x1]);
    const allY = [...vals, ...los, ...his, theory].filter(v => Number.isFinite(v));
    const ys = linearScale(pad(Math.min(0, ...allY), Math.max(...allY)), [area.y0, area.y1]);

    const b = new SvgBuilder(DEFAULT_FRAME);
    b.title("Rescaled variance vs smoothing radius");
    b.axes(xs, ys, "smoothing radius", "rescaled variance");

    b.raw(`<g class="theory-line">`);
    b.line(area.x0, ys(theory), area.x1, ys(theory), THEORY);
    b.text(area.x1 - 4, ys(theory) - 6, `limit prediction ${theory.toPrecision(4)}`,
        `text-anchor="end" fill="#c03020" class="annotation"`);
    b.raw(`</g>`);

    b.raw(`<g class="series" data-n="${rows.length}">`);
    rows.forEach((_, i) => {
        const px = xs(eps[i]);
        if (Number.isFinite(los[i]) && Number.isFinite(his[i])) {
            b.line(px, ys(los[i]), px, ys(his[i]), WHISKER);
            b.line(px - 4, ys(los[i]), px + 4, ys(los[i]), WHISKER);
            b.line(px - 4, ys(his[i]), px + 4, ys(his[i]), WHISKER);
        }
        b.circle(px, ys(vals[i]), 3.5, POINT);
    });
    b.raw(`</g>`);
    return b.render();
}

/**
 * Inverse of the standard normal CDF (Acklam's rational approximation,
 * relative error below 1.15e-9).
 */
export function normalQuantile(p: number): number {
    if (p <= 0 || p >= 1) throw new Error("quantile needs p in (0, 1)");
    const a = [-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
        1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00];
    const b = [-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
        6.680131188771972e+01, -1.328068155288572e+01];
    const c = [-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
        -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00];
    const d = [7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
        3.754408661907416e+00];
    const plow = 0.02425;
    if (p < plow) {
        const q = Math.sqrt(-2 * Math.log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    if (p > 1 - plow) {
        return -normalQuantile(1 - p);
    }
    const q = p - 0.5;
    const r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
}

/**
 * Normal quantile-quantile plot of the standardized draws at the finest
 * smoothing radius present in the table, with the y = x reference line.
 */
export function plotQqNormal(draws: Table): string {
    if (draws.rows.length === 0) throw new Error("draws table has no rows");
    const epsAll = draws.rows.map(r => num(r, "eps"));
    const finest = Math.min(...epsAll);
    const z = draws.rows
        .filter(r => num(r, "eps") === finest)
        .map(r => num(r, "z"))
        .sort((a, b) => a - b);
    const n = z.length;
    const q = z.map((_, i) => normalQuantile((i + 0.5) / n));

    const area = plotArea();
    const lo = Math.min(q[0], z[0]);
    const hi = Math.max(q[n - 1], z[n - 1]);
    const xs = linearScale(pad(lo, hi), [area.x0, area.x1]);
    const ys = linearScale(pad(lo, hi), [area.y0, area.y1]);

    const b = new SvgBuilder(DEFAULT_FRAME);
    b.title(`Normal quantile plot (radius ${finest}, n = ${n})`);
    b.axes(xs, ys, "normal quantile", "sample quantile");
    b.raw(`<g class="reference-line">`);
    b.line(xs(lo), ys(lo), xs(hi), ys(hi), FIT);
    b.raw(`</g>`);
    b.raw(`<g class="series" data-n="${n}">`);
    for (let i = 0; i < n; i++) {
        b.circle(xs(q[i]), ys(z[i]), 2, POINT);
    }
    b.raw(`</g>`);
    return b.render();
}

/**
 * Weighted least squares line fit with weights 1/se^2; slopeSe is the
 * standard error implied by those weights.
 */
export function wlsLine(x: number[], y: number[], w: number[]): {
    slope: number;
    intercept: number;
    slopeSe: number;
} {
    let sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (let i = 0; i < x.length; i++) {
        sw += w[i];
        sx += w[i] * x[i];
        sy += w[i] * y[i];
        sxx += w[i] * x[i] * x[i];
        sxy += w[i] * x[i] * y[i];
    }
    const denom = sw * sxx - sx * sx;
    if (denom === 0) throw new Error("degenerate fit");
    const slope = (sw * sxy - sx * sy) / denom;
    return {
        slope,
        intercept: (sy - slope * sx) / sw,
        slopeSe: Math.sqrt(sw / denom),
    };
}

/**
 * Spatial covariance against lattice offset on log-log axes, one series
 * per observable, with the fitted power-law slope of the linear-observable
 * series annotated.
 */
export function plotCovDecay(table: Table): string {
    const usable = table.rows.filter(r => num(r, "cov") > 0);
    if (usable.length === 0) throw new Error("no positive covariances to plot");
    const tags = [...new Set(usable.map(r => r["f_tag"]))].sort();
    const xsAll = usable.map(r => num(r, "offset"));
    const ysAll = usable.map(r => num(r, "cov"));

    const area = plotArea();
    const xs = logScale(padLog(Math.min(...xsAll), Math.max(...xsAll)), [area.x0, area.x1]);
    const ys = logScale(padLog(Math.min(...ysAll), Math.max(...ysAll)), [area.y0, area.y1]);

    const b = new SvgBuilder(DEFAULT_FRAME);
    b.title("Spatial covariance decay");
    b.axes(xs, ys, "lattice offset", "covariance");

    const fitTag = tags.includes("identity") ? "identity" : tags[0];
    const fitRows = usable.filter(r => r["f_tag"] === fitTag);
    if (fitRows.length >= 2) {
        const lx = fitRows.map(r => Math.log(num(r, "offset")));
        const ly = fitRows.map(r => Math.log(num(r, "cov")));
        const w = fitRows.map(r => {
            const se = num(r, "cov_se");
            const rel = se > 0 ? se / num(r, "cov") : 1;
            return 1 / (rel * rel);
        });
        const { slope, intercept, slopeSe } = wlsLine(lx, ly, w);
        const o0 = Math.min(...fitRows.map(r => num(r, "offset")));
        const o1 = Math.max(...fitRows.map(r => num(r, "offset")));
        const f = (o: number) => Math.exp(intercept + slope * Math.log(o));
        b.raw(`<g class="fit-line">`);
        b.line(xs(o0), ys(f(o0)), xs(o1), ys(f(o1)), FIT);
        b.text(area.x1 - 4, area.y1 + 16,
            `fitted slope ${slope.toFixed(3)} ± ${slopeSe.toFixed(3)}`,
            `text-anchor="end" fill="#444444" class="annotation"`);
        b.raw(`</g>`);
    }
    const excluded = table.rows.length - usable.length;
    if (excluded > 0) {
        b.text(area.x0, DEFAULT_FRAME.height - 6,
            `${excluded} non-positive covariance row${excluded === 1 ? "" : "s"} excluded`,
            `fill="#888888" font-size="10" class="footnote"`);
    }

    tags.forEach((tag, k) => {
        const color = SERIES_COLORS[k % SERIES_COLORS.length];
        const rows = usable.filter(r => r["f_tag"] === tag);
        b.raw(`<g class="series" data-tag="${tag}" data-n="${rows.length}">`);
        for (const r of rows) {
            const px = xs(num(r, "offset"));
            const cov = num(r, "cov");
            const se = num(r, "cov_se");
            if (se > 0 && cov - se > 0) {
                b.line(px, ys(cov - se), px, ys(cov + se),
                    `stroke="${color}" stroke-width="1.2"`);
            }
            b.circle(px, ys(cov), 3, `fill="${color}" stroke="none"`);
        }
        b.raw(`</g>`);
        b.text(area.x0 + 8, area.y1 + 16 + 16 * k, tag,
            `fill="${color}" class="legend"`);
    });
    return b.render();
}
