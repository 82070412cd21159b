/**
 * Deterministic SVG assembly: fixed 4-decimal coordinate formatting, no
 * timestamps, no randomness, so re-rendering the same tables is
 * byte-identical.
 */

export function fmt(x: number): string {
    if (!Number.isFinite(x)) return "0";
    const s = x.toFixed(4);
    return s === "-0.0000" ? "0.0000" : s;
}

export interface Scale {
    (value: number): number;
    domain: [number, number];
    range: [number, number];
    log: boolean;
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
    const [d0, d1] = domain;
    const [r0, r1] = range;
    const span = d1 - d0 || 1;
    const f = ((v: number) => r0 + ((v - d0) / span) * (r1 - r0)) as Scale;
    f.domain = domain;
    f.range = range;
    f.log = false;
    return f;
}

export function logScale(domain: [number, number], range: [number, number]): Scale {
    const [d0, d1] = domain;
    if (d0 <= 0 || d1 <= 0) {
        throw new Error("log scale needs a positive domain");
    }
    const l0 = Math.log10(d0);
    const span = Math.log10(d1) - l0 || 1;
    const [r0, r1] = range;
    const f = ((v: number) => r0 + ((Math.log10(v) - l0) / span) * (r1 - r0)) as Scale;
    f.domain = domain;
    f.range = range;
    f.log = true;
    return f;
}

/** Round-numbered tick positions covering the domain. */
export function ticks(scale: Scale, count = 5): number[] {
    const [d0, d1] = scale.domain;
    if (scale.log) {
        const out: number[] = [];
        const lo = Math.ceil(Math.log10(d0) - 1e-9);
        const hi = Math.floor(Math.log10(d1) + 1e-9);
        for (let e = lo; e <= hi; e++) out.push(Math.pow(10, e));
        if (out.length >= 2) return out;
        return [d0, Math.sqrt(d0 * d1), d1];
    }
    const span = d1 - d0 || 1;
    const step = Math.pow(10, Math.floor(Math.log10(span / count)));
    const err = span / count / step;
    const mult = err >= 7.5 ? 10 : err >= 3.5 ? 5 : err >= 1.5 ? 2 : 1;
    const s = step * mult;
    const out: number[] = [];
    for (let v = Math.ceil(d0 / s) * s; v <= d1 + 1e-9 * span; v += s) {
        out.push(Math.abs(v) < 1e-12 * span ? 0 : v);
    }
    return out;
}

export function tickLabel(v: number): string {
    if (v === 0) return "0";
    const a = Math.abs(v);
    if (a >= 1e4 || a < 1e-3) return v.toExponential(0).replace("e+", "e");
    return String(Number(v.toPrecision(6)));
}

export interface Frame {
    width: number;
    height: number;
    margin: { top: number; right: number; bottom: number; left: number };
}

export const DEFAULT_FRAME: Frame = {
    width: 640,
    height: 440,
    margin: { top: 40, right: 24, bottom: 52, left: 72 },
};

export class SvgBuilder {
    private parts: string[] = [];
    constructor(readonly frame: Frame) {
        this.parts.push(
            `<svg xmlns="http://www.w3.org/2000/svg" width="${frame.width}" ` +
            `height="${frame.height}" viewBox="0 0 ${frame.width} ${frame.height}" ` +
            `font-family="Helvetica, Arial, sans-serif" font-size="12">`
        );
        this.parts.push(
            `<rect width="${frame.width}" height="${frame.height}" fill="white"/>`
        );
    }

    raw(s: string): void {
        this.parts.push(s);
    }

    line(x1: number, y1: number, x2: number, y2: number, attrs: string): void {
        this.parts.push(
            `<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" ${attrs}/>`
        );
    }

    circle(cx: number, cy: number, r: number, attrs: string): void {
        this.parts.push(
            `<circle cx="${fmt(cx)}" cy="${fmt(cy)}" r="${fmt(r)}" ${attrs}/>`
        );
    }

    path(d: string, attrs: string): void {
        this.parts.push(`<path d="${d}" ${attrs}/>`);
    }

    text(x: number, y: number, content: string, attrs: string): void {
        this.parts.push(
            `<text x="${fmt(x)}" y="${fmt(y)}" ${attrs}>${escapeXml(content)}</text>`
        );
    }

    /** Axis lines, tick marks, tick labels, and axis titles. */
    axes(xs: Scale, ys: Scale, xTitle: string, yTitle: string): void {
        const { width, height, margin } = this.frame;
        const x0 = margin.left;
        const x1 = width - margin.right;
        const y0 = height - margin.bottom;
        const y1 = margin.top;
        const ax = `stroke="black" stroke-width="1"`;
        this.raw(`<g class="axis x-axis">`);
        this.line(x0, y0, x1, y0, ax);
        for (const t of ticks(xs)) {
            const px = xs(t);
            this.line(px, y0, px, y0 + 5, ax);
            this.text(px, y0 + 18, tickLabel(t), `text-anchor="middle"`);
        }
        this.text((x0 + x1) / 2, y0 + 38, xTitle, `text-anchor="middle" class="x-title"`);
        this.raw(`</g>`);
        this.raw(`<g class="axis y-axis">`);
        this.line(x0, y0, x0, y1, ax);
        for (const t of ticks(ys)) {
            const py = ys(t);
            this.line(x0 - 5, py, x0, py, ax);
            this.text(x0 - 8, py + 4, tickLabel(t), `text-anchor="end"`);
        }
        this.text(
            16, (y0 + y1) / 2, yTitle,
            `text-anchor="middle" class="y-title" transform="rotate(-90 16 ${fmt((y0 + y1) / 2)})"`
        );
        this.raw(`</g>`);
    }

    title(content: string): void {
        this.text(this.frame.width / 2, 22, content, `text-anchor="middle" font-size="14" class="title"`);
    }

    render(): string {
        return this.parts.join("\n") + "\n</svg>\n";
    }
}

function escapeXml(s: string): string {
    return s
        .replace(/&/g, "&amp;")
        .replace(/</g, "&lt;")
        .replace(/>/g, "&gt;")
        .replace(/"/g, "&quot;");
}
