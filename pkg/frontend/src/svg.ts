/**
 * Small SVG scene builder: linear/log scales with sensible ticks, axes,
 * polylines, rects and markers. Output is a plain standalone SVG string.
 */

export interface Scale {
    (v: number): number;
    ticks(): number[];
    domain: [number, number];
    log: boolean;
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
    const [d0, d1] = domain;
    const [r0, r1] = range;
    const span = d1 - d0 || 1;
    const f = ((v: number) => r0 + ((v - d0) / span) * (r1 - r0)) as Scale;
    f.domain = domain;
    f.log = false;
    f.ticks = () => niceTicks(d0, d1, 6);
    return f;
}

export function logScale(domain: [number, number], range: [number, number]): Scale {
    const d0 = Math.log10(domain[0]);
    const d1 = Math.log10(domain[1]);
    const [r0, r1] = range;
    const span = d1 - d0 || 1;
    const f = ((v: number) => r0 + ((Math.log10(v) - d0) / span) * (r1 - r0)) as Scale;
    f.domain = domain;
    f.log = true;
    f.ticks = () => {
        const ticks: number[] = [];
        for (let e = Math.ceil(d0); e <= Math.floor(d1); e++) {
            ticks.push(10 ** e);
        }
        if (ticks.length < 2) {
            ticks.length = 0;
            for (const t of niceTicks(d0, d1, 5)) ticks.push(10 ** t);
        }
        return ticks;
    };
    return f;
}

function niceTicks(lo: number, hi: number, n: number): number[] {
    if (!(hi > lo)) return [lo];
    const raw = (hi - lo) / n;
    const mag = 10 ** Math.floor(Math.log10(raw));
    const norm = raw / mag;
    const step = (norm >= 5 ? 10 : norm >= 2 ? 5 : norm >= 1 ? 2 : 1) * mag;
    const ticks: number[] = [];
    for (let v = Math.ceil(lo / step) * step; v <= hi + 1e-12 * step; v += step) {
        ticks.push(Math.abs(v) < 1e-12 * step ? 0 : v);
    }
    return ticks;
}

export function fmtTick(v: number, log: boolean): string {
    if (log) {
        const e = Math.log10(v);
        if (Number.isInteger(e)) return `1e${e}`;
        return Number(v.toPrecision(3)).toString();
    }
    if (v === 0) return "0";
    const a = Math.abs(v);
    if (a >= 1e4 || a < 1e-3) return v.toExponential(1);
    return String(Math.round(v * 1e6) / 1e6);
}

export const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

export class Figure {
    width: number;
    height: number;
    margin = { left: 64, right: 20, top: 34, bottom: 46 };
    private parts: string[] = [];

    constructor(width = 720, height = 480) {
        this.width = width;
        this.height = height;
    }

    get plotArea(): { x0: number; x1: number; y0: number; y1: number } {
        return {
            x0: this.margin.left,
            x1: this.width - this.margin.right,
            y0: this.height - this.margin.bottom,
            y1: this.margin.top,
        };
    }

    add(fragment: string): void {
        this.parts.push(fragment);
    }

    title(text: string): void {
        this.add(
            `<text x="${this.width / 2}" y="20" text-anchor="middle" font-size="15" ` +
                `font-weight="bold">${escapeXml(text)}</text>`
        );
    }

    axes(xs: Scale, ys: Scale, xLabel: string, yLabel: string): void {
        const { x0, x1, y0, y1 } = this.plotArea;
        this.add(`<rect x="${x0}" y="${y1}" width="${x1 - x0}" height="${y0 - y1}" fill="none" stroke="#333"/>`);
        for (const t of xs.ticks()) {
            const px = xs(t);
            if (px < x0 - 0.5 || px > x1 + 0.5) continue;
            this.add(`<line x1="${px}" y1="${y0}" x2="${px}" y2="${y0 + 5}" stroke="#333"/>`);
            this.add(
                `<text x="${px}" y="${y0 + 18}" text-anchor="middle" font-size="11">${fmtTick(t, xs.log)}</text>`
            );
        }
        for (const t of ys.ticks()) {
            const py = ys(t);
            if (py > y0 + 0.5 || py < y1 - 0.5) continue;
            this.add(`<line x1="${x0 - 5}" y1="${py}" x2="${x0}" y2="${py}" stroke="#333"/>`);
            this.add(
                `<text x="${x0 - 8}" y="${py + 4}" text-anchor="end" font-size="11">${fmtTick(t, ys.log)}</text>`
            );
        }
        this.add(
            `<text x="${(x0 + x1) / 2}" y="${this.height - 8}" text-anchor="middle" font-size="13">${escapeXml(xLabel)}</text>`
        );
        this.add(
            `<text x="16" y="${(y0 + y1) / 2}" text-anchor="middle" font-size="13" ` +
                `transform="rotate(-90 16 ${(y0 + y1) / 2})">${escapeXml(yLabel)}</text>`
        );
    }

    polyline(xs: number[], ys: number[], color: string): void {
        const pts = xs.map((x, i) => `${round2(x)},${round2(ys[i])}`).join(" ");
        this.add(`<polyline points="${pts}" fill="none" stroke="${color}" stroke-width="1.8"/>`);
    }

    circle(x: number, y: number, r: number, color: string, opacity = 1.0): void {
        this.add(
            `<circle cx="${round2(x)}" cy="${round2(y)}" r="${round2(r)}" fill="${color}" fill-opacity="${opacity}"/>`
        );
    }

    rect(x: number, y: number, w: number, h: number, color: string, stroke = "none"): void {
        this.add(
            `<rect x="${round2(x)}" y="${round2(y)}" width="${round2(w)}" height="${round2(h)}" ` +
                `fill="${color}" stroke="${stroke}"/>`
        );
    }

    legend(entries: Array<{ label: string; color: string }>): void {
        const { x1, y1 } = this.plotArea;
        entries.forEach((e, i) => {
            const y = y1 + 14 + 18 * i;
            this.add(`<line x1="${x1 - 170}" y1="${y}" x2="${x1 - 146}" y2="${y}" stroke="${e.color}" stroke-width="2.4"/>`);
            this.add(`<text x="${x1 - 140}" y="${y + 4}" font-size="12">${escapeXml(e.label)}</text>`);
        });
    }

    render(): string {
        return (
            `<svg xmlns="http://www.w3.org/2000/svg" width="${this.width}" height="${this.height}" ` +
            `viewBox="0 0 ${this.width} ${this.height}" font-family="sans-serif">\n` +
            `<rect width="${this.width}" height="${this.height}" fill="white"/>\n` +
            this.parts.join("\n") +
            `\n</svg>\n`
        );
    }
}

export function divergingColor(v: number, vmax: number): string {
    // blue (negative) .. white .. red (positive)
    const t = vmax > 0 ? Math.max(-1, Math.min(1, v / vmax)) : 0;
    const ramp = (a: number, b: number, s: number) => Math.round(a + (b - a) * s);
    if (t >= 0) {
        return `rgb(${ramp(255, 202, t)},${ramp(255, 0, t)},${ramp(255, 32, t)})`;
    }
    return `rgb(${ramp(255, 5, -t)},${ramp(255, 48, -t)},${ramp(255, 97, -t)})`;
}

function escapeXml(s: string): string {
    return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function round2(v: number): number {
    return Math.round(v * 100) / 100;
}
