/**
 * The four figure kinds: penalty sweeps, convergence plots with fitted
 * slopes, control atoms (points for space-time Diracs, shaded cells for
 * interval densities) and space-time field heatmaps.
 */

import { CsvTable, column, metaNumber, numericColumn } from "./csv.js";
import { COLORS, Figure, Scale, divergingColor, linearScale, logScale } from "./svg.js";

export interface RenderOptions {
    field?: string;
    metric?: string;
    xLog?: boolean;
    title?: string;
}

export function leastSquaresSlope(x: number[], y: number[]): number {
    const n = x.length;
    const lx = x.map(Math.log);
    const ly = y.map(Math.log);
    const mx = lx.reduce((a, b) => a + b, 0) / n;
    const my = ly.reduce((a, b) => a + b, 0) / n;
    let num = 0;
    let den = 0;
    for (let i = 0; i < n; i++) {
        num += (lx[i] - mx) * (ly[i] - my);
        den += (lx[i] - mx) ** 2;
    }
    if (den === 0) throw new Error("cannot fit a slope to a single abscissa");
    return num / den;
}

function schemes(table: CsvTable, schemeCol: string): string[] {
    const seen: string[] = [];
    for (const s of column(table, schemeCol)) {
        if (!seen.includes(s)) seen.push(s);
    }
    return seen;
}

function pad(lo: number, hi: number, frac = 0.06): [number, number] {
    const d = (hi - lo || Math.abs(hi) || 1) * frac;
    return [lo - d, hi + d];
}

export function renderSweep(table: CsvTable, opts: RenderOptions): string {
    const field = opts.field ?? "measure_norm";
    const alphas = numericColumn(table, "alpha");
    const values = numericColumn(table, field);
    const schemeCol = column(table, "scheme");
    const fig = new Figure();
    const { x0, x1, y0, y1 } = fig.plotArea;
    const xs = opts.xLog
        ? logScale([Math.min(...alphas), Math.max(...alphas)], [x0, x1])
        : linearScale(pad(Math.min(...alphas), Math.max(...alphas)), [x0, x1]);
    const ys = linearScale(pad(Math.min(...values, 0), Math.max(...values)), [y0, y1]);
    fig.title(opts.title ?? `${field} against the penalty`);
    fig.axes(xs, ys, "alpha", field);
    const legend: Array<{ label: string; color: string }> = [];
    schemes(table, "scheme").forEach((scheme, i) => {
        const color = COLORS[i % COLORS.length];
        const px: number[] = [];
        const py: number[] = [];
        alphas.forEach((a, j) => {
            if (schemeCol[j] === scheme) {
                px.push(xs(a));
                py.push(ys(values[j]));
            }
        });
        fig.polyline(px, py, color);
        px.forEach((x, j) => fig.circle(x, py[j], 2.4, color));
        legend.push({ label: scheme, color });
    });
    fig.legend(legend);
    return fig.render();
}

export function renderConvergence(table: CsvTable, opts: RenderOptions): string {
    const metric = opts.metric ?? "u_norm_error";
    const kindCol = column(table, "kind");
    const keep = kindCol.map((k) => k === "level");
    const filter = (vals: string[]) => vals.filter((_, i) => keep[i]);
    const hs = filter(column(table, "h")).map(Number);
    const errs = filter(column(table, metric)).map(Number);
    if (hs.some((v) => !Number.isFinite(v)) || errs.some((v) => !Number.isFinite(v))) {
        throw new Error("convergence table has unsolved levels");
    }
    const schemeCol = filter(column(table, "scheme"));

    const fig = new Figure();
    const { x0, x1, y0, y1 } = fig.plotArea;
    const positive = errs.filter((e) => e > 0);
    const xs = logScale([Math.min(...hs) / 1.3, Math.max(...hs) * 1.3], [x0, x1]);
    const ys = logScale(
        [Math.min(...positive) / 1.5, Math.max(...positive) * 1.5],
        [y0, y1]
    );
    fig.title(opts.title ?? `${metric} against the grid size`);
    fig.axes(xs, ys, "h", metric);
    const legend: Array<{ label: string; color: string }> = [];
    const uniq = [...new Set(schemeCol)];
    uniq.forEach((scheme, i) => {
        const color = COLORS[i % COLORS.length];
        const hsub: number[] = [];
        const esub: number[] = [];
        hs.forEach((h, j) => {
            if (schemeCol[j] === scheme && errs[j] > 0) {
                hsub.push(h);
                esub.push(errs[j]);
            }
        });
        const order = hsub.map((_, j) => j).sort((a, b) => hsub[a] - hsub[b]);
        const px = order.map((j) => xs(hsub[j]));
        const py = order.map((j) => ys(esub[j]));
        fig.polyline(px, py, color);
        px.forEach((x, j) => fig.circle(x, py[j], 2.6, color));
        const slope = leastSquaresSlope(hsub, esub);
        legend.push({ label: `${scheme} (slope ${slope.toFixed(2)})`, color });
    });
    fig.legend(legend);
    return fig.render();
}

function fieldExtent(table: CsvTable): { a: number; b: number; T: number } {
    return {
        a: metaNumber(table, "a") ?? 0,
        b: metaNumber(table, "b") ?? 1,
        T: metaNumber(table, "T") ?? 1,
    };
}

export function renderControl(tables: CsvTable[], opts: RenderOptions): string {
    const { a, b, T } = fieldExtent(tables[0]);
    const fig = new Figure();
    const { x0, x1, y0, y1 } = fig.plotArea;
    const xs = linearScale([a, b], [x0, x1]);
    const ys = linearScale([0, T], [y0, y1]);
    fig.title(opts.title ?? "control atoms");
    const legend: Array<{ label: string; color: string }> = [];
    let maxAbs = 0;
    for (const t of tables) {
        for (const c of numericColumn(t, "coefficient")) maxAbs = Math.max(maxAbs, Math.abs(c));
    }
    tables.forEach((table, ti) => {
        const px = numericColumn(table, "x");
        const pt = numericColumn(table, "t");
        const pc = numericColumn(table, "coefficient");
        const schemeCol = column(table, "scheme");
        const tau = metaNumber(table, "tau") ?? 0;
        const h = metaNumber(table, "h") ?? (b - a) / 8;
        const isDg = schemeCol.some((s) => s.startsWith("dg"));
        const color = COLORS[ti % COLORS.length];
        if (isDg) {
            // densities shade the full space-time cell they cover
            pc.forEach((c, i) => {
                const w = Math.abs(xs(px[i] + h / 2) - xs(px[i] - h / 2));
                const hgt = Math.abs(ys(pt[i] - tau) - ys(pt[i]));
                fig.rect(
                    xs(px[i] - h / 2),
                    ys(pt[i]),
                    w,
                    hgt,
                    divergingColor(c, maxAbs),
                    "#999"
                );
            });
            legend.push({ label: `${schemeCol[0]} cells (density)`, color: "#999" });
        } else {
            pc.forEach((c, i) => {
                const r = 3 + 9 * Math.sqrt(Math.abs(c) / (maxAbs || 1));
                fig.circle(xs(px[i]), ys(pt[i]), r, c >= 0 ? "#ca2020" : "#053061", 0.85);
            });
            legend.push({ label: `${schemeCol[0]} atoms (weight)`, color: "#ca2020" });
        }
    });
    fig.axes(xs, ys, "x", "t");
    fig.legend(legend);
    return fig.render();
}

export function renderField(table: CsvTable, opts: RenderOptions): string {
    const { a, b, T } = fieldExtent(table);
    const px = numericColumn(table, "x");
    const pt = numericColumn(table, "t");
    const pv = numericColumn(table, "value");
    const h = metaNumber(table, "h") ?? (b - a) / 8;
    const tau = metaNumber(table, "tau") ?? T / 8;
    const fig = new Figure();
    const { x0, x1, y0, y1 } = fig.plotArea;
    const xs = linearScale([a, b], [x0, x1]);
    const ys = linearScale([0, T], [y0, y1]);
    const vmax = Math.max(...pv.map(Math.abs));
    fig.title(opts.title ?? table.meta["name"] ?? "field");
    pv.forEach((v, i) => {
        const w = Math.abs(xs(px[i] + h / 2) - xs(px[i] - h / 2));
        const hgt = Math.abs(ys(pt[i] - tau / 2) - ys(pt[i] + tau / 2));
        fig.rect(xs(px[i] - h / 2), ys(pt[i] + tau / 2), w, hgt, divergingColor(v, vmax));
    });
    fig.axes(xs, ys, "x", "t");
    fig.add(
        `<text x="${x1 - 6}" y="${y1 - 6}" text-anchor="end" font-size="11">` +
            `max |value| = ${vmax.toPrecision(4)}</text>`
    );
    return fig.render();
}
