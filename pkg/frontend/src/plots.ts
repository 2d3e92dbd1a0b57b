/**
 * Figure builders. Each takes parsed CSV text and returns a complete SVG
 * document string; callers handle file IO so nothing is written when
 * parsing fails.
 */

import { parseCsv, num } from "./csv.js";
import {
  HEIGHT, MARGIN, PALETTE, WIDTH, axes, esc, legend, linearScale, svgDocument,
} from "./svg.js";

const PLOT_X: [number, number] = [MARGIN.left, WIDTH - MARGIN.right];
const PLOT_Y: [number, number] = [HEIGHT - MARGIN.bottom, MARGIN.top];

function groupBy<T>(items: T[], key: (t: T) => string): Map<string, T[]> {
  const out = new Map<string, T[]>();
  for (const it of items) {
    const k = key(it);
    const arr = out.get(k);
    if (arr) arr.push(it);
    else out.set(k, [it]);
  }
  return out;
}

/** Mean rate vs a swept scenario parameter, one line per method. */
export function plotSweep(csvText: string): string {
  const table = parseCsv(csvText, "sweep");
  const param = table.rows[0].param;
  const values = table.rows.map((r) => num(r, "param_value"));
  const rates = table.rows.map((r) => num(r, "mean_R"));
  const x = linearScale([Math.min(...values), Math.max(...values)], PLOT_X);
  const y = linearScale([0, Math.max(...rates) * 1.1], PLOT_Y);
  const methods = groupBy(table.rows, (r) => r.method);
  let body = axes(x, y, param, "mean weighted sum rate", [...new Set(values)]);
  let i = 0;
  for (const [method, rows] of methods) {
    const color = PALETTE[i % PALETTE.length];
    const sorted = [...rows].sort(
      (a, b) => num(a, "param_value") - num(b, "param_value"),
    );
    const pts = sorted.map(
      (r) => `${x(num(r, "param_value"))},${y(num(r, "mean_R"))}`,
    );
    body += `\n<polyline points="${pts.join(" ")}" fill="none" stroke="${color}" stroke-width="2"/>`;
    for (const p of pts) {
      const [px, py] = p.split(",");
      body += `\n<circle cx="${px}" cy="${py}" r="3" fill="${color}"/>`;
    }
    i += 1;
  }
  body += "\n" + legend([...methods.keys()]);
  return svgDocument(body, `Rate vs ${param}`);
}

function quantile(sorted: number[], q: number): number {
  const pos = (sorted.length - 1) * q;
  const lo = Math.floor(pos);
  const hi = Math.ceil(pos);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo);
}

/** Distribution of per-scenario rates from a solve CSV, one violin per method. */
export function plotViolin(csvText: string): string {
  const table = parseCsv(csvText, "solve");
  const methods = groupBy(table.rows, (r) => r.method);
  const all = table.rows.map((r) => num(r, "weighted_R"));
  const y = linearScale([0, Math.max(...all) * 1.1], PLOT_Y);
  const names = [...methods.keys()];
  const x = linearScale([-0.5, names.length - 0.5], PLOT_X);
  let body = axes(x, y, "method", "weighted sum rate", []);
  names.forEach((name, i) => {
    const vals = methods
      .get(name)!
      .map((r) => num(r, "weighted_R"))
      .sort((a, b) => a - b);
    const color = PALETTE[i % PALETTE.length];
    const cx = x(i);
    // kernel density along the rate axis, mirrored for the violin body
    const lo = vals[0];
    const hi = vals[vals.length - 1];
    const bw = Math.max((hi - lo) / 8, 1e-6);
    const steps = 40;
    const left: string[] = [];
    const right: string[] = [];
    for (let s = 0; s <= steps; s++) {
      const v = lo - bw + ((hi - lo + 2 * bw) * s) / steps;
      let d = 0;
      for (const u of vals) {
        const t = (v - u) / bw;
        d += Math.exp(-0.5 * t * t);
      }
      d /= vals.length;
      const half = 30 * d;
      left.push(`${cx - half},${y(v)}`);
      right.push(`${cx + half},${y(v)}`);
    }
    body += `\n<polygon points="${left.join(" ")} ${right.reverse().join(" ")}" fill="${color}" fill-opacity="0.45" stroke="${color}"/>`;
    const med = quantile(vals, 0.5);
    body += `\n<line x1="${cx - 12}" y1="${y(med)}" x2="${cx + 12}" y2="${y(med)}" stroke="black" stroke-width="2"/>`;
    body += `\n<text x="${cx}" y="${HEIGHT - MARGIN.bottom + 20}" text-anchor="middle">${esc(name)}</text>`;
  });
  return svgDocument(body, "Distribution of achieved rate");
}

/** Mean rate and loss per epoch from a training CSV, stage switch marked. */
export function plotTraining(csvText: string): string {
  const table = parseCsv(csvText, "training");
  const epochs = table.rows.map((r) => num(r, "epoch"));
  const rates = table.rows.map((r) => num(r, "mean_R"));
  const x = linearScale([Math.min(...epochs), Math.max(...epochs)], PLOT_X);
  const y = linearScale(
    [Math.min(...rates, 0), Math.max(...rates) * 1.1],
    PLOT_Y,
  );
  let body = axes(x, y, "epoch", "mean achieved rate");
  const pts = table.rows.map((r) => `${x(num(r, "epoch"))},${y(num(r, "mean_R"))}`);
  body += `\n<polyline points="${pts.join(" ")}" fill="none" stroke="${PALETTE[0]}" stroke-width="2"/>`;
  const switchRow = table.rows.find((r) => r.stage === "2");
  if (switchRow) {
    const px = x(num(switchRow, "epoch"));
    body += `\n<line x1="${px}" y1="${PLOT_Y[0]}" x2="${px}" y2="${PLOT_Y[1]}" stroke="gray" stroke-dasharray="4 3"/>`;
    body += `\n<text x="${px + 4}" y="${PLOT_Y[1] + 12}" fill="gray">stage 2</text>`;
  }
  return svgDocument(body, "Training progress");
}

/** K x K received-power matrix as a colored grid, one panel per method. */
export function plotHeatmap(csvText: string): string {
  const table = parseCsv(csvText, "heatmap");
  const methods = groupBy(table.rows, (r) => r.method);
  const firstRows = [...methods.values()][0];
  const K = firstRows.length;
  const powerCols = table.columns.filter((c) => c.startsWith("pw_"));
  const logs = table.rows.flatMap((r) =>
    powerCols.map((c) => Math.log10(Math.max(num(r, c), 1e-30))),
  );
  const lo = Math.min(...logs);
  const hi = Math.max(...logs);
  const panels = [...methods.entries()];
  const panelW = (WIDTH - MARGIN.left - MARGIN.right) / panels.length;
  const cell = Math.min(
    (panelW - 30) / K,
    (HEIGHT - MARGIN.top - MARGIN.bottom - 30) / K,
  );
  let body = "";
  panels.forEach(([name, rows], p) => {
    const ox = MARGIN.left + p * panelW;
    const oy = MARGIN.top + 20;
    rows.forEach((row) => {
      const k = Number(row.cluster);
      powerCols.forEach((c, l) => {
        const v = Math.log10(Math.max(num(row, c), 1e-30));
        const frac = hi > lo ? (v - lo) / (hi - lo) : 0.5;
        const red = Math.round(255 * frac);
        const blue = Math.round(255 * (1 - frac));
        body += `\n<rect x="${ox + l * cell}" y="${oy + k * cell}" width="${cell}" height="${cell}" fill="rgb(${red},60,${blue})" stroke="white"/>`;
      });
    });
    body += `\n<text x="${ox + (K * cell) / 2}" y="${oy - 6}" text-anchor="middle">${esc(name)}</text>`;
    body += `\n<text x="${ox + (K * cell) / 2}" y="${oy + K * cell + 16}" text-anchor="middle">source cluster</text>`;
    body += `\n<text x="${ox - 8}" y="${oy + (K * cell) / 2}" text-anchor="middle" transform="rotate(-90 ${ox - 8} ${oy + (K * cell) / 2})">fusion center</text>`;
  });
  return svgDocument(body, "Received power: signal (diag) vs interference");
}

export const PLOTS: Record<string, (csv: string) => string> = {
  sweep: plotSweep,
  violin: plotViolin,
  training: plotTraining,
  heatmap: plotHeatmap,
};
