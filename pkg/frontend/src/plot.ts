/**
 * Semilog SER-versus-SNR figure as an SVG string.
 *
 * Rendering is a pure function of the parsed CSV rows and the plot options:
 * fixed style, fixed palette, no timestamps, so identical inputs give
 * byte-identical output. SER values of zero cannot sit on a log axis; they
 * are clamped to the y-axis floor and drawn as hollow markers.
 */

import { readFileSync, writeFileSync } from "fs";
import { SerRow, mergeRows, parseSerCsv } from "./csv.js";

export interface PlotSpec {
  csvPaths: string[];
  /** receiver id -> legend label; receivers absent from every CSV are an error */
  labels?: Record<string, string>;
  outPath: string;
  /** log-axis floor for zero/tiny SER values */
  floor?: number;
  title?: string;
}

const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd",
  "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"];

const WIDTH = 720;
const HEIGHT = 480;
const MARGIN = { left: 72, right: 24, top: 40, bottom: 56 };

function fmt(v: number): string {
  // fixed short representation keeps the output deterministic
  return Number(v.toPrecision(6)).toString();
}

interface Scaled {
  x: (snr: number) => number;
  y: (ser: number) => number;
  xTicks: number[];
  yDecades: number[];
}

function makeScales(rows: SerRow[], floor: number): Scaled {
  const snrs = rows.map((r) => r.snrDb);
  let lo = Math.min(...snrs);
  let hi = Math.max(...snrs);
  if (lo === hi) {
    lo -= 1;
    hi += 1;
  }
  const sers = rows.map((r) => Math.max(r.ser + 2 * r.stderr, floor));
  const top = Math.max(...sers, floor * 10);
  const yMaxExp = Math.ceil(Math.log10(top));
  const yMinExp = Math.floor(Math.log10(floor));
  const innerW = WIDTH - MARGIN.left - MARGIN.right;
  const innerH = HEIGHT - MARGIN.top - MARGIN.bottom;
  const x = (snr: number) => MARGIN.left + ((snr - lo) / (hi - lo)) * innerW;
  const y = (ser: number) => {
    const e = Math.log10(Math.max(ser, floor));
    return MARGIN.top + ((yMaxExp - e) / (yMaxExp - yMinExp)) * innerH;
  };
  const xTicks: number[] = [];
  const span = hi - lo;
  const step = span <= 10 ? 1 : span <= 25 ? 5 : 10;
  for (let t = Math.ceil(lo / step) * step; t <= hi + 1e-9; t += step) {
    xTicks.push(t);
  }
  const yDecades: number[] = [];
  for (let e = yMinExp; e <= yMaxExp; e++) {
    yDecades.push(e);
  }
  return { x, y, xTicks, yDecades };
}

export function renderSerSvg(tables: SerRow[][], spec: Omit<PlotSpec, "csvPaths" | "outPath">): string {
  const floor = spec.floor ?? 1e-5;
  if (!(floor > 0)) {
    throw new Error(`floor must be positive, got ${floor}`);
  }
  const byReceiver = mergeRows(tables);
  const labels = spec.labels ?? {};
  for (const name of Object.keys(labels)) {
    if (!byReceiver.has(name)) {
      throw new Error(`label references receiver '${name}' absent from every CSV`);
    }
  }
  const allRows = [...byReceiver.values()].flat();
  const { x, y, xTicks, yDecades } = makeScales(allRows, floor);

  const parts: string[] = [];
  parts.push(`<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" ` +
    `height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}" ` +
    `font-family="Helvetica, Arial, sans-serif" font-size="12">`);
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);
  if (spec.title) {
    parts.push(`<text x="${WIDTH / 2}" y="22" text-anchor="middle" ` +
      `font-size="15">${escapeXml(spec.title)}</text>`);
  }

  const plotBottom = HEIGHT - MARGIN.bottom;
  // gridlines and axes
  for (const e of yDecades) {
    const yy = y(10 ** e);
    parts.push(`<line x1="${MARGIN.left}" y1="${fmt(yy)}" ` +
      `x2="${WIDTH - MARGIN.right}" y2="${fmt(yy)}" stroke="#dddddd"/>`);
    parts.push(`<text x="${MARGIN.left - 8}" y="${fmt(yy + 4)}" ` +
      `text-anchor="end">1e${e}</text>`);
  }
  for (const t of xTicks) {
    const xx = x(t);
    parts.push(`<line x1="${fmt(xx)}" y1="${MARGIN.top}" x2="${fmt(xx)}" ` +
      `y2="${plotBottom}" stroke="#eeeeee"/>`);
    parts.push(`<text x="${fmt(xx)}" y="${plotBottom + 18}" ` +
      `text-anchor="middle">${t}</text>`);
  }
  parts.push(`<rect x="${MARGIN.left}" y="${MARGIN.top}" ` +
    `width="${WIDTH - MARGIN.left - MARGIN.right}" ` +
    `height="${plotBottom - MARGIN.top}" fill="none" stroke="#333333"/>`);
  parts.push(`<text x="${(MARGIN.left + WIDTH - MARGIN.right) / 2}" ` +
    `y="${HEIGHT - 16}" text-anchor="middle">SNR (dB)</text>`);
  parts.push(`<text x="20" y="${(MARGIN.top + plotBottom) / 2}" ` +
    `text-anchor="middle" transform="rotate(-90 20 ` +
    `${(MARGIN.top + plotBottom) / 2})">SER</text>`);

  // one curve per receiver, first-appearance order
  let c = 0;
  const legend: string[] = [];
  for (const [name, rows] of byReceiver) {
    const color = PALETTE[c % PALETTE.length];
    c += 1;
    const pts = rows.map((r) => {
      const clamped = r.ser < floor;
      return { xx: x(r.snrDb), yy: y(r.ser), clamped, row: r };
    });
    parts.push(`<polyline fill="none" stroke="${color}" stroke-width="1.5" ` +
      `points="${pts.map((p) => `${fmt(p.xx)},${fmt(p.yy)}`).join(" ")}"/>`);
    for (const p of pts) {
      const lowSer = Math.max(p.row.ser - 2 * p.row.stderr, floor);
      const hiSer = Math.max(p.row.ser + 2 * p.row.stderr, floor);
      const yLo = y(lowSer);
      const yHi = y(hiSer);
      parts.push(`<line x1="${fmt(p.xx)}" y1="${fmt(yLo)}" x2="${fmt(p.xx)}" ` +
        `y2="${fmt(yHi)}" stroke="${color}"/>`);
      parts.push(`<line x1="${fmt(p.xx - 3)}" y1="${fmt(yLo)}" ` +
        `x2="${fmt(p.xx + 3)}" y2="${fmt(yLo)}" stroke="${color}"/>`);
      parts.push(`<line x1="${fmt(p.xx - 3)}" y1="${fmt(yHi)}" ` +
        `x2="${fmt(p.xx + 3)}" y2="${fmt(yHi)}" stroke="${color}"/>`);
      // hollow marker flags a value clamped to the floor
      const fill = p.clamped ? "white" : color;
      parts.push(`<circle cx="${fmt(p.xx)}" cy="${fmt(p.yy)}" r="4" ` +
        `fill="${fill}" stroke="${color}" stroke-width="1.5"/>`);
    }
    legend.push(escapeXml(labels[name] ?? name));
  }

  // legend box
  const names = [...byReceiver.keys()];
  names.forEach((name, i) => {
    const color = PALETTE[i % PALETTE.length];
    const ly = MARGIN.top + 14 + i * 18;
    const lx = WIDTH - MARGIN.right - 150;
    parts.push(`<line x1="${lx}" y1="${ly - 4}" x2="${lx + 22}" ` +
      `y2="${ly - 4}" stroke="${color}" stroke-width="1.5"/>`);
    parts.push(`<circle cx="${lx + 11}" cy="${ly - 4}" r="3.5" fill="${color}"/>`);
    parts.push(`<text x="${lx + 28}" y="${ly}">${legend[i]}</text>`);
  });

  parts.push("</svg>");
  return parts.join("\n") + "\n";
}

function escapeXml(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Read the CSVs in spec, render, and write the figure chosen by extension. */
export function plotSer(spec: PlotSpec): string {
  if (spec.csvPaths.length === 0) {
    throw new Error("no input CSVs given");
  }
  const tables = spec.csvPaths.map((p) =>
    parseSerCsv(readFileSync(p, "utf-8"), p));
  const svg = renderSerSvg(tables, spec);
  if (!spec.outPath.endsWith(".svg")) {
    throw new Error(
      `unsupported output extension for '${spec.outPath}': emit .svg`);
  }
  writeFileSync(spec.outPath, svg, "utf-8");
  return spec.outPath;
}
