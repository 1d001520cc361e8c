/**
 * Deterministic SVG figure builder: multi-panel charts with linear or log
 * axes, step/line/point series, confidence bars, and floor markers.  No
 * timestamps, random ids, or environment-dependent output: identical
 * inputs yield byte-identical SVG.
 */

export type SeriesKind = "line" | "step" | "points";

export interface Series {
  name: string;
  kind: SeriesKind;
  points: Array<[number, number]>;
  color: string;
  /** vertical error bars: [low, high] per point */
  bars?: Array<[number, number]>;
  /** marks points that are floored stand-ins (e.g. zero tail estimates) */
  floored?: boolean[];
  dash?: string;
}

export interface Panel {
  title: string;
  xLabel: string;
  yLabel: string;
  series: Series[];
  yLog?: boolean;
  xLog?: boolean;
}

const PANEL_W = 320;
const PANEL_H = 260;
const MARGIN = { left: 52, right: 14, top: 28, bottom: 42 };

export function fmt(v: number): string {
  if (!Number.isFinite(v)) return "0";
  if (v === 0) return "0";
  const text = v.toPrecision(6);
  return text.includes(".") || text.includes("e")
    ? text.replace(/\.?0+($|e)/, "$1")
    : text;
}

function niceTicks(lo: number, hi: number, count = 5): number[] {
  if (!(hi > lo)) return [lo];
  const span = hi - lo;
  const step = Math.pow(10, Math.floor(Math.log10(span / count)));
  const err = (count * step) / span;
  const mult = err <= 0.15 ? 10 : err <= 0.35 ? 5 : err <= 0.75 ? 2 : 1;
  const inc = step * mult;
  const ticks: number[] = [];
  for (let v = Math.ceil(lo / inc) * inc; v <= hi + inc * 1e-9; v += inc) {
    ticks.push(Math.abs(v) < inc * 1e-9 ? 0 : v);
  }
  return ticks;
}

function logTicks(lo: number, hi: number): number[] {
  const ticks: number[] = [];
  for (let e = Math.ceil(Math.log10(lo) - 1e-9);
       e <= Math.floor(Math.log10(hi) + 1e-9); e++) {
    ticks.push(Math.pow(10, e));
  }
  return ticks.length ? ticks : [lo];
}

interface Scale {
  (v: number): number;
  ticks: number[];
}

function makeScale(values: number[], pixelLo: number, pixelHi: number,
                   log: boolean): Scale {
  let lo = Math.min(...values);
  let hi = Math.max(...values);
  if (log) {
    lo = Math.max(lo, 1e-300);
    hi = Math.max(hi, lo * 10);
    const llo = Math.log10(lo);
    const lhi = Math.log10(hi);
    const pad = (lhi - llo || 1) * 0.05;
    const scale = ((v: number) =>
      pixelLo + ((Math.log10(Math.max(v, 1e-300)) - (llo - pad))
        / ((lhi + pad) - (llo - pad))) * (pixelHi - pixelLo)) as Scale;
    scale.ticks = logTicks(lo, hi);
    return scale;
  }
  if (hi === lo) {
    hi = lo + (Math.abs(lo) || 1);
    lo = lo - (Math.abs(hi) || 1);
  }
  const pad = (hi - lo) * 0.05;
  const a = lo - pad;
  const b = hi + pad;
  const scale = ((v: number) =>
    pixelLo + ((v - a) / (b - a)) * (pixelHi - pixelLo)) as Scale;
  scale.ticks = niceTicks(lo, hi);
  return scale;
}

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function renderPanel(panel: Panel, offsetX: number): string {
  const xs: number[] = [];
  const ys: number[] = [];
  for (const s of panel.series) {
    for (const [x, y] of s.points) {
      xs.push(x);
      ys.push(y);
    }
    for (const [lo, hi] of s.bars ?? []) {
      ys.push(lo, hi);
    }
  }
  if (xs.length === 0) {
    xs.push(0, 1);
    ys.push(0, 1);
  }
  const left = offsetX + MARGIN.left;
  const right = offsetX + PANEL_W - MARGIN.right;
  const top = MARGIN.top;
  const bottom = PANEL_H - MARGIN.bottom;
  const sx = makeScale(xs, left, right, panel.xLog ?? false);
  const sy = makeScale(ys.filter((v) => !panel.yLog || v > 0),
                       bottom, top, panel.yLog ?? false);
  const parts: string[] = [];
  parts.push(`<g class="panel">`);
  parts.push(`<rect x="${fmt(left)}" y="${fmt(top)}" width="${fmt(right - left)}" ` +
             `height="${fmt(bottom - top)}" fill="none" stroke="#333" stroke-width="1"/>`);
  parts.push(`<text x="${fmt((left + right) / 2)}" y="${fmt(top - 10)}" ` +
             `text-anchor="middle" font-size="13">${esc(panel.title)}</text>`);
  for (const t of sx.ticks) {
    const px = sx(t);
    parts.push(`<line x1="${fmt(px)}" y1="${fmt(bottom)}" x2="${fmt(px)}" ` +
               `y2="${fmt(bottom + 4)}" stroke="#333"/>`);
    parts.push(`<text x="${fmt(px)}" y="${fmt(bottom + 16)}" text-anchor="middle" ` +
               `font-size="9">${fmt(t)}</text>`);
  }
  for (const t of sy.ticks) {
    const py = sy(t);
    parts.push(`<line x1="${fmt(left - 4)}" y1="${fmt(py)}" x2="${fmt(left)}" ` +
               `y2="${fmt(py)}" stroke="#333"/>`);
    parts.push(`<text x="${fmt(left - 6)}" y="${fmt(py + 3)}" text-anchor="end" ` +
               `font-size="9">${fmt(t)}</text>`);
  }
  parts.push(`<text x="${fmt((left + right) / 2)}" y="${fmt(PANEL_H - 8)}" ` +
             `text-anchor="middle" font-size="11">${esc(panel.xLabel)}</text>`);
  parts.push(`<text x="${fmt(offsetX + 14)}" y="${fmt((top + bottom) / 2)}" ` +
             `text-anchor="middle" font-size="11" ` +
             `transform="rotate(-90 ${fmt(offsetX + 14)} ${fmt((top + bottom) / 2)})">` +
             `${esc(panel.yLabel)}</text>`);
  for (const s of panel.series) {
    parts.push(renderSeries(s, sx, sy));
  }
  // legend, top-left inside the frame
  let ly = top + 12;
  for (const s of panel.series) {
    parts.push(`<line x1="${fmt(left + 6)}" y1="${fmt(ly - 3)}" x2="${fmt(left + 22)}" ` +
               `y2="${fmt(ly - 3)}" stroke="${s.color}" stroke-width="2"` +
               (s.dash ? ` stroke-dasharray="${s.dash}"` : "") + `/>`);
    parts.push(`<text x="${fmt(left + 26)}" y="${fmt(ly)}" font-size="9">` +
               `${esc(s.name)}</text>`);
    ly += 12;
  }
  parts.push(`</g>`);
  return parts.join("\n");
}

function renderSeries(s: Series, sx: Scale, sy: Scale): string {
  const parts: string[] = [];
  if (s.bars) {
    s.bars.forEach(([lo, hi], i) => {
      const px = sx(s.points[i][0]);
      parts.push(`<line x1="${fmt(px)}" y1="${fmt(sy(lo))}" x2="${fmt(px)}" ` +
                 `y2="${fmt(sy(hi))}" stroke="${s.color}" stroke-width="1"/>`);
    });
  }
  if (s.kind === "points") {
    s.points.forEach(([x, y], i) => {
      const floored = s.floored?.[i] ?? false;
      if (floored) {
        // downward triangle: the value is an upper bound, not an estimate
        const px = sx(x);
        const py = sy(y);
        parts.push(`<path d="M ${fmt(px - 4)} ${fmt(py - 4)} L ${fmt(px + 4)} ` +
                   `${fmt(py - 4)} L ${fmt(px)} ${fmt(py + 3)} Z" fill="none" ` +
                   `stroke="${s.color}" stroke-width="1.2"/>`);
      } else {
        parts.push(`<circle cx="${fmt(sx(x))}" cy="${fmt(sy(y))}" r="2.6" ` +
                   `fill="${s.color}"/>`);
      }
    });
    return parts.join("\n");
  }
  const d: string[] = [];
  s.points.forEach(([x, y], i) => {
    const px = fmt(sx(x));
    const py = fmt(sy(y));
    if (i === 0) {
      d.push(`M ${px} ${py}`);
    } else if (s.kind === "step") {
      d.push(`H ${px} V ${py}`); // piecewise-constant, jump at the new time
    } else {
      d.push(`L ${px} ${py}`);
    }
  });
  parts.push(`<path d="${d.join(" ")}" fill="none" stroke="${s.color}" ` +
             `stroke-width="1.4"` +
             (s.dash ? ` stroke-dasharray="${s.dash}"` : "") + `/>`);
  return parts.join("\n");
}

export function renderFigure(panels: Panel[]): string {
  const width = PANEL_W * panels.length;
  const parts = [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" ` +
    `height="${PANEL_H}" viewBox="0 0 ${width} ${PANEL_H}" ` +
    `font-family="Helvetica, Arial, sans-serif">`,
    `<rect width="${width}" height="${PANEL_H}" fill="white"/>`,
  ];
  panels.forEach((panel, i) => parts.push(renderPanel(panel, i * PANEL_W)));
  parts.push(`</svg>`);
  return parts.join("\n") + "\n";
}
