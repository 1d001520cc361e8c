/**
 * Figure builders: map the simulator's CSV outputs onto panel/series
 * structures.  Each builder returns both the renderable panels and a plain
 * data object (every plotted point, per series) that tests compare against
 * golden files, so figure regressions are caught on data, not pixels.
 */

import * as path from "path";

import { FluidPath, ModulusRow, SchemaError, TailRow, Trajectory,
         globFiles, readFluid, readLineFit, readModulus, readTailEstimates,
         readTrajectory } from "./csv";
import { Panel, Series, renderFigure } from "./svg";

export const KINDS = ["overlay", "concentration", "tail-decay", "modulus"] as const;
export type FigureKind = (typeof KINDS)[number];

export interface SeriesData {
  name: string;
  kind: string;
  points: Array<[number, number]>;
}

export interface FigureData {
  kind: FigureKind;
  panels: Array<{ title: string; series: SeriesData[] }>;
}

export interface FigureResult {
  svg: string;
  data: FigureData;
}

const EMPIRICAL_COLOR = "#2b6fbb";
const FLUID_COLOR = "#c53a32";
const ACCENT = "#3a8f5f";

function toData(kind: FigureKind, panels: Panel[]): FigureData {
  return {
    kind,
    panels: panels.map((p) => ({
      title: p.title,
      series: p.series.map((s) => ({
        name: s.name,
        kind: s.kind,
        points: s.points,
      })),
    })),
  };
}

function finish(kind: FigureKind, panels: Panel[]): FigureResult {
  return { svg: renderFigure(panels), data: toData(kind, panels) };
}

function sizeFromName(file: string): number {
  const match = path.basename(file).match(/N(\d+)/);
  return match ? Number(match[1]) : Number.MAX_SAFE_INTEGER;
}

function downsample(points: Array<[number, number]>,
                    cap: number): Array<[number, number]> {
  if (points.length <= cap) return points;
  const stride = Math.ceil(points.length / cap);
  const kept = points.filter((_, i) => i % stride === 0);
  if (kept[kept.length - 1] !== points[points.length - 1]) {
    kept.push(points[points.length - 1]);
  }
  return kept;
}

/** One panel per trajectory file: empirical step path vs the fluid curve. */
export function buildOverlay(trajPattern: string, fluidFile: string,
                             state = 1): FigureResult {
  const files = globFiles(trajPattern);
  if (files.length === 0) {
    throw new SchemaError(`no trajectory files match ${trajPattern}`);
  }
  const fluid: FluidPath = readFluid(fluidFile);
  const k = state - 1;
  if (k < 0 || k >= fluid.K) {
    throw new SchemaError(`state ${state} outside 1..${fluid.K}`);
  }
  const fluidPoints = downsample(
    fluid.t.map((t, i) => [t, fluid.y[k][i]] as [number, number]), 400);
  const trajectories = files
    .map((f) => readTrajectory(f))
    .sort((a, b) => sizeFromName(a.path) - sizeFromName(b.path));
  const panels: Panel[] = trajectories.map((traj: Trajectory) => {
    if (traj.K !== fluid.K) {
      throw new SchemaError(
        `${traj.path}: K=${traj.K} does not match fluid K=${fluid.K}`);
    }
    const N = sizeFromName(traj.path);
    const stepPoints = traj.t.map(
      (t, i) => [t, traj.ybar[k][i]] as [number, number]);
    return {
      title: N === Number.MAX_SAFE_INTEGER
        ? path.basename(traj.path) : `${N} nodes`,
      xLabel: "t",
      yLabel: `fraction in state ${state}`,
      series: [
        { name: "stochastic", kind: "step", points: stepPoints,
          color: EMPIRICAL_COLOR },
        { name: "fluid limit", kind: "line", points: fluidPoints,
          color: FLUID_COLOR },
      ] as Series[],
    };
  });
  return finish("overlay", panels);
}

/** Tail estimates with CI bars against N, log-scale y, one series per eps. */
export function buildConcentration(summaryFile: string): FigureResult {
  const rows = readTailEstimates(summaryFile, false);
  if (rows.length === 0) {
    throw new SchemaError(`${summaryFile}: no tail estimates`);
  }
  const epsilons = [...new Set(rows.map((r) => r.epsilon))].sort((a, b) => a - b);
  const series: Series[] = [];
  const palette = [EMPIRICAL_COLOR, ACCENT, "#aa7a2f", "#7a4fa0"];
  epsilons.forEach((eps, i) => {
    const group = rows.filter((r) => r.epsilon === eps)
      .sort((a, b) => a.N - b.N);
    // zero estimates carry no log-scale position of their own: plot them
    // at the Wilson upper bound and mark them as floored
    const floored = group.map((r) => r.exceedances === 0);
    const points = group.map((r, j) =>
      [r.N, floored[j] ? r.ciHigh : r.pHat] as [number, number]);
    const bars = group.map((r) =>
      [Math.max(r.ciLow, 1e-6), r.ciHigh] as [number, number]);
    const color = palette[i % palette.length];
    series.push({ name: `eps=${eps} estimate`, kind: "points", points,
                  bars, floored, color });
    series.push({ name: `eps=${eps} trend`, kind: "line", points,
                  color, dash: "4 3" });
  });
  const panel: Panel = {
    title: "sup-gap exceedance vs N",
    xLabel: "N",
    yLabel: "P(sup |gap| > eps)",
    yLog: true,
    series,
  };
  return finish("concentration", [panel]);
}

/** Auxiliary tail decay: log tail vs N, Bernstein ceiling, fitted line. */
export function buildTailDecay(auxFile: string,
                               fitFile?: string): FigureResult {
  const rows = readTailEstimates(auxFile, true).sort((a, b) => a.N - b.N);
  if (rows.length === 0) {
    throw new SchemaError(`${auxFile}: no tail estimates`);
  }
  const floored = rows.map((r) => r.exceedances === 0);
  const estimates: Series = {
    name: "tail estimate", kind: "points",
    points: rows.map((r, i) =>
      [r.N, floored[i] ? r.ciHigh : r.pHat] as [number, number]),
    bars: rows.map((r) => [Math.max(r.ciLow, 1e-6), r.ciHigh]),
    floored,
    color: EMPIRICAL_COLOR,
  };
  const ceiling: Series = {
    name: "Bernstein ceiling", kind: "line",
    points: rows.map((r) => [r.N, r.ceiling ?? 1] as [number, number]),
    color: FLUID_COLOR,
    dash: "6 3",
  };
  const series = [estimates, ceiling];
  if (fitFile) {
    const fit = readLineFit(fitFile);
    series.push({
      name: "log-linear fit", kind: "line",
      points: rows.map((r) =>
        [r.N, Math.exp(fit.intercept + fit.slope * r.N)] as [number, number]),
      color: ACCENT,
    });
  }
  const panel: Panel = {
    title: "auxiliary tail decay",
    xLabel: "N",
    yLabel: "P(|quadratic gap| > eps)",
    yLog: true,
    series,
  };
  return finish("tail-decay", [panel]);
}

/** Modulus of continuity against window width, one series per N. */
export function buildModulus(modulusFile: string): FigureResult {
  const rows = readModulus(modulusFile);
  if (rows.length === 0) {
    throw new SchemaError(`${modulusFile}: no modulus rows`);
  }
  const sizes = [...new Set(rows.map((r) => r.N))].sort((a, b) => a - b);
  const palette = [EMPIRICAL_COLOR, FLUID_COLOR, ACCENT, "#aa7a2f"];
  const series: Series[] = sizes.map((N, i) => ({
    name: `N=${N}`,
    kind: "line",
    points: rows.filter((r: ModulusRow) => r.N === N)
      .sort((a, b) => a.delta - b.delta)
      .map((r) => [r.delta, r.omega] as [number, number]),
    color: palette[i % palette.length],
  }));
  const panel: Panel = {
    title: "path modulus of continuity",
    xLabel: "window width delta",
    yLabel: "omega(delta)",
    series,
  };
  return finish("modulus", [panel]);
}
