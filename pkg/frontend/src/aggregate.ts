import { RunSeries } from "./csv";

/** Median and quartile loss-gap curves for one policy on a shared time grid. */
export interface PolicyCurve {
  policy: string;
  seeds: number[];
  timesS: number[];
  median: number[];
  q1: number[];
  q3: number[];
}

/**
 * Loss gap as a right-continuous step function of simulated time: the gap of
 * the last round completed by time t, clamped to the first round's gap before
 * that round finishes. Converged runs hold their final gap afterwards.
 */
export function gapAtTime(series: RunSeries, t: number): number {
  if (series.rows.length === 0) {
    return 0;
  }
  let gap = series.rows[0].gap;
  for (const row of series.rows) {
    if (row.cumS <= t) {
      gap = row.gap;
    } else {
      break;
    }
  }
  return gap;
}

/** Quantile with linear interpolation between order statistics. */
export function quantile(sortedValues: number[], q: number): number {
  if (sortedValues.length === 0) {
    throw new Error("quantile of empty sample");
  }
  const pos = (sortedValues.length - 1) * q;
  const lo = Math.floor(pos);
  const hi = Math.ceil(pos);
  if (lo === hi) {
    return sortedValues[lo];
  }
  return sortedValues[lo] + (pos - lo) * (sortedValues[hi] - sortedValues[lo]);
}

/**
 * Aggregate one policy's runs onto the union of their round-completion times.
 * With a single seed the curve is the raw series and the band collapses.
 */
export function aggregatePolicy(policy: string, runs: RunSeries[]): PolicyCurve {
  if (runs.length === 0) {
    throw new Error(`no runs for policy ${policy}`);
  }
  const grid = Array.from(
    new Set(runs.flatMap((r) => r.rows.map((row) => row.cumS)))
  ).sort((a, b) => a - b);
  const median: number[] = [];
  const q1: number[] = [];
  const q3: number[] = [];
  for (const t of grid) {
    const gaps = runs.map((r) => gapAtTime(r, t)).sort((a, b) => a - b);
    q1.push(quantile(gaps, 0.25));
    median.push(quantile(gaps, 0.5));
    q3.push(quantile(gaps, 0.75));
  }
  return {
    policy,
    seeds: runs.map((r) => r.seed).sort((a, b) => a - b),
    timesS: grid,
    median,
    q1,
    q3,
  };
}

export function aggregateAll(byPolicy: Map<string, RunSeries[]>): PolicyCurve[] {
  return Array.from(byPolicy.keys())
    .sort()
    .map((policy) => aggregatePolicy(policy, byPolicy.get(policy)!));
}
