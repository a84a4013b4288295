import * as fs from "fs";
import * as path from "path";
import Papa from "papaparse";

/** One logged communication round from a run CSV. */
export interface RunRow {
  round: number;
  cumS: number;
  gap: number;
}

/** All rounds of a single (policy, seed) run. */
export interface RunSeries {
  policy: string;
  seed: number;
  rows: RunRow[];
}

const FILE_PATTERN = /^([a-z]+)_seed(\d+)\.csv$/;

const REQUIRED_COLUMNS = ["seed", "policy", "round", "cum_s", "gap"];

export function parseRunCsv(filePath: string): RunSeries {
  const name = path.basename(filePath);
  const match = FILE_PATTERN.exec(name);
  if (!match) {
    throw new Error(`unrecognized run file name: ${name}`);
  }
  const text = fs.readFileSync(filePath, "utf-8");
  const parsed = Papa.parse<Record<string, string>>(text.trim(), {
    header: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    throw new Error(`${name}: ${parsed.errors[0].message}`);
  }
  const fields = parsed.meta.fields ?? [];
  for (const col of REQUIRED_COLUMNS) {
    if (!fields.includes(col)) {
      throw new Error(`${name}: missing column ${col}`);
    }
  }
  const rows: RunRow[] = parsed.data.map((rec, i) => {
    const round = Number(rec.round);
    const cumS = Number(rec.cum_s);
    const gap = Number(rec.gap);
    if (!Number.isFinite(round) || !Number.isFinite(cumS) || !Number.isFinite(gap)) {
      throw new Error(`${name}: non-numeric value in data row ${i + 1}`);
    }
    return { round, cumS, gap };
  });
  return { policy: match[1], seed: Number(match[2]), rows };
}

/** Load every run CSV in a directory, grouped by policy. */
export function loadRuns(dir: string): Map<string, RunSeries[]> {
  if (!fs.existsSync(dir) || !fs.statSync(dir).isDirectory()) {
    throw new Error(`input directory not found: ${dir}`);
  }
  const names = fs.readdirSync(dir).filter((n) => FILE_PATTERN.test(n)).sort();
  if (names.length === 0) {
    throw new Error(`no run CSVs (policy_seedNNNN.csv) in ${dir}`);
  }
  const byPolicy = new Map<string, RunSeries[]>();
  for (const name of names) {
    const series = parseRunCsv(path.join(dir, name));
    const list = byPolicy.get(series.policy) ?? [];
    list.push(series);
    byPolicy.set(series.policy, list);
  }
  return byPolicy;
}
