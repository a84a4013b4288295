import * as fs from "fs";
import * as os from "os";
import * as path from "path";
import { afterEach, beforeEach, describe, expect, it } from "vitest";
import { gapAtTime, PolicyCurve } from "../src/aggregate";
import { loadRuns, parseRunCsv, RunSeries } from "../src/csv";
import { run } from "../src/cli";
import { renderFigure } from "../src/svg";

const SAMPLES = path.join(__dirname, "..", "samples");

let tmpDir: string;
beforeEach(() => {
  tmpDir = fs.mkdtempSync(path.join(os.tmpdir(), "plots-"));
});
afterEach(() => {
  fs.rmSync(tmpDir, { recursive: true, force: true });
});

describe("parseRunCsv", () => {
  it("reads a shipped sample", () => {
    const series = parseRunCsv(path.join(SAMPLES, "ctm_seed0000.csv"));
    expect(series.policy).toBe("ctm");
    expect(series.seed).toBe(0);
    expect(series.rows.length).toBeGreaterThan(10);
    const cums = series.rows.map((r) => r.cumS);
    expect(cums).toEqual([...cums].sort((a, b) => a - b));
    expect(series.rows.every((r) => r.gap >= 0)).toBe(true);
  });

  it("rejects a malformed file", () => {
    const bad = path.join(tmpDir, "ctm_seed0000.csv");
    fs.writeFileSync(bad, "seed,policy\n0,ctm\n");
    expect(() => parseRunCsv(bad)).toThrow(/missing column/);
  });
});

describe("loadRuns", () => {
  it("groups the samples by policy", () => {
    const byPolicy = loadRuns(SAMPLES);
    expect([...byPolicy.keys()].sort()).toEqual(["ctm", "ia", "uniform"]);
    expect(byPolicy.get("ctm")).toHaveLength(5);
  });

  it("fails on an empty directory", () => {
    expect(() => loadRuns(tmpDir)).toThrow(/no run CSVs/);
  });

  it("fails on a missing directory", () => {
    expect(() => loadRuns(path.join(tmpDir, "nope"))).toThrow(/not found/);
  });
});

describe("cli run", () => {
  it("regenerates the figure from the shipped samples", () => {
    const out = path.join(tmpDir, "out");
    const { svgPath, dataPath } = run(["--in", SAMPLES, "--out", out]);
    const svg = fs.readFileSync(svgPath, "utf-8");
    expect(svg.startsWith("<svg")).toBe(true);
    expect(svg).toContain("loss gap");
    const data = JSON.parse(fs.readFileSync(dataPath, "utf-8"));
    expect(data.curves.map((c: PolicyCurve) => c.policy)).toEqual([
      "ctm",
      "ia",
      "uniform",
    ]);
  });

  it("rendered medians match an independent recomputation exactly", () => {
    const out = path.join(tmpDir, "out");
    const { dataPath } = run(["--in", SAMPLES, "--out", out]);
    const data = JSON.parse(fs.readFileSync(dataPath, "utf-8"));

    // Recompute from the raw CSVs without the aggregation module: sort the
    // five per-seed step functions at each grid time and take the middle one.
    const byPolicy = loadRuns(SAMPLES);
    for (const curve of data.curves as PolicyCurve[]) {
      const runs = byPolicy.get(curve.policy)!;
      expect(runs).toHaveLength(5);
      curve.timesS.forEach((t: number, i: number) => {
        const gaps = runs
          .map((r: RunSeries) => gapAtTime(r, t))
          .sort((a, b) => a - b);
        expect(curve.median[i]).toBe(gaps[2]);
      });
    }
  });

  it("marks requested checkpoints", () => {
    const out = path.join(tmpDir, "out");
    const { svgPath, dataPath } = run([
      "--in", SAMPLES, "--out", out, "--checkpoints", "300,800",
    ]);
    expect(fs.readFileSync(svgPath, "utf-8")).toContain("t=300");
    expect(JSON.parse(fs.readFileSync(dataPath, "utf-8")).checkpoints).toEqual([
      300, 800,
    ]);
  });

  it("rejects an invalid checkpoint list", () => {
    expect(() =>
      run(["--in", SAMPLES, "--out", tmpDir, "--checkpoints", "12,abc"])
    ).toThrow(/invalid checkpoint/);
  });
});

describe("renderFigure", () => {
  it("draws one median line and one band per policy", () => {
    const curve: PolicyCurve = {
      policy: "ctm",
      seeds: [0, 1],
      timesS: [1, 2, 3],
      median: [0.5, 0.2, 0.1],
      q1: [0.4, 0.15, 0.08],
      q3: [0.6, 0.3, 0.12],
    };
    const svg = renderFigure([curve, { ...curve, policy: "ia" }]);
    expect((svg.match(/<polyline /g) ?? []).length).toBe(2);
    expect((svg.match(/<polygon /g) ?? []).length).toBe(2);
    expect(svg).toContain("ctm (2 seeds)");
  });

  it("rejects an empty curve list", () => {
    expect(() => renderFigure([])).toThrow();
  });
});
