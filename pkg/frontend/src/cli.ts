#!/usr/bin/env node
import * as fs from "fs";
import * as path from "path";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import { aggregateAll } from "./aggregate";
import { loadRuns } from "./csv";
import { renderFigure } from "./svg";

export interface CliResult {
  svgPath: string;
  dataPath: string;
}

/** Parse args, aggregate the CSVs in --in, write figure.svg + figure.json. */
export function run(argv: string[]): CliResult {
  const args = yargs(argv)
    .option("in", {
      type: "string",
      demandOption: true,
      describe: "directory of run CSVs (policy_seedNNNN.csv)",
    })
    .option("out", {
      type: "string",
      demandOption: true,
      describe: "output directory for figure.svg and figure.json",
    })
    .option("checkpoints", {
      type: "string",
      describe: "comma-separated times (s) to mark, e.g. 300,800",
    })
    .strict()
    .parseSync();

  const checkpoints = (args.checkpoints ?? "")
    .split(",")
    .map((s) => s.trim())
    .filter((s) => s.length > 0)
    .map((s) => {
      const v = Number(s);
      if (!Number.isFinite(v) || v < 0) {
        throw new Error(`invalid checkpoint: ${s}`);
      }
      return v;
    });

  const curves = aggregateAll(loadRuns(args.in));
  const svg = renderFigure(curves, checkpoints);

  fs.mkdirSync(args.out, { recursive: true });
  const svgPath = path.join(args.out, "figure.svg");
  const dataPath = path.join(args.out, "figure.json");
  fs.writeFileSync(svgPath, svg);
  fs.writeFileSync(
    dataPath,
    JSON.stringify({ checkpoints, curves }, null, 2) + "\n"
  );
  return { svgPath, dataPath };
}

if (require.main === module) {
  try {
    const { svgPath, dataPath } = run(hideBin(process.argv));
    console.log(`wrote ${svgPath} and ${dataPath}`);
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    process.exit(1);
  }
}
