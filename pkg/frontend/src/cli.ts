#!/usr/bin/env node
/**
 * Command line entry point: render one figure from a rate-solver CSV
 * artifact.
 *
 *   aircomp-plots <sweep|violin|training|heatmap> --in data.csv [--out fig.svg]
 *
 * When --out is omitted the SVG lands next to the input, named after the
 * input file and the plot kind. Nothing is written if the input fails to
 * parse.
 */

import { readFileSync, writeFileSync } from "node:fs";
import { basename, dirname, extname, join } from "node:path";

import { EmptyDataError, SchemaError } from "./csv.js";
import { PLOTS } from "./plots.js";

export function defaultOutput(inputPath: string, plot: string): string {
  const stem = basename(inputPath, extname(inputPath));
  return join(dirname(inputPath), `${stem}_${plot}.svg`);
}

export function run(argv: string[]): number {
  const usage = `usage: aircomp-plots <${Object.keys(PLOTS).join("|")}> --in FILE [--out FILE]`;
  const [plot, ...rest] = argv;
  if (!plot || !(plot in PLOTS)) {
    console.error(usage);
    return 2;
  }
  let input: string | undefined;
  let output: string | undefined;
  for (let i = 0; i < rest.length; i += 2) {
    const flag = rest[i];
    const value = rest[i + 1];
    if (value === undefined) {
      console.error(`missing value for ${flag}`);
      return 2;
    }
    if (flag === "--in") input = value;
    else if (flag === "--out") output = value;
    else {
      console.error(`unknown flag ${flag}\n${usage}`);
      return 2;
    }
  }
  if (!input) {
    console.error(usage);
    return 2;
  }
  let text: string;
  try {
    text = readFileSync(input, "utf8");
  } catch (err) {
    console.error(`cannot read ${input}: ${(err as Error).message}`);
    return 1;
  }
  let svg: string;
  try {
    svg = PLOTS[plot](text);
  } catch (err) {
    if (err instanceof SchemaError || err instanceof EmptyDataError) {
      console.error(`${input}: ${err.message}`);
      return 1;
    }
    throw err;
  }
  const dest = output ?? defaultOutput(input, plot);
  writeFileSync(dest, svg, "utf8");
  console.log(dest);
  return 0;
}

const thisFile = process.argv[1] ?? "";
if (thisFile.endsWith("cli.js") || thisFile.endsWith("aircomp-plots")) {
  process.exit(run(process.argv.slice(2)));
}
