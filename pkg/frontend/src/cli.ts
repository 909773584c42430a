#!/usr/bin/env node
/** plot --kind busy|cost|latency-sweep|perf-bars --in <csv> --out <svg> */

import { readFileSync, writeFileSync } from "node:fs";
import { CsvError } from "./csv.js";
import { FigureKind, render } from "./figures.js";

const KINDS: FigureKind[] = ["busy", "cost", "latency-sweep", "perf-bars"];

function usage(): never {
  console.error("usage: plot --kind busy|cost|latency-sweep|perf-bars --in <csv> --out <svg>");
  process.exit(1);
}

export function main(argv: string[]): number {
  const args = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    const value = argv[i + 1];
    if (!key?.startsWith("--") || value === undefined) usage();
    args.set(key.slice(2), value);
  }
  const kind = args.get("kind");
  const input = args.get("in");
  const output = args.get("out");
  if (!kind || !input || !output || !KINDS.includes(kind as FigureKind)) usage();
  if (!output.endsWith(".svg")) {
    console.error(`note: output is SVG markup regardless of extension (${output})`);
  }
  try {
    const svg = render({ kind: kind as FigureKind, inputPath: input,
                         text: readFileSync(input, "utf-8") });
    writeFileSync(output, svg);
    console.log(`wrote ${output}`);
    return 0;
  } catch (err) {
    if (err instanceof CsvError) {
      console.error(`error: ${err.message}`);
      return 1;
    }
    throw err;
  }
}

process.exit(main(process.argv.slice(2)));
