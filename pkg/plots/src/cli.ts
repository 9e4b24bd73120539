#!/usr/bin/env node
import { readFileSync, writeFileSync } from "fs";

import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { FIGURE_KINDS, FigureKind } from "./figure.js";
import { renderFigure } from "./render.js";
import { SchemaError, parseSummaryCsv } from "./schema.js";

export interface CliOptions {
  in: string;
  kind: string;
  out: string;
  alpha: number;
}

/** Read, render, write; throws before touching the output on any error. */
export function runCli(opts: CliOptions): void {
  if (!(FIGURE_KINDS as readonly string[]).includes(opts.kind)) {
    throw new SchemaError(
      `unknown kind ${JSON.stringify(opts.kind)}; expected one of ` +
        FIGURE_KINDS.join(", "),
    );
  }
  const text = readFileSync(opts.in, "utf8");
  const rows = parseSummaryCsv(text);
  const svg = renderFigure(rows, opts.kind as FigureKind, opts.alpha);
  writeFileSync(opts.out, svg + "\n");
}

export function main(argv: string[]): void {
  const args = yargs(argv)
    .scriptName("plots")
    .usage("$0 --in summary.csv --kind type1 --out fig.svg")
    .option("in", {
      type: "string",
      demandOption: true,
      describe: "study summary CSV produced by the harness",
    })
    .option("kind", {
      type: "string",
      choices: FIGURE_KINDS as unknown as string[],
      demandOption: true,
      describe: "which figure family to draw",
    })
    .option("out", {
      type: "string",
      demandOption: true,
      describe: "output SVG path",
    })
    .option("alpha", {
      type: "number",
      default: 0.05,
      describe: "significance level to draw (rows at other levels are skipped)",
    })
    .strict()
    .parseSync();
  runCli({ in: args.in, kind: args.kind, out: args.out, alpha: args.alpha });
  console.log(`wrote ${args.out}`);
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${process.argv[1]}`).href;
if (invokedDirectly) {
  try {
    main(hideBin(process.argv));
  } catch (err) {
    console.error(err instanceof Error ? err.message : String(err));
    process.exit(1);
  }
}
