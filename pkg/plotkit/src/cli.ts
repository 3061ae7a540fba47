#!/usr/bin/env node
// plotkit <kind> --in FILE [--in FILE...] --out IMG

import { writeFileSync } from "node:fs";
import { FIGURES } from "./figures";
import { InputError } from "./io";

export function main(argv: string[]): number {
  const [kind, ...rest] = argv;
  if (!kind || !(kind in FIGURES)) {
    process.stderr.write(
      `usage: plotkit <${Object.keys(FIGURES).join("|")}> --in FILE [--in FILE...] --out IMG\n`,
    );
    return 2;
  }
  const inputs: string[] = [];
  let out = "";
  for (let i = 0; i < rest.length; i += 1) {
    if (rest[i] === "--in" && rest[i + 1]) {
      inputs.push(rest[i + 1]);
      i += 1;
    } else if (rest[i] === "--out" && rest[i + 1]) {
      out = rest[i + 1];
      i += 1;
    } else {
      process.stderr.write(`unknown argument: ${rest[i]}\n`);
      return 2;
    }
  }
  if (inputs.length === 0 || !out) {
    process.stderr.write("both --in and --out are required\n");
    return 2;
  }
  try {
    const svg = FIGURES[kind](inputs);
    writeFileSync(out, svg);
    process.stdout.write(`wrote ${out}\n`);
    return 0;
  } catch (err) {
    if (err instanceof InputError) {
      process.stderr.write(`input error: ${err.message}\n`);
      return 2;
    }
    process.stderr.write(`error: ${(err as Error).message}\n`);
    return 1;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
