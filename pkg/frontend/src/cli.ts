#!/usr/bin/env node
/**
 * plot <overlay|concentration|tail-decay|modulus> --in <glob> --out <file.svg>
 *
 * Renders simulator CSVs to SVG; alongside the figure it writes
 * <file>.data.json with every plotted series, which is the artifact golden
 * tests compare.  Overlay additionally needs --fluid <fluid.csv>; tail-decay
 * accepts an optional --fit <aux_fit.csv>.
 */

import * as fs from "fs";

import { SchemaError } from "./csv";
import { FigureResult, KINDS, buildConcentration, buildModulus,
         buildOverlay, buildTailDecay } from "./figures";

interface Args {
  kind: string;
  input?: string;
  out?: string;
  fluid?: string;
  fit?: string;
  state: number;
}

function parseArgs(argv: string[]): Args {
  const args: Args = { kind: argv[0] ?? "", state: 1 };
  for (let i = 1; i < argv.length; i++) {
    const flag = argv[i];
    const need = () => {
      if (i + 1 >= argv.length) throw new UsageError(`${flag} needs a value`);
      return argv[++i];
    };
    switch (flag) {
      case "--in": args.input = need(); break;
      case "--out": args.out = need(); break;
      case "--fluid": args.fluid = need(); break;
      case "--fit": args.fit = need(); break;
      case "--state": args.state = Number(need()); break;
      default: throw new UsageError(`unknown flag ${flag}`);
    }
  }
  return args;
}

class UsageError extends Error {}

function usage(): string {
  return [
    "usage: plot <kind> --in <csv-or-glob> --out <figure.svg> [options]",
    `  kinds: ${KINDS.join(", ")}`,
    "  overlay:    --in 'out/traj_*.csv' --fluid out/fluid.csv [--state k]",
    "  concentration: --in out/concentration.csv",
    "  tail-decay: --in out/aux_tail.csv [--fit out/aux_fit.csv]",
    "  modulus:    --in out/modulus.csv",
  ].join("\n");
}

export function run(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
    if (!(KINDS as readonly string[]).includes(args.kind)) {
      throw new UsageError(`kind must be one of: ${KINDS.join(", ")}`);
    }
    if (!args.input || !args.out) {
      throw new UsageError("--in and --out are required");
    }
  } catch (err) {
    if (err instanceof UsageError) {
      console.error(`error: ${err.message}\n${usage()}`);
      return 2;
    }
    throw err;
  }
  try {
    let result: FigureResult;
    switch (args.kind) {
      case "overlay":
        if (!args.fluid) {
          console.error("error: overlay needs --fluid <fluid.csv>");
          return 2;
        }
        result = buildOverlay(args.input, args.fluid, args.state);
        break;
      case "concentration":
        result = buildConcentration(args.input);
        break;
      case "tail-decay":
        result = buildTailDecay(args.input, args.fit);
        break;
      default:
        result = buildModulus(args.input);
        break;
    }
    fs.writeFileSync(args.out, result.svg);
    const dataPath = args.out.replace(/\.svg$/, "") + ".data.json";
    fs.writeFileSync(dataPath, JSON.stringify(result.data, null, 2) + "\n");
    console.log(`wrote ${args.out} and ${dataPath}`);
    return 0;
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`schema error: ${err.message}`);
      return 1;
    }
    throw err;
  }
}

if (require.main === module) {
  process.exit(run(process.argv.slice(2)));
}
