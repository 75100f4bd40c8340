/**
 * viz --in <embeddings.csv> --out <image.png> [--method pca|sne] [--seed 7]
 *
 * Reads an embedding export, projects to 2-D, writes a scatter PNG, and
 * prints the separation metric (computed on the raw vectors) as JSON.
 */

import { basename } from "node:path";
import { writeFileSync } from "node:fs";

import { loadEmbeddings } from "./table.js";
import { projectPca } from "./pca.js";
import { projectSne } from "./sne.js";
import { renderScatter } from "./render.js";
import { separationMetric } from "./separation.js";

interface Args {
  in: string;
  out: string;
  method: "pca" | "sne";
  seed: number;
}

export function parseArgs(argv: string[]): Args {
  const args: Partial<Args> = { method: "pca", seed: 7 };
  for (let i = 0; i < argv.length; i++) {
    const flag = argv[i];
    const next = () => {
      if (i + 1 >= argv.length) throw new Error(`missing value for ${flag}`);
      return argv[++i];
    };
    switch (flag) {
      case "--in":
        args.in = next();
        break;
      case "--out":
        args.out = next();
        break;
      case "--method": {
        const value = next();
        if (value !== "pca" && value !== "sne") {
          throw new Error(`--method must be pca or sne, got ${value}`);
        }
        args.method = value;
        break;
      }
      case "--seed": {
        const value = Number(next());
        if (!Number.isInteger(value)) throw new Error(`--seed must be an integer`);
        args.seed = value;
        break;
      }
      default:
        throw new Error(`unknown flag ${flag}`);
    }
  }
  if (!args.in || !args.out) throw new Error("--in and --out are required");
  return args as Args;
}

export function run(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    console.error("usage: viz --in <embeddings.csv> --out <image.png> [--method pca|sne] [--seed 7]");
    return 2;
  }
  try {
    const table = loadEmbeddings(args.in);
    const metric = separationMetric(table.matrix, table.labels);
    const coords = args.method === "pca" ? projectPca(table.matrix) : projectSne(table.matrix, args.seed);
    const title = `${basename(table.source)} separation=${metric.toFixed(6)} method=${args.method}`;
    const result = renderScatter(coords, table.labels, { title });
    writeFileSync(args.out, result.png);
    console.log(
      JSON.stringify({
        out: args.out,
        separation: metric,
        legend: result.legend,
        points: coords.length,
        method: args.method,
      }),
    );
    return 0;
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

const isMain =
  process.argv[1] !== undefined && import.meta.url === new URL(`file://${process.argv[1]}`).href;
if (isMain) {
  process.exit(run(process.argv.slice(2)));
}
