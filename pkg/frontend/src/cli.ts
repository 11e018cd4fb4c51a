/**
 * Thin command line around plotSer.
 *
 *   xlmimo-plot --csv results.csv [--csv more.csv] --out figure.svg \
 *       [--label mfbp=MF-BP] [--floor 1e-5] [--title "..."]
 */

import { PlotSpec, plotSer } from "./plot.js";

export function parseArgs(argv: string[]): PlotSpec {
  const spec: PlotSpec = { csvPaths: [], outPath: "figure.svg", labels: {} };
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    const next = () => {
      i += 1;
      if (i >= argv.length) {
        throw new Error(`missing value after ${arg}`);
      }
      return argv[i];
    };
    switch (arg) {
      case "--csv":
        for (const p of next().split(",")) {
          if (p.trim()) spec.csvPaths.push(p.trim());
        }
        break;
      case "--out":
        spec.outPath = next();
        break;
      case "--floor": {
        const v = Number(next());
        if (!(v > 0)) throw new Error("--floor must be a positive number");
        spec.floor = v;
        break;
      }
      case "--label": {
        const pair = next();
        const eq = pair.indexOf("=");
        if (eq <= 0) throw new Error(`--label expects name=text, got '${pair}'`);
        spec.labels![pair.slice(0, eq)] = pair.slice(eq + 1);
        break;
      }
      case "--title":
        spec.title = next();
        break;
      case "--help":
      case "-h":
        console.log("usage: xlmimo-plot --csv FILE[,FILE...] --out FIG.svg " +
          "[--label name=text]... [--floor 1e-5] [--title TEXT]");
        process.exit(0);
        break;
      default:
        throw new Error(`unknown argument '${arg}'`);
    }
  }
  if (spec.csvPaths.length === 0) {
    throw new Error("at least one --csv is required");
  }
  return spec;
}

const isMain = process.argv[1]?.endsWith("cli.js");
if (isMain) {
  try {
    const out = plotSer(parseArgs(process.argv.slice(2)));
    console.log(`wrote ${out}`);
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    process.exit(2);
  }
}
