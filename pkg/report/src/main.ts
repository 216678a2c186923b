/**
 * CLI: render figures from an analysis directory.
 *
 *   node dist/main.js <input-dir> <output-dir> [--no-png]
 *
 * Exit codes: 0 ok, 1 runtime/input error, 2 CSV schema error.
 */

import { SchemaError } from "./csv.js";
import { renderAll } from "./render.js";

async function main(): Promise<number> {
  const args = process.argv.slice(2);
  const png = !args.includes("--no-png");
  const positional = args.filter((a) => !a.startsWith("--"));
  if (positional.length !== 2) {
    console.error("usage: main.js <input-dir> <output-dir> [--no-png]");
    return 1;
  }
  const [inputDir, outDir] = positional;
  try {
    const written = await renderAll(inputDir, outDir, { png });
    for (const file of written) {
      console.log(`wrote ${file}`);
    }
    return 0;
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`schema error: ${err.message}`);
      return 2;
    }
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

main().then((code) => {
  process.exitCode = code;
});
