#!/usr/bin/env node
/**
 * Bridge entry point.
 *
 *   stbon-bridge --echo-toy            serve the built-in conformance model
 *   stbon-bridge --model <bundle.json> serve a weight bundle from disk
 *
 * Frames flow over stdin/stdout; diagnostics go to stderr. Exit 0 on
 * shutdown or closed pipe, 1 on fatal error, 2 on usage error.
 */

import { writeFrame } from "./frames.js";
import { echoToyBundle, loadBundle, ToyModel } from "./model.js";
import { serve } from "./server.js";

function usage(): void {
  process.stderr.write("usage: stbon-bridge (--echo-toy | --model <bundle.json>)\n");
}

async function main(): Promise<number> {
  const args = process.argv.slice(2);
  let name: string;
  let model: ToyModel;
  if (args.includes("--echo-toy")) {
    const bundle = echoToyBundle();
    name = bundle.name;
    model = new ToyModel(bundle);
  } else {
    const flag = args.indexOf("--model");
    if (flag < 0 || flag + 1 >= args.length) {
      usage();
      return 2;
    }
    try {
      const bundle = loadBundle(args[flag + 1]);
      name = bundle.name;
      model = new ToyModel(bundle);
    } catch (error) {
      process.stderr.write(`bridge: ${(error as Error).message}\n`);
      writeFrame(process.stdout, { type: "fatal", message: (error as Error).message });
      return 1;
    }
  }
  process.stderr.write(`bridge: serving ${name}\n`);
  return serve(model, name, process.stdin, process.stdout);
}

main().then(
  (code) => process.exit(code),
  (error) => {
    process.stderr.write(`bridge: ${(error as Error).stack ?? error}\n`);
    process.exit(1);
  },
);
