#!/usr/bin/env node
/** Writes a tiny seeded weight bundle for tests. */

import { mkdirSync, writeFileSync } from "node:fs";
import { dirname } from "node:path";
import { buildBundle } from "./model.js";

const target = process.argv[2] ?? "test/fixtures/tiny-bundle.json";
const bundle = buildBundle(
  "tiny-fixture",
  { vocab_size: 20, num_layers: 2, hidden_dim: 6, eos_id: 19, max_context: 40 },
  123,
  { margin: 5.0, rampStart: 10, rampRate: 0.05 },
);
mkdirSync(dirname(target), { recursive: true });
writeFileSync(target, JSON.stringify(bundle));
process.stdout.write(`wrote ${target}\n`);
