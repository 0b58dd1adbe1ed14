/**
 * Deterministic toy language model and the weight-bundle loader.
 *
 * The network family matches the engine's desk-scale expectations: a
 * token embedding plus positional code feeds a stack of tanh layers
 * that mix the current position with the causal running mean, so every
 * prefix yields one hidden vector per layer (the embedding output is
 * layer 0) and a logit row for the next token. Everything is a pure
 * function of the prefix; all sampling stays engine-side.
 */

import { readFileSync } from "node:fs";
import { Mulberry } from "./rng.js";

export interface Descriptor {
  vocab_size: number;
  num_layers: number;
  hidden_dim: number;
  eos_id: number;
  max_context: number;
}

export interface StepResult {
  logits: number[];
  hidden: number[][];
}

export class ContextOverflow extends Error {}

export interface BundleWeights {
  embedding: number[][]; // vocab x dim
  start: number[]; // dim
  mix: number[][][]; // layers x dim x dim
  mean: number[][][]; // layers x dim x dim
  bias: number[][]; // layers x dim
  output: number[][]; // dim x vocab
  eosMargin: number;
  eosRampStart: number;
  eosRampRate: number;
}

export interface Bundle {
  format: string;
  version: number;
  name: string;
  descriptor: Descriptor;
  weights: BundleWeights;
}

const BUNDLE_FORMAT = "stbon-bridge-bundle";

function matvec(matrix: number[][], vector: Float64Array): Float64Array {
  const rows = matrix.length;
  const out = new Float64Array(rows);
  for (let r = 0; r < rows; r++) {
    const row = matrix[r];
    let acc = 0;
    for (let c = 0; c < row.length; c++) acc += row[c] * vector[c];
    out[r] = acc;
  }
  return out;
}

export class ToyModel {
  readonly descriptor: Descriptor;
  private readonly weights: BundleWeights;
  private readonly positional: Float64Array[];

  constructor(bundle: Bundle) {
    if (bundle.format !== BUNDLE_FORMAT) {
      throw new Error(`not a model bundle (format ${JSON.stringify(bundle.format)})`);
    }
    this.descriptor = bundle.descriptor;
    this.weights = bundle.weights;
    const { hidden_dim, max_context } = this.descriptor;
    this.positional = [];
    for (let pos = 0; pos <= max_context + 1; pos++) {
      const code = new Float64Array(hidden_dim);
      for (let d = 0; d < hidden_dim; d++) {
        const angle = pos / Math.pow(64, (d - (d % 2)) / hidden_dim);
        code[d] = 0.12 * (d % 2 === 0 ? Math.sin(angle) : Math.cos(angle));
      }
      this.positional.push(code);
    }
  }

  step(prefix: number[]): StepResult {
    const desc = this.descriptor;
    if (prefix.length > desc.max_context) {
      throw new ContextOverflow(`prefix length ${prefix.length} exceeds ${desc.max_context}`);
    }
    for (const token of prefix) {
      if (!Number.isInteger(token) || token < 0 || token >= desc.vocab_size) {
        throw new RangeError(`token ${token} outside vocabulary`);
      }
    }
    const layers = desc.num_layers;
    const dim = desc.hidden_dim;
    const sums = Array.from({ length: layers }, () => new Float64Array(dim));
    let hidden: Float64Array[] = [];

    const advance = (embedding: Float64Array, count: number): Float64Array[] => {
      const states: Float64Array[] = [embedding];
      let z = embedding;
      for (let l = 0; l < layers; l++) {
        const sum = sums[l];
        for (let d = 0; d < dim; d++) sum[d] += z[d];
        const mixed = matvec(this.weights.mix[l], z);
        const meanIn = new Float64Array(dim);
        for (let d = 0; d < dim; d++) meanIn[d] = sum[d] / count;
        const meaned = matvec(this.weights.mean[l], meanIn);
        const next = new Float64Array(dim);
        const bias = this.weights.bias[l];
        for (let d = 0; d < dim; d++) next[d] = Math.tanh(mixed[d] + meaned[d] + bias[d]);
        states.push(next);
        z = next;
      }
      return states;
    };

    if (prefix.length === 0) {
      const start = new Float64Array(dim);
      const pos0 = this.positional[0];
      for (let d = 0; d < dim; d++) start[d] = this.weights.start[d] + pos0[d];
      hidden = advance(start, 1);
    } else {
      for (let index = 0; index < prefix.length; index++) {
        const embedding = new Float64Array(dim);
        const row = this.weights.embedding[prefix[index]];
        const pos = this.positional[index + 1];
        for (let d = 0; d < dim; d++) embedding[d] = row[d] + pos[d];
        hidden = advance(embedding, index + 1);
      }
    }

    const logitsVec = matvec(transposeCache(this.weights.output), hidden[layers]);
    const logits = Array.from(logitsVec);
    const nextPos = prefix.length + 1;
    const ramp =
      this.weights.eosRampRate * Math.max(0, nextPos - this.weights.eosRampStart) ** 2;
    logits[desc.eos_id] += ramp - this.weights.eosMargin;
    return { logits, hidden: hidden.map((h) => Array.from(h)) };
  }
}

const transposed = new WeakMap<number[][], number[][]>();

/** output weights are stored dim x vocab; logits need vocab x dim rows. */
function transposeCache(matrix: number[][]): number[][] {
  let cached = transposed.get(matrix);
  if (!cached) {
    const rows = matrix.length;
    const cols = matrix[0].length;
    cached = Array.from({ length: cols }, (_, c) =>
      Array.from({ length: rows }, (_, r) => matrix[r][c]),
    );
    transposed.set(matrix, cached);
  }
  return cached;
}

export function buildBundle(
  name: string,
  descriptor: Descriptor,
  seed: number,
  eos: { margin: number; rampStart: number; rampRate: number },
): Bundle {
  const rng = new Mulberry(seed);
  const { vocab_size, num_layers, hidden_dim } = descriptor;
  const scale = (s: number) => s / Math.sqrt(hidden_dim);
  const matrix = (rows: number, cols: number, s: number): number[][] =>
    Array.from({ length: rows }, () => Array.from({ length: cols }, () => rng.normal() * s));
  return {
    format: BUNDLE_FORMAT,
    version: 1,
    name,
    descriptor,
    weights: {
      embedding: matrix(vocab_size, hidden_dim, scale(0.7)),
      start: matrix(1, hidden_dim, scale(0.7))[0],
      mix: Array.from({ length: num_layers }, () => matrix(hidden_dim, hidden_dim, scale(1.1))),
      mean: Array.from({ length: num_layers }, () => matrix(hidden_dim, hidden_dim, scale(0.9))),
      bias: matrix(num_layers, hidden_dim, 0.1),
      output: matrix(hidden_dim, vocab_size, scale(0.75)),
      eosMargin: eos.margin,
      eosRampStart: eos.rampStart,
      eosRampRate: eos.rampRate,
    },
  };
}

/** Built-in conformance fixture matching the engine's default toy shape. */
export function echoToyBundle(): Bundle {
  return buildBundle(
    "echo-toy",
    { vocab_size: 64, num_layers: 4, hidden_dim: 32, eos_id: 63, max_context: 512 },
    7,
    { margin: 6.0, rampStart: 48, rampRate: 0.008 },
  );
}

export function loadBundle(path: string): Bundle {
  const raw = JSON.parse(readFileSync(path, "utf-8")) as Bundle;
  if (raw.format !== BUNDLE_FORMAT || !raw.descriptor || !raw.weights) {
    throw new Error(`${path} is not a ${BUNDLE_FORMAT} file`);
  }
  return raw;
}
