/**
 * Request loop: announce the descriptor once, then answer batch
 * requests one at a time until shutdown. Per-prefix failures become
 * error objects inside the result so the connection survives them;
 * protocol violations are fatal.
 */

import type { Readable, Writable } from "node:stream";
import { FrameError, readFrames, writeFrame } from "./frames.js";
import { ContextOverflow, ToyModel } from "./model.js";

export const PROTOCOL_VERSION = 1;

interface BatchFrame {
  type: "batch";
  id: number;
  prefixes: number[][];
}

function isBatch(frame: unknown): frame is BatchFrame {
  const f = frame as BatchFrame;
  return (
    f.type === "batch" &&
    typeof f.id === "number" &&
    Array.isArray(f.prefixes) &&
    f.prefixes.every((p) => Array.isArray(p))
  );
}

export function helloFrame(model: ToyModel, name: string) {
  return {
    type: "hello",
    protocol: PROTOCOL_VERSION,
    model: name,
    descriptor: model.descriptor,
  };
}

export function handleBatch(model: ToyModel, frame: BatchFrame) {
  const outputs = frame.prefixes.map((prefix) => {
    try {
      return model.step(prefix);
    } catch (error) {
      if (error instanceof ContextOverflow) {
        return { error: { code: "context-overflow", message: error.message } };
      }
      if (error instanceof RangeError) {
        return { error: { code: "invalid-token", message: error.message } };
      }
      throw error;
    }
  });
  return { type: "result", id: frame.id, outputs };
}

export async function serve(
  model: ToyModel,
  name: string,
  input: Readable,
  output: Writable,
): Promise<number> {
  writeFrame(output, helloFrame(model, name));
  try {
    for await (const frame of readFrames(input)) {
      const f = frame as { type: string };
      if (f.type === "shutdown") {
        return 0;
      }
      if (isBatch(frame)) {
        writeFrame(output, handleBatch(model, frame));
      } else {
        writeFrame(output, { type: "fatal", message: `unexpected frame type ${f.type}` });
        return 1;
      }
    }
  } catch (error) {
    if (error instanceof FrameError) {
      writeFrame(output, { type: "fatal", message: error.message });
      return 1;
    }
    throw error;
  }
  return 0; // engine closed the pipe
}
