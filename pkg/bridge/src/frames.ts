/**
 * Length-prefixed JSON frames: an ASCII decimal byte length of the
 * payload, a newline, the UTF-8 JSON payload, and a trailing newline.
 * Readable by eye in a pipe dump, trivial to parse incrementally.
 */

import type { Readable, Writable } from "node:stream";

const MAX_FRAME_BYTES = 1 << 30;

export class FrameError extends Error {}

export function encodeFrame(payload: unknown): Buffer {
  const body = Buffer.from(JSON.stringify(payload), "utf-8");
  return Buffer.concat([Buffer.from(`${body.length}\n`, "ascii"), body, Buffer.from("\n")]);
}

export function writeFrame(stream: Writable, payload: unknown): void {
  stream.write(encodeFrame(payload));
}

/** Incremental parser fed with arbitrary chunk boundaries. */
export class FrameDecoder {
  private buffer: Buffer = Buffer.alloc(0);

  push(chunk: Buffer): unknown[] {
    this.buffer = Buffer.concat([this.buffer, chunk]);
    const frames: unknown[] = [];
    for (;;) {
      const newline = this.buffer.indexOf(0x0a);
      if (newline < 0) break;
      const header = this.buffer.subarray(0, newline).toString("ascii");
      if (!/^\d+$/.test(header)) {
        throw new FrameError(`malformed frame length ${JSON.stringify(header)}`);
      }
      const length = Number(header);
      if (length > MAX_FRAME_BYTES) {
        throw new FrameError(`unreasonable frame length ${length}`);
      }
      const end = newline + 1 + length;
      if (this.buffer.length < end + 1) break; // payload + trailer not yet here
      const body = this.buffer.subarray(newline + 1, end).toString("utf-8");
      if (this.buffer[end] !== 0x0a) {
        throw new FrameError("missing frame trailer");
      }
      this.buffer = this.buffer.subarray(end + 1);
      let parsed: unknown;
      try {
        parsed = JSON.parse(body);
      } catch (error) {
        throw new FrameError(`frame is not valid JSON: ${(error as Error).message}`);
      }
      if (typeof parsed !== "object" || parsed === null || !("type" in parsed)) {
        throw new FrameError("frame must be an object with a type field");
      }
      frames.push(parsed);
    }
    return frames;
  }
}

/** Async frame iterator over a readable stream. */
export async function* readFrames(stream: Readable): AsyncGenerator<unknown> {
  const decoder = new FrameDecoder();
  for await (const chunk of stream) {
    for (const frame of decoder.push(chunk as Buffer)) {
      yield frame;
    }
  }
}
