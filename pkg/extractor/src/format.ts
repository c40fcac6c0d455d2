/**
 * Landmark JSONL format: the wire contract between this exporter and the
 * biolip pipeline. One header record, then one record per decoded frame,
 * coordinates as 64-bit floats (JSON round-trips them bit-exactly).
 */

import { z } from "zod";

export const headerSchema = z.object({
  type: z.literal("header"),
  video_id: z.string(),
  fps: z.number().positive(),
  label: z.union([z.literal(0), z.literal(1), z.null()]),
  generator: z.union([z.string(), z.null()]),
  landmark_ids: z.array(z.number().int()).min(64),
  commissure_ids: z.tuple([z.number().int(), z.number().int()]),
}).loose();

export const frameSchema = z.object({
  type: z.literal("frame"),
  i: z.number().int().nonnegative(),
  t_ms: z.union([z.number().nonnegative(), z.null()]),
  valid: z.boolean(),
  pts: z.union([z.array(z.tuple([z.number(), z.number(), z.number()])), z.null()]),
});

export type Header = z.infer<typeof headerSchema>;
export type FrameRecord = z.infer<typeof frameSchema>;

export function validateRecords(header: Header, frames: FrameRecord[]): void {
  headerSchema.parse(header);
  const ids = header.landmark_ids;
  if (new Set(ids).size !== ids.length) {
    throw new Error("landmark_ids must be distinct");
  }
  let last = -1;
  for (const frame of frames) {
    frameSchema.parse(frame);
    if (frame.i <= last) {
      throw new Error(`frame index ${frame.i} not increasing`);
    }
    last = frame.i;
    if (frame.valid) {
      if (!frame.pts || frame.pts.length !== ids.length) {
        throw new Error(`frame ${frame.i}: valid frames need ${ids.length} points`);
      }
      for (const p of frame.pts) {
        if (!p.every(Number.isFinite)) {
          throw new Error(`frame ${frame.i}: non-finite coordinate`);
        }
      }
    }
  }
}

/** Serialize one export; validates before writing anything. */
export function toJsonl(header: Header, frames: FrameRecord[]): string {
  validateRecords(header, frames);
  const lines = [JSON.stringify(header)];
  for (const frame of frames) {
    lines.push(JSON.stringify(frame));
  }
  return lines.join("\n") + "\n";
}
