/**
 * Extraction core: frames in, one Landmark JSONL export out. Frames where
 * the detector finds no face (or an incomplete mesh for the configured ids)
 * are emitted with valid=false; a video with no valid frame at all is an
 * error rather than a useless file.
 */

import { writeFileSync } from "node:fs";

import type { FrameSource } from "./frames.js";
import type { Landmarker } from "./landmarker.js";
import { exportIds, type RegionMap } from "./regionmap.js";
import { toJsonl, type FrameRecord, type Header } from "./format.js";

export class NoFaceDetectedInAnyFrame extends Error {}

export interface ExtractJob {
  videoId: string;
  source: FrameSource;
  landmarker: Landmarker;
  regionMap: RegionMap;
  label: 0 | 1 | null;
  generator: string | null;
}

export interface ExtractResult {
  text: string;
  frames: number;
  validFrames: number;
}

export async function extractVideo(job: ExtractJob): Promise<ExtractResult> {
  const ids = exportIds(job.regionMap);
  const maxId = Math.max(...ids);
  const fps = await job.source.fps();
  const records: FrameRecord[] = [];
  let valid = 0;
  for await (const frame of job.source.frames()) {
    const mesh = await job.landmarker.detect(frame);
    if (mesh && mesh.length > maxId) {
      const pts = ids.map((id): [number, number, number] => {
        const p = mesh[id];
        return [p.x, p.y, p.z];
      });
      const finite = pts.every((p) => p.every(Number.isFinite));
      records.push({
        type: "frame",
        i: frame.index,
        t_ms: frame.timestampMs,
        valid: finite,
        pts: finite ? pts : null,
      });
      if (finite) {
        valid += 1;
      }
    } else {
      records.push({
        type: "frame",
        i: frame.index,
        t_ms: frame.timestampMs,
        valid: false,
        pts: null,
      });
    }
  }
  if (valid === 0) {
    throw new NoFaceDetectedInAnyFrame(job.videoId);
  }
  const header: Header = {
    type: "header",
    video_id: job.videoId,
    fps,
    label: job.label,
    generator: job.generator,
    landmark_ids: ids,
    commissure_ids: job.regionMap.commissure_ids,
    detector: job.landmarker.version(),
  } as Header;
  return { text: toJsonl(header, records), frames: records.length, validFrames: valid };
}

export async function extractToFile(job: ExtractJob, outPath: string): Promise<ExtractResult> {
  const result = await extractVideo(job);
  writeFileSync(outPath, result.text);
  return result;
}
