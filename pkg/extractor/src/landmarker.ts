/**
 * Landmark detection backends. The extractor only needs one method:
 * given a decoded frame, return the full face-mesh point list (normalized
 * image coordinates) or null when no face was found.
 *
 * The MediaPipe backend runs the tasks-vision WASM bundle shipped with the
 * npm package; the face landmarker model file is not bundled and must be
 * supplied per deployment (--model). The detector version string is echoed
 * into the output header so downstream analysis can trace id topology.
 */

import type { RawFrame } from "./frames.js";

export interface MeshPoint {
  x: number;
  y: number;
  z: number;
}

export interface Landmarker {
  /** Full mesh for the most prominent face, or null if detection failed. */
  detect(frame: RawFrame): Promise<ReadonlyArray<MeshPoint> | null>;
  /** Identifier recorded in the output header (name@version). */
  version(): string;
  close(): Promise<void>;
}

export interface MediaPipeOptions {
  modelAssetPath: string;
  /** Directory with the vision WASM files; defaults to the npm package's. */
  wasmBasePath?: string;
}

export async function createMediaPipeLandmarker(
  opts: MediaPipeOptions,
): Promise<Landmarker> {
  const vision = await import("@mediapipe/tasks-vision");
  const { FaceLandmarker, FilesetResolver } = vision;
  const wasmBase = opts.wasmBasePath
    ?? new URL("../node_modules/@mediapipe/tasks-vision/wasm", import.meta.url).pathname;
  const fileset = await FilesetResolver.forVisionTasks(wasmBase);
  const landmarker = await FaceLandmarker.createFromOptions(fileset, {
    baseOptions: { modelAssetPath: opts.modelAssetPath },
    runningMode: "VIDEO",
    numFaces: 1,
  });
  return {
    async detect(frame: RawFrame) {
      const image = {
        data: frame.data,
        width: frame.width,
        height: frame.height,
      } as ImageData;
      const result = landmarker.detectForVideo(image, frame.timestampMs ?? frame.index);
      const mesh = result.faceLandmarks?.[0];
      return mesh && mesh.length ? mesh : null;
    },
    version() {
      return "mediapipe-tasks-vision@1.0.1";
    },
    async close() {
      landmarker.close();
    },
  };
}
