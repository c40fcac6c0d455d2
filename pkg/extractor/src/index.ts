export { extractVideo, extractToFile, NoFaceDetectedInAnyFrame } from "./extract.js";
export type { ExtractJob, ExtractResult } from "./extract.js";
export { FfmpegFrameSource, SyntheticFrameSource, UndecodableVideo } from "./frames.js";
export type { FrameSource, RawFrame } from "./frames.js";
export { createMediaPipeLandmarker } from "./landmarker.js";
export type { Landmarker, MeshPoint } from "./landmarker.js";
export { DEFAULT_REGION_MAP, exportIds, loadRegionMap, validateRegionMap } from "./regionmap.js";
export type { RegionMap } from "./regionmap.js";
export { assignLabel, loadLabelsManifest } from "./labels.js";
export { toJsonl, validateRecords, headerSchema, frameSchema } from "./format.js";
export type { Header, FrameRecord } from "./format.js";
