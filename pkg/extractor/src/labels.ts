/**
 * Label and generator-tag assignment. A labels manifest wins when given:
 *
 *   {"videos": {"clip01": {"label": 1, "generator": "wav2lip"}},
 *    "default": {"label": null, "generator": null}}
 *
 * Without one, the parent directory name decides: "real" -> 0,
 * "fake"/"synthetic" or a generator name -> 1 with the directory as tag.
 */

import { readFileSync } from "node:fs";
import { basename, dirname } from "node:path";

export interface LabelAssignment {
  label: 0 | 1 | null;
  generator: string | null;
}

export interface LabelsManifest {
  videos?: Record<string, LabelAssignment>;
  default?: LabelAssignment;
}

export function loadLabelsManifest(path: string): LabelsManifest {
  return JSON.parse(readFileSync(path, "utf-8")) as LabelsManifest;
}

const REAL_DIRS = new Set(["real", "genuine", "authentic", "bonafide"]);

export function assignLabel(videoPath: string, videoId: string,
                            manifest?: LabelsManifest): LabelAssignment {
  if (manifest) {
    const entry = manifest.videos?.[videoId];
    if (entry) {
      return entry;
    }
    if (manifest.default) {
      return manifest.default;
    }
  }
  const dir = basename(dirname(videoPath)).toLowerCase();
  if (REAL_DIRS.has(dir)) {
    return { label: 0, generator: null };
  }
  if (dir === "fake" || dir === "synthetic") {
    return { label: 1, generator: dir };
  }
  return { label: null, generator: null };
}
