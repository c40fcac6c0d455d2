/**
 * Region map: which face-mesh landmark ids to export and in what order.
 * Mirrors the biolip default (lips rings minus shared corners plus the
 * perioral surround); face-mesh releases shift ids, so deployments can
 * override it with the same JSON file the Python side reads.
 */

import { readFileSync } from "node:fs";

export interface RegionMap {
  commissure_ids: [number, number];
  regions: Record<string, number[]>;
}

const REGION_SIZES: Record<string, number> = {
  lower_inner: 9,
  lower_outer: 9,
  upper: 22,
  perioral: 24,
};

export const DEFAULT_REGION_MAP: RegionMap = {
  commissure_ids: [61, 291],
  regions: {
    lower_inner: [95, 88, 178, 87, 14, 317, 402, 318, 324],
    lower_outer: [146, 91, 181, 84, 17, 314, 405, 321, 375],
    upper: [61, 185, 40, 39, 37, 0, 267, 269, 270, 409, 291,
            78, 191, 80, 81, 82, 13, 312, 311, 310, 415, 308],
    perioral: [57, 186, 92, 165, 167, 164, 393, 391, 322, 410, 287,
               273, 335, 406, 313, 18, 83, 182, 106, 43, 212, 432, 202, 422],
  },
};

export function validateRegionMap(rm: RegionMap): void {
  const names = Object.keys(REGION_SIZES);
  for (const name of names) {
    const ids = rm.regions[name];
    if (!ids || ids.length !== REGION_SIZES[name]) {
      throw new Error(`region ${name} must hold ${REGION_SIZES[name]} ids`);
    }
  }
  const all = names.flatMap((n) => rm.regions[n]);
  if (new Set(all).size !== 64) {
    throw new Error("regions must partition 64 distinct ids");
  }
  if (rm.commissure_ids.length !== 2 || rm.commissure_ids[0] === rm.commissure_ids[1]) {
    throw new Error("commissure_ids must be two distinct ids");
  }
}

/** The 64 region ids in canonical order, plus external commissures if any. */
export function exportIds(rm: RegionMap): number[] {
  const ids = ["lower_inner", "lower_outer", "upper", "perioral"]
    .flatMap((n) => rm.regions[n]);
  for (const cid of rm.commissure_ids) {
    if (!ids.includes(cid)) {
      ids.push(cid);
    }
  }
  return ids;
}

export function loadRegionMap(path: string): RegionMap {
  const doc = JSON.parse(readFileSync(path, "utf-8")) as RegionMap;
  validateRegionMap(doc);
  return doc;
}
