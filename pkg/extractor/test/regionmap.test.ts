import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { describe, expect, it } from "vitest";

import {
  DEFAULT_REGION_MAP,
  exportIds,
  loadRegionMap,
  validateRegionMap,
} from "../src/regionmap.js";

describe("region map", () => {
  it("default map partitions 64 ids as 9/9/22/24", () => {
    validateRegionMap(DEFAULT_REGION_MAP);
    expect(DEFAULT_REGION_MAP.regions.lower_inner).toHaveLength(9);
    expect(DEFAULT_REGION_MAP.regions.lower_outer).toHaveLength(9);
    expect(DEFAULT_REGION_MAP.regions.upper).toHaveLength(22);
    expect(DEFAULT_REGION_MAP.regions.perioral).toHaveLength(24);
  });

  it("default commissures are inside the 64, so exportIds is 64 long", () => {
    const ids = exportIds(DEFAULT_REGION_MAP);
    expect(ids).toHaveLength(64);
    expect(ids).toContain(61);
    expect(ids).toContain(291);
  });

  it("external commissures are appended", () => {
    const rm = {
      ...DEFAULT_REGION_MAP,
      commissure_ids: [900, 901] as [number, number],
    };
    const ids = exportIds(rm);
    expect(ids).toHaveLength(66);
    expect(ids.slice(-2)).toEqual([900, 901]);
  });

  it("loads and validates the shared JSON format", () => {
    const dir = mkdtempSync(join(tmpdir(), "rm-"));
    const path = join(dir, "map.json");
    writeFileSync(path, JSON.stringify(DEFAULT_REGION_MAP));
    expect(loadRegionMap(path).commissure_ids).toEqual([61, 291]);

    const broken = {
      ...DEFAULT_REGION_MAP,
      regions: { ...DEFAULT_REGION_MAP.regions, upper: [1, 2, 3] },
    };
    writeFileSync(path, JSON.stringify(broken));
    expect(() => loadRegionMap(path)).toThrow(/22/);
  });
});
