import type { Landmarker, MeshPoint } from "../src/landmarker.js";
import type { RawFrame } from "../src/frames.js";

/** Deterministic 478-point mesh with sinusoidal mouth motion. */
export function mockLandmarker(failOn: Set<number> = new Set()): Landmarker {
  return {
    async detect(frame: RawFrame): Promise<ReadonlyArray<MeshPoint> | null> {
      if (failOn.has(frame.index)) {
        return null;
      }
      const t = frame.index;
      const mesh: MeshPoint[] = [];
      for (let id = 0; id < 478; id++) {
        const phase = (id % 13) / 13;
        mesh.push({
          x: 0.3 + 0.4 * ((id * 37) % 100) / 100,
          y: 0.4 + 0.2 * ((id * 53) % 100) / 100
            + 0.03 * Math.sin(0.4 * t + phase),
          z: 0.01 * ((id * 7) % 10),
        });
      }
      mesh[61] = { x: 0.35, y: 0.5, z: 0.0 };
      mesh[291] = { x: 0.65, y: 0.5, z: 0.0 };
      return mesh;
    },
    version() {
      return "mock@1";
    },
    async close() {},
  };
}
