import { describe, expect, it } from "vitest";

import { assignLabel } from "../src/labels.js";

describe("label assignment", () => {
  it("manifest entry wins", () => {
    const manifest = {
      videos: { clip01: { label: 1 as const, generator: "wav2lip" } },
      default: { label: null, generator: null },
    };
    expect(assignLabel("/data/real/clip01.mp4", "clip01", manifest))
      .toEqual({ label: 1, generator: "wav2lip" });
    expect(assignLabel("/data/real/other.mp4", "other", manifest))
      .toEqual({ label: null, generator: null });
  });

  it("directory structure decides without a manifest", () => {
    expect(assignLabel("/data/real/a.mp4", "a")).toEqual({ label: 0, generator: null });
    expect(assignLabel("/data/fake/b.mp4", "b")).toEqual({ label: 1, generator: "fake" });
    expect(assignLabel("/data/misc/c.mp4", "c")).toEqual({ label: null, generator: null });
  });
});
