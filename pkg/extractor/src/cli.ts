#!/usr/bin/env node
/**
 * extract_landmarks: batch video -> Landmark JSONL exporter.
 *
 * Requires ffmpeg/ffprobe on PATH for decoding and a face landmarker
 * model file (--model). Output files feed `biolip extract` directly.
 */

import { existsSync, mkdirSync } from "node:fs";
import { basename, extname, join } from "node:path";

import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { extractToFile } from "./extract.js";
import { FfmpegFrameSource } from "./frames.js";
import { createMediaPipeLandmarker } from "./landmarker.js";
import { assignLabel, loadLabelsManifest } from "./labels.js";
import { DEFAULT_REGION_MAP, loadRegionMap } from "./regionmap.js";

export async function run(argv: string[]): Promise<number> {
  const args = await yargs(argv)
    .scriptName("extract_landmarks")
    .option("in", { type: "string", array: true, demandOption: true,
                    describe: "input video file(s)" })
    .option("out", { type: "string", demandOption: true,
                     describe: "output directory for JSONL files" })
    .option("model", { type: "string", demandOption: true,
                       describe: "face landmarker model file (.task)" })
    .option("region-map", { type: "string",
                            describe: "region map JSON (default: built-in map)" })
    .option("labels", { type: "string",
                        describe: "labels manifest JSON" })
    .option("wasm", { type: "string",
                      describe: "override the tasks-vision WASM directory" })
    .strict()
    .fail((msg, err) => {
      // yargs usage failures must exit 2, domain errors are handled below
      if (msg) {
        console.error(msg);
        process.exit(2);
      }
      throw err;
    })
    .parse();

  const regionMap = args["region-map"] ? loadRegionMap(args["region-map"]) : DEFAULT_REGION_MAP;
  const manifest = args.labels ? loadLabelsManifest(args.labels) : undefined;
  mkdirSync(args.out, { recursive: true });

  const landmarker = await createMediaPipeLandmarker({
    modelAssetPath: args.model,
    wasmBasePath: args.wasm,
  });
  let failures = 0;
  try {
    for (const input of args.in) {
      if (!existsSync(input)) {
        console.error(`missing input: ${input}`);
        failures += 1;
        continue;
      }
      const videoId = basename(input, extname(input));
      const { label, generator } = assignLabel(input, videoId, manifest);
      const outPath = join(args.out, `${videoId}.jsonl`);
      try {
        const result = await extractToFile({
          videoId,
          source: new FfmpegFrameSource(input),
          landmarker,
          regionMap,
          label,
          generator,
        }, outPath);
        console.log(`${videoId}: ${result.validFrames}/${result.frames} valid frames -> ${outPath}`);
      } catch (err) {
        console.error(`${videoId}: ${(err as Error).message}`);
        failures += 1;
      }
    }
  } finally {
    await landmarker.close();
  }
  return failures === 0 ? 0 : 1;
}

const invokedDirectly = process.argv[1] && import.meta.url.endsWith(basename(process.argv[1]));
if (invokedDirectly) {
  run(hideBin(process.argv)).then(
    (code) => process.exit(code),
    (err) => {
      console.error(String(err));
      process.exit(1);
    },
  );
}
