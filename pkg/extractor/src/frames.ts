/**
 * Frame sources: anything that can hand the extractor decoded RGBA frames
 * plus the container frame rate. The ffmpeg-based source covers real video
 * files (requires ffmpeg/ffprobe on PATH); tests use the synthetic source.
 */

import { spawn, spawnSync } from "node:child_process";

export interface RawFrame {
  index: number;
  timestampMs: number | null;
  width: number;
  height: number;
  data: Uint8ClampedArray; // RGBA
}

export interface FrameSource {
  fps(): Promise<number>;
  frames(): AsyncGenerator<RawFrame>;
}

export class UndecodableVideo extends Error {}

function parseRate(rate: string): number {
  const [num, den] = rate.split("/").map(Number);
  if (!num || !den) {
    throw new UndecodableVideo(`bad frame rate ${rate}`);
  }
  return num / den;
}

export class FfmpegFrameSource implements FrameSource {
  private meta?: { fps: number; width: number; height: number };

  constructor(
    private readonly path: string,
    private readonly bins: { ffmpeg?: string; ffprobe?: string } = {},
  ) {}

  private probe(): { fps: number; width: number; height: number } {
    if (this.meta) {
      return this.meta;
    }
    const probe = spawnSync(
      this.bins.ffprobe ?? "ffprobe",
      ["-v", "error", "-select_streams", "v:0",
       "-show_entries", "stream=avg_frame_rate,width,height",
       "-of", "json", this.path],
      { encoding: "utf-8" },
    );
    if (probe.error || probe.status !== 0) {
      throw new UndecodableVideo(
        `ffprobe failed on ${this.path}: ${probe.error ?? probe.stderr}`);
    }
    const stream = JSON.parse(probe.stdout).streams?.[0];
    if (!stream) {
      throw new UndecodableVideo(`no video stream in ${this.path}`);
    }
    this.meta = {
      fps: parseRate(stream.avg_frame_rate),
      width: stream.width,
      height: stream.height,
    };
    return this.meta;
  }

  async fps(): Promise<number> {
    return this.probe().fps;
  }

  async *frames(): AsyncGenerator<RawFrame> {
    const { fps, width, height } = this.probe();
    const frameBytes = width * height * 4;
    const proc = spawn(
      this.bins.ffmpeg ?? "ffmpeg",
      ["-v", "error", "-i", this.path, "-f", "rawvideo", "-pix_fmt", "rgba", "pipe:1"],
      { stdio: ["ignore", "pipe", "pipe"] },
    );
    let pending = Buffer.alloc(0);
    let index = 0;
    for await (const chunk of proc.stdout) {
      pending = pending.length ? Buffer.concat([pending, chunk]) : chunk;
      while (pending.length >= frameBytes) {
        const frame = pending.subarray(0, frameBytes);
        pending = pending.subarray(frameBytes);
        yield {
          index,
          timestampMs: (index / fps) * 1000,
          width,
          height,
          data: new Uint8ClampedArray(frame),
        };
        index += 1;
      }
    }
    const code: number = await new Promise((resolve) => proc.on("close", resolve));
    if (code !== 0) {
      throw new UndecodableVideo(`ffmpeg exited ${code} on ${this.path}`);
    }
    if (index === 0) {
      throw new UndecodableVideo(`no frames decoded from ${this.path}`);
    }
  }
}

/** Deterministic in-memory source for tests and dry runs. */
export class SyntheticFrameSource implements FrameSource {
  constructor(
    private readonly opts: { nFrames: number; fps: number; width?: number; height?: number },
  ) {}

  async fps(): Promise<number> {
    return this.opts.fps;
  }

  async *frames(): AsyncGenerator<RawFrame> {
    const width = this.opts.width ?? 64;
    const height = this.opts.height ?? 64;
    for (let i = 0; i < this.opts.nFrames; i++) {
      yield {
        index: i,
        timestampMs: (i / this.opts.fps) * 1000,
        width,
        height,
        data: new Uint8ClampedArray(width * height * 4),
      };
    }
  }
}
