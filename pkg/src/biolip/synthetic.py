"""Synthetic lip-trajectory generator: a ground-truth oracle for the
pipeline, no recorded data required.

Smooth sequences model articulated speech as chains of point-to-point
minimum-jerk strokes, y(tau) = y0 + dy * (10 tau^3 - 15 tau^4 + 6 tau^5)
per stroke, which have the bell-shaped velocity profile of biological
articulators and zero velocity/acceleration at stroke boundaries. Every
landmark follows the shared gesture with its own amplitude factor,
region multiplier (lower-lip regions move more than the upper lip) and
a small temporal phase offset; x and z move the same way at reduced
amplitude.

Strokes pause with probability pause_prob (inter-phrase stillness), and
every sequence carries white sensor noise whose std is drawn per video
from sensor_sigma_range: landmark detectors always localize with some
error, and recording quality varies between videos. Both classes get
it, so it is not a label cue by itself.

Jittery counterparts add per-frame coordinate noise on top: white noise
models frame-independent synthesis error; the "smoothed" mode low-pass
filters the noise with a one-pole filter (equal marginal std) to
emulate generators that regularize first-order continuity, which
concentrates the remaining error at low frequencies.

The two commissure landmarks are pinned at (-0.5, 0, 0) and (0.5, 0, 0)
and excluded from all noise, so generated sequences are exactly in
normalized form and survive the JSONL round trip bit-exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .errors import IoFailure
from .regions import RegionMap, default_region_map
from .trajectory import NormalizedSequence, normalized_to_raw, write_sequence_jsonl


@dataclass(frozen=True)
class SynthConfig:
    n_frames: int = 120
    fps: float = 25.0
    n_segments: int = 6                      # syllable-like strokes per sequence
    amp_range: tuple[float, float] = (0.05, 0.12)   # stroke amplitude, normalized units
    seg_len_range: tuple[int, int] = (5, 12)        # stroke duration, frames
    pause_prob: float = 0.35                 # chance a stroke holds still instead
    pause_len_range: tuple[int, int] = (16, 40)     # hold duration, frames
    sensor_sigma_range: tuple[float, float] = (0.001, 0.004)  # per-video localization noise
    jitter_sigma: float = 0.01
    jitter_mode: str = "white"               # "white" | "smoothed"
    smooth_alpha: float = 0.95               # one-pole coefficient for "smoothed"
    region_amp: dict = field(default_factory=lambda: {
        "lower_inner": 1.25, "lower_outer": 1.15, "upper": 0.7, "perioral": 0.9})
    axis_amp: tuple[float, float, float] = (0.3, 1.0, 0.15)  # x, y, z share
    phase_jitter: float = 0.75               # frames, per-landmark offset
    amp_jitter: float = 0.15                 # per-landmark amplitude spread

    def __post_init__(self):
        if self.n_frames < 25:
            raise ValueError("n_frames must be >= 25 (one window)")
        if self.seg_len_range[0] < 4 or self.pause_len_range[0] < 4:
            raise ValueError("stroke and pause durations must be >= 4 frames")
        if not (0 < self.amp_range[0] <= self.amp_range[1]):
            raise ValueError("amplitudes must be positive")
        if self.jitter_sigma < 0:
            raise ValueError("jitter_sigma must be >= 0")
        if self.jitter_mode not in ("white", "smoothed"):
            raise ValueError(f"unknown jitter_mode {self.jitter_mode!r}")
        if not 0.0 <= self.smooth_alpha < 1.0:
            raise ValueError("smooth_alpha must lie in [0, 1)")
        if not 0.0 <= self.pause_prob < 1.0:
            raise ValueError("pause_prob must lie in [0, 1)")
        if self.sensor_sigma_range[0] < 0 or self.sensor_sigma_range[0] > self.sensor_sigma_range[1]:
            raise ValueError("sensor_sigma_range must be ordered and non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "SynthConfig":
        doc = dict(doc)
        for key in ("amp_range", "axis_amp"):
            if key in doc:
                doc[key] = tuple(doc[key])
        if "seg_len_range" in doc:
            doc["seg_len_range"] = tuple(int(v) for v in doc["seg_len_range"])
        return cls(**doc)


def min_jerk(tau):
    """Position profile of a unit minimum-jerk stroke on tau in [0, 1]."""
    tau = np.clip(tau, 0.0, 1.0)
    return 10.0 * tau ** 3 - 15.0 * tau ** 4 + 6.0 * tau ** 5


def min_jerk_velocity(tau):
    tau = np.clip(tau, 0.0, 1.0)
    return 30.0 * tau ** 2 - 60.0 * tau ** 3 + 30.0 * tau ** 4


def min_jerk_acceleration(tau):
    tau = np.clip(tau, 0.0, 1.0)
    return 60.0 * tau - 180.0 * tau ** 2 + 120.0 * tau ** 3


class _Gesture:
    """Piecewise minimum-jerk chain evaluated at arbitrary real times."""

    def __init__(self, rng: np.random.Generator, cfg: SynthConfig, total_frames: float):
        starts = [0.0]
        waypoints = [0.0]
        durations = []
        open_phase = True
        strokes = 0
        # at least n_segments strokes, and enough to cover the timeline
        while strokes < cfg.n_segments or starts[-1] < total_frames:
            pause = rng.random() < cfg.pause_prob
            if pause:
                d = float(rng.integers(cfg.pause_len_range[0], cfg.pause_len_range[1] + 1))
                target = waypoints[-1]
            else:
                d = float(rng.integers(cfg.seg_len_range[0], cfg.seg_len_range[1] + 1))
                amp = float(rng.uniform(*cfg.amp_range))
                target = amp if open_phase else float(rng.uniform(0.0, 0.25 * amp))
                open_phase = not open_phase
                strokes += 1
            durations.append(d)
            waypoints.append(target)
            starts.append(starts[-1] + d)
        self.starts = np.asarray(starts)
        self.waypoints = np.asarray(waypoints)
        self.durations = np.asarray(durations)

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        seg = np.clip(np.searchsorted(self.starts, t, side="right") - 1,
                      0, len(self.durations) - 1)
        tau = (t - self.starts[seg]) / self.durations[seg]
        y0 = self.waypoints[seg]
        dy = self.waypoints[seg + 1] - y0
        return y0 + dy * min_jerk(tau)


def _base_layout(rng: np.random.Generator) -> np.ndarray:
    """Rest positions for the 64 landmarks (commissures overwritten later)."""
    base = np.empty((64, 3))
    base[:, 0] = rng.uniform(-0.6, 0.6, 64)
    base[:, 1] = rng.uniform(-0.35, 0.35, 64)
    base[:, 2] = rng.uniform(-0.1, 0.1, 64)
    return base


def gen_smooth(cfg: SynthConfig, seed, video_id: str = "synth_smooth_0",
               rm: RegionMap | None = None) -> NormalizedSequence:
    """One biomechanically smooth sequence, label 0, already normalized."""
    rm = rm or default_region_map()
    rng = np.random.default_rng(seed)
    ids = rm.all_ids()
    rows = rm.region_rows(ids)
    region_mult = np.empty(64)
    for name, idx in rows.items():
        region_mult[idx] = cfg.region_amp[name]

    pos = {lm: i for i, lm in enumerate(ids)}
    c_left = pos[rm.commissure_ids[0]]
    c_right = pos[rm.commissure_ids[1]]

    margin = cfg.phase_jitter + 1.0
    gestures = [_Gesture(rng, cfg, cfg.n_frames + 2 * margin) for _ in range(3)]
    base = _base_layout(rng)
    phase = rng.uniform(-cfg.phase_jitter, cfg.phase_jitter, 64)
    amp_factor = 1.0 + rng.uniform(-cfg.amp_jitter, cfg.amp_jitter, 64)

    t_frames = np.arange(cfg.n_frames, dtype=np.float64) + margin
    frames = np.empty((cfg.n_frames, 64, 3))
    for axis in range(3):
        g = gestures[axis]
        scale = cfg.axis_amp[axis]
        for lm in range(64):
            frames[:, lm, axis] = (base[lm, axis]
                                   + scale * region_mult[lm] * amp_factor[lm]
                                   * g(t_frames + phase[lm]))
    sensor = rng.uniform(*cfg.sensor_sigma_range)
    if sensor > 0:
        frames += rng.normal(0.0, sensor, size=frames.shape)
    frames[:, c_left, :] = (-0.5, 0.0, 0.0)
    frames[:, c_right, :] = (0.5, 0.0, 0.0)

    return NormalizedSequence(
        video_id=video_id, fps=cfg.fps, label=0, generator_tag="synth_smooth",
        landmark_ids=ids, frames=frames,
        retained_indices=np.arange(cfg.n_frames, dtype=np.int64))


def _jitter_noise(rng: np.random.Generator, cfg: SynthConfig, shape) -> np.ndarray:
    if cfg.jitter_mode == "white":
        return rng.normal(0.0, cfg.jitter_sigma, size=shape)
    # one-pole low-pass with stationary marginal std == jitter_sigma
    alpha = cfg.smooth_alpha
    drive = np.sqrt(1.0 - alpha * alpha) * cfg.jitter_sigma
    eta = rng.standard_normal(shape)
    out = np.empty(shape)
    out[0] = cfg.jitter_sigma * eta[0]
    for t in range(1, shape[0]):
        out[t] = alpha * out[t - 1] + drive * eta[t]
    return out


def jitter_from_smooth(smooth: NormalizedSequence, cfg: SynthConfig, seed,
                       video_id: str | None = None,
                       rm: RegionMap | None = None) -> NormalizedSequence:
    """Add per-frame coordinate noise to an existing smooth sequence
    (commissures stay pinned), label 1. Lets one smooth base host
    several jitter variants for paired comparisons."""
    if not cfg.jitter_sigma > 0:
        raise ValueError("jitter needs jitter_sigma > 0")
    rm = rm or default_region_map()
    rng = np.random.default_rng(seed)
    noise = _jitter_noise(rng, cfg, smooth.frames.shape)
    pos = {lm: i for i, lm in enumerate(smooth.landmark_ids)}
    noise[:, pos[rm.commissure_ids[0]], :] = 0.0
    noise[:, pos[rm.commissure_ids[1]], :] = 0.0
    return NormalizedSequence(
        video_id=video_id or smooth.video_id,
        fps=smooth.fps,
        label=1,
        generator_tag="synth_jitter" if cfg.jitter_mode == "white" else "synth_jitter_smoothed",
        landmark_ids=list(smooth.landmark_ids),
        frames=smooth.frames + noise,
        retained_indices=smooth.retained_indices.copy())


def gen_jittery(cfg: SynthConfig, seed, video_id: str = "synth_jitter_0",
                rm: RegionMap | None = None) -> NormalizedSequence:
    """gen_smooth plus per-frame coordinate noise, label 1."""
    rm = rm or default_region_map()
    root = np.random.SeedSequence(seed) if not isinstance(seed, np.random.SeedSequence) else seed
    smooth_ss, noise_ss = root.spawn(2)
    seq = gen_smooth(cfg, smooth_ss, video_id=video_id, rm=rm)
    return jitter_from_smooth(seq, cfg, noise_ss, video_id=video_id, rm=rm)


def gen_dataset(cfg: SynthConfig, n_real: int, n_fake: int, seed,
                out_dir, rm: RegionMap | None = None) -> list[Path]:
    """Write n_real smooth and n_fake jittery sequences as Landmark JSONL.

    Per-sequence seeds are spawned from the root seed, so re-running
    with the same arguments reproduces the files byte for byte.
    """
    if n_real <= 0 or n_fake <= 0:
        raise ValueError("counts must be positive")
    rm = rm or default_region_map()
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = root.spawn(n_real + n_fake)
    paths = []
    for i in range(n_real):
        vid = f"synth_smooth_{i:04d}"
        seq = gen_smooth(cfg, children[i], video_id=vid, rm=rm)
        paths.append(_write(seq, rm, out / f"{vid}.jsonl"))
    for i in range(n_fake):
        vid = f"synth_jitter_{i:04d}"
        seq = gen_jittery(cfg, children[n_real + i], video_id=vid, rm=rm)
        paths.append(_write(seq, rm, out / f"{vid}.jsonl"))
    return paths


def _write(seq: NormalizedSequence, rm: RegionMap, path: Path) -> Path:
    raw = normalized_to_raw(seq, rm.commissure_ids)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            write_sequence_jsonl(raw, fh)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return path


def save_synth_config(cfg: SynthConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(cfg.to_dict(), fh, indent=2)
        fh.write("\n")


def load_synth_config(path) -> SynthConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return SynthConfig.from_dict(json.load(fh))
