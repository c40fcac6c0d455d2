"""Sliding-window kinematic features over normalized landmark trajectories.

Three representations per 25-frame window (stride 5, one second at 25 fps):

*   ``x_s`` — per landmark, per enabled axis, per derivative order k, the
    population standard deviation of the k-th forward difference of the
    coordinate series (order 0 is the raw series). Orders 0..3 read as
    displacement, velocity, acceleration and jerk in frame units.
*   ``X_t`` — the full per-frame series and its padded differences,
    stacked column-wise so the classifier sees the raw dynamics.
*   ``x_r`` — eight anatomical amplitude ratios between region-mean
    displacement stds (always computed on the y axis).

Feature layout (both x_s entries and X_t columns): order-major blocks;
within an order, enabled axes in (x, y, z) order; within an axis, the 64
landmarks in the file's landmark_ids order. Defaults (y only, orders
0-3) give a 256-dim x_s and a 25x256 X_t.

Difference padding: the k-th difference series has length T-k; it is
padded at the front by repeating its first value k times, so row t of
every column describes dynamics ending at frame t.

Feature cache file: 16-byte header (magic ``BLFC``, u8 version, u8
flags, u16 reserved, u32 record count, u32 floats per record), then one
record per window of little-endian float32:
``[video_index, label(-1 if unknown), window_start, fps]`` followed by
X_t flattened row-major, x_s, x_r. Video ids and the config echo live in
a ``<cache>.meta.json`` sidecar.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import SequenceTooShort
from .regions import RegionMap
from .trajectory import NormalizedSequence

AXIS_INDEX = {"x": 0, "y": 1, "z": 2}
EPS_RATIO = 1e-9
RATIO_CLAMP = 1e6

_CACHE_MAGIC = b"BLFC"
_CACHE_VERSION = 1
_CACHE_HEADER = struct.Struct("<4sBBHII")  # magic, version, flags, reserved, n_records, floats/record


@dataclass(frozen=True)
class FeatureConfig:
    window_len: int = 25
    stride: int = 5
    axes: tuple[str, ...] = ("y",)
    orders: tuple[int, ...] = (0, 1, 2, 3)

    def __post_init__(self):
        if not self.axes or any(a not in AXIS_INDEX for a in self.axes):
            raise ValueError("axes must be a nonempty subset of x, y, z")
        if not self.orders or any(k not in (0, 1, 2, 3) for k in self.orders):
            raise ValueError("orders must be a nonempty subset of 0..3")
        if len(set(self.axes)) != len(self.axes) or len(set(self.orders)) != len(self.orders):
            raise ValueError("axes and orders must not repeat")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.window_len < max(self.orders) + 1:
            raise ValueError("window too short for the highest difference order")
        if self.window_len < 4 and 3 in self.orders:
            raise ValueError("jerk needs at least 4 samples per window")

    @property
    def n_axes(self) -> int:
        return len(self.axes)

    @property
    def n_orders(self) -> int:
        return len(self.orders)

    def feature_dim(self, n_landmarks: int = 64) -> int:
        return n_landmarks * self.n_axes * self.n_orders

    def to_dict(self) -> dict:
        return {"window_len": self.window_len, "stride": self.stride,
                "axes": list(self.axes), "orders": list(self.orders)}

    @classmethod
    def from_dict(cls, doc: dict) -> "FeatureConfig":
        kw = {}
        if "window_len" in doc:
            kw["window_len"] = int(doc["window_len"])
        if "stride" in doc:
            kw["stride"] = int(doc["stride"])
        if "axes" in doc:
            kw["axes"] = tuple(doc["axes"])
        if "orders" in doc:
            kw["orders"] = tuple(int(k) for k in doc["orders"])
        return cls(**kw)


@dataclass
class WindowFeatures:
    video_id: str
    window_start: int            # offset into the retained frame sequence
    x_t: np.ndarray              # (window_len, D)
    x_s: np.ndarray              # (D,)
    x_r: np.ndarray              # (8,)
    label: int | None


@dataclass
class VideoFeatures:
    """All windows of one video, stacked for batch processing."""

    video_id: str
    label: int | None
    generator_tag: str | None
    fps: float
    window_starts: np.ndarray    # (W,)
    x_t: np.ndarray              # (W, T, D)
    x_s: np.ndarray              # (W, D)
    x_r: np.ndarray              # (W, 8)

    @property
    def n_windows(self) -> int:
        return self.x_s.shape[0]


def window_count(n_frames: int, window_len: int, stride: int) -> int:
    if n_frames < window_len:
        return 0
    return (n_frames - window_len) // stride + 1


def window_offsets(n_frames: int, cfg: FeatureConfig) -> np.ndarray:
    """Start offsets 0, stride, 2*stride, ... Raises when no window fits."""
    count = window_count(n_frames, cfg.window_len, cfg.stride)
    if count == 0:
        raise SequenceTooShort(
            f"{n_frames} frames < window of {cfg.window_len}")
    return np.arange(count) * cfg.stride


def windows(seq: NormalizedSequence, cfg: FeatureConfig):
    """Views over the sequence's frames, one (T, 64, 3) array per window."""
    offs = window_offsets(len(seq), cfg)
    return [(int(o), seq.frames[o:o + cfg.window_len]) for o in offs]


def _axis_series(window: np.ndarray, axis: str) -> np.ndarray:
    # window (T, 64, 3) -> (T, 64) for one axis
    return window[:, :, AXIS_INDEX[axis]]


def kinematic_stats(window: np.ndarray, cfg: FeatureConfig) -> np.ndarray:
    """Population std of each enabled difference order, per landmark/axis."""
    T = window.shape[0]
    if T != cfg.window_len:
        raise ValueError(f"window has {T} frames, config says {cfg.window_len}")
    blocks = []
    for k in cfg.orders:
        for axis in cfg.axes:
            series = _axis_series(window, axis)
            d = np.diff(series, n=k, axis=0) if k else series
            blocks.append(d.std(axis=0))  # population convention
    return np.concatenate(blocks)


def temporal_tensor(window: np.ndarray, cfg: FeatureConfig) -> np.ndarray:
    """Raw series and front-padded differences, stacked column-wise."""
    T = window.shape[0]
    if T != cfg.window_len:
        raise ValueError(f"window has {T} frames, config says {cfg.window_len}")
    cols = []
    for k in cfg.orders:
        for axis in cfg.axes:
            series = _axis_series(window, axis)
            if k:
                d = np.diff(series, n=k, axis=0)
                d = np.concatenate([np.repeat(d[:1], k, axis=0), d], axis=0)
            else:
                d = series
            cols.append(d)
    return np.concatenate(cols, axis=1)


def _guarded_ratio(num: float, den: float) -> float:
    if den < EPS_RATIO:
        if num < EPS_RATIO:
            return 1.0
        return min(num / EPS_RATIO, RATIO_CLAMP)
    return num / den


def region_ratios(window: np.ndarray, rm: RegionMap,
                  landmark_ids: list[int]) -> np.ndarray:
    """Eight amplitude ratios between region-mean displacement stds (y axis).

    Degenerate denominators never raise: a 0/0 ratio reads as 1 (regions
    equally still), other near-zero denominators clamp, and the
    normalized difference reads as 0 when both regions are frozen.
    """
    rows = rm.region_rows(landmark_ids)
    y = window[:, :, AXIS_INDEX["y"]]
    sigma0 = y.std(axis=0)
    r = {name: float(sigma0[idx].mean()) for name, idx in rows.items()}
    li, lo, up, pe = r["lower_inner"], r["lower_outer"], r["upper"], r["perioral"]
    total = li + up
    norm_diff = 0.0 if total < EPS_RATIO else (li - up) / total
    return np.array([
        _guarded_ratio(li, up),
        _guarded_ratio(lo, up),
        _guarded_ratio(li, lo),
        _guarded_ratio(pe, up),
        _guarded_ratio(li, pe),
        li,
        up,
        norm_diff,
    ])


def extract_window_features(seq: NormalizedSequence, cfg: FeatureConfig,
                            rm: RegionMap) -> list[WindowFeatures]:
    out = []
    for start, win in windows(seq, cfg):
        out.append(WindowFeatures(
            video_id=seq.video_id,
            window_start=start,
            x_t=temporal_tensor(win, cfg),
            x_s=kinematic_stats(win, cfg),
            x_r=region_ratios(win, rm, seq.landmark_ids),
            label=seq.label,
        ))
    return out


def extract_video_features(seq: NormalizedSequence, cfg: FeatureConfig,
                           rm: RegionMap) -> VideoFeatures:
    feats = extract_window_features(seq, cfg, rm)
    return VideoFeatures(
        video_id=seq.video_id,
        label=seq.label,
        generator_tag=seq.generator_tag,
        fps=seq.fps,
        window_starts=np.array([f.window_start for f in feats], dtype=np.int64),
        x_t=np.stack([f.x_t for f in feats]),
        x_s=np.stack([f.x_s for f in feats]),
        x_r=np.stack([f.x_r for f in feats]),
    )


def per_order_window_means(x_s: np.ndarray, cfg: FeatureConfig) -> np.ndarray:
    """Mean over landmarks (and axes) of each order's block: (W, n_orders)."""
    W, D = x_s.shape
    block = D // cfg.n_orders
    return np.stack([x_s[:, i * block:(i + 1) * block].mean(axis=1)
                     for i in range(cfg.n_orders)], axis=1)


# --- feature cache ---

def write_feature_cache(path, videos: list[VideoFeatures], cfg: FeatureConfig) -> None:
    """Write the binary window-feature cache plus its .meta.json sidecar."""
    if not videos:
        raise ValueError("no videos to cache")
    T = cfg.window_len
    D = videos[0].x_s.shape[1]
    floats_per_record = 4 + T * D + D + 8
    n_records = sum(v.n_windows for v in videos)
    with open(path, "wb") as fh:
        fh.write(_CACHE_HEADER.pack(_CACHE_MAGIC, _CACHE_VERSION, 0, 0,
                                    n_records, floats_per_record))
        for vi, v in enumerate(videos):
            label = -1.0 if v.label is None else float(v.label)
            for w in range(v.n_windows):
                rec = np.empty(floats_per_record, dtype="<f4")
                rec[0] = vi
                rec[1] = label
                rec[2] = v.window_starts[w]
                rec[3] = v.fps
                rec[4:4 + T * D] = v.x_t[w].reshape(-1)
                rec[4 + T * D:4 + T * D + D] = v.x_s[w]
                rec[4 + T * D + D:] = v.x_r[w]
                fh.write(rec.tobytes())
    meta = {
        "version": _CACHE_VERSION,
        "feature_config": cfg.to_dict(),
        "window_len": T,
        "feature_dim": D,
        "record_layout": "video_index,label,window_start,fps,x_t(T*D row-major),x_s(D),x_r(8)",
        "videos": [{"id": v.video_id, "label": v.label, "generator": v.generator_tag,
                    "fps": v.fps, "n_windows": int(v.n_windows)} for v in videos],
    }
    with open(str(path) + ".meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")


def read_feature_cache(path) -> tuple[list[VideoFeatures], FeatureConfig]:
    with open(str(path) + ".meta.json", "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    cfg = FeatureConfig.from_dict(meta["feature_config"])
    T, D = meta["window_len"], meta["feature_dim"]
    floats_per_record = 4 + T * D + D + 8
    with open(path, "rb") as fh:
        raw = fh.read(_CACHE_HEADER.size)
        magic, version, _, _, n_records, fpr = _CACHE_HEADER.unpack(raw)
        if magic != _CACHE_MAGIC:
            raise ValueError("not a feature cache file")
        if version != _CACHE_VERSION:
            raise ValueError(f"unsupported cache version {version}")
        if fpr != floats_per_record:
            raise ValueError("cache record size disagrees with sidecar metadata")
        data = np.frombuffer(fh.read(), dtype="<f4").reshape(n_records, fpr)

    videos = []
    row = 0
    for vi, vmeta in enumerate(meta["videos"]):
        n = vmeta["n_windows"]
        block = data[row:row + n]
        if not (block[:, 0] == vi).all():
            raise ValueError("cache rows out of order")
        videos.append(VideoFeatures(
            video_id=vmeta["id"],
            label=vmeta["label"],
            generator_tag=vmeta.get("generator"),
            fps=float(vmeta["fps"]),
            window_starts=block[:, 2].astype(np.int64),
            x_t=block[:, 4:4 + T * D].astype(np.float64).reshape(n, T, D),
            x_s=block[:, 4 + T * D:4 + T * D + D].astype(np.float64),
            x_r=block[:, 4 + T * D + D:].astype(np.float64),
        ))
        row += n
    return videos, cfg
