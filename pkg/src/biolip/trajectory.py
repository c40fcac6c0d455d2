"""Landmark trajectory ingestion: JSONL parsing, normalization, filtering.

Landmark JSONL format (one record per line):

    {"type":"header","video_id":str,"fps":number,"label":0|1|null,
     "generator":str|null,"landmark_ids":[int,...],"commissure_ids":[int,int]}
    {"type":"frame","i":int,"t_ms":number|null,"valid":bool,
     "pts":[[x,y,z],...]}   # one triple per landmark_ids entry, same order

landmark_ids nominally holds the 64 perioral ids; when the commissures
are not among them, their ids are appended so their coordinates travel
in pts too (len(landmark_ids) is then 66). Coordinates are 64-bit reals
and survive a parse/serialize round trip bit-exactly.

Normalization maps each valid frame to mouth-centered coordinates:
every point p becomes (p - c) / w, where c is the midpoint of the two
commissures and w their Euclidean distance, the same scalar for all
three axes. The result is translation- and scale-invariant.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AllFramesInvalid,
    DegenerateMouthWidth,
    MalformedHeader,
    MissingRequiredField,
    NonMonotoneFrameIndex,
    SequenceRejected,
)
from .regions import RegionMap

EPS_WIDTH = 1e-6  # inter-commissure distances at or below this are detector failures


@dataclass
class RawLandmarkFrame:
    """One decoded frame: pts rows follow the sequence's landmark_ids order."""

    frame_index: int
    timestamp_ms: float | None
    valid: bool
    pts: np.ndarray | None  # (n_ids, 3) float64, None when invalid

    def point(self, landmark_ids: list[int], lm_id: int) -> np.ndarray:
        return self.pts[landmark_ids.index(lm_id)]


@dataclass
class TrajectorySequence:
    video_id: str
    fps: float
    label: int | None
    generator_tag: str | None
    landmark_ids: list[int]
    commissure_ids: tuple[int, int]
    frames: list[RawLandmarkFrame] = field(default_factory=list)
    extra_header: dict = field(default_factory=dict)  # e.g. perturb provenance

    def __len__(self):
        return len(self.frames)


@dataclass
class NormalizedSequence:
    """Mouth-normalized 64-point frames; rows ordered by landmark_ids."""

    video_id: str
    fps: float
    label: int | None
    generator_tag: str | None
    landmark_ids: list[int]          # the 64 region ids, file order
    frames: np.ndarray               # (n_frames, 64, 3) float64
    retained_indices: np.ndarray     # original frame_index of each kept frame

    def __len__(self):
        return self.frames.shape[0]


@dataclass
class ParseResult:
    sequence: TrajectorySequence
    malformed_lines: int
    demoted_frames: int  # lines that parsed but failed point validation


_HEADER_FIELDS = ("video_id", "fps", "landmark_ids", "commissure_ids")


def parse_trajectory_file(stream) -> ParseResult:
    """Parse one Landmark JSONL stream.

    Malformed lines (bad JSON, unknown type, missing frame index) are
    counted, not fatal. A frame record whose pts are absent, the wrong
    length, or non-finite is demoted to valid=False. Raises
    MalformedHeader / MissingRequiredField / NonMonotoneFrameIndex.
    """
    if isinstance(stream, (str, bytes)):
        import io
        stream = io.StringIO(stream.decode() if isinstance(stream, bytes) else stream)

    first = stream.readline()
    if not first.strip():
        raise MalformedHeader("empty file")
    try:
        head = json.loads(first)
    except json.JSONDecodeError as exc:
        raise MalformedHeader(f"header is not valid JSON: {exc}") from None
    if not isinstance(head, dict) or head.get("type") != "header":
        raise MalformedHeader("first record must have type 'header'")
    for name in _HEADER_FIELDS:
        if name not in head:
            raise MissingRequiredField(f"header missing {name!r}")
    landmark_ids = [int(i) for i in head["landmark_ids"]]
    if len(landmark_ids) < 64 or len(set(landmark_ids)) != len(landmark_ids):
        raise MalformedHeader("landmark_ids must list at least 64 distinct ids")
    commissures = head["commissure_ids"]
    if len(commissures) != 2:
        raise MalformedHeader("commissure_ids must list exactly two ids")
    fps = float(head["fps"])
    if not fps > 0:
        raise MalformedHeader(f"fps must be positive, got {fps}")
    label = head.get("label")
    if label is not None:
        label = int(label)
        if label not in (0, 1):
            raise MalformedHeader(f"label must be 0, 1 or null, got {label}")

    known = {"type", "video_id", "fps", "label", "generator",
             "landmark_ids", "commissure_ids"}
    seq = TrajectorySequence(
        video_id=str(head["video_id"]),
        fps=fps,
        label=label,
        generator_tag=head.get("generator"),
        landmark_ids=landmark_ids,
        commissure_ids=(int(commissures[0]), int(commissures[1])),
        extra_header={k: v for k, v in head.items() if k not in known},
    )

    n_ids = len(landmark_ids)
    malformed = 0
    demoted = 0
    last_index = None
    for line in stream:
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            if not isinstance(rec, dict) or rec.get("type") != "frame":
                raise ValueError("not a frame record")
            idx = int(rec["i"])
        except (ValueError, KeyError, TypeError, json.JSONDecodeError):
            malformed += 1
            continue
        if last_index is not None and idx <= last_index:
            raise NonMonotoneFrameIndex(
                f"frame index {idx} follows {last_index} in {seq.video_id}")
        last_index = idx

        t_ms = rec.get("t_ms")
        valid = bool(rec.get("valid", False))
        pts = None
        if valid:
            raw = rec.get("pts")
            if (isinstance(raw, list) and len(raw) == n_ids
                    and all(isinstance(p, list) and len(p) == 3 for p in raw)):
                arr = np.asarray(raw, dtype=np.float64)
                if np.isfinite(arr).all():
                    pts = arr
            if pts is None:
                valid = False
                demoted += 1
        seq.frames.append(RawLandmarkFrame(
            frame_index=idx,
            timestamp_ms=None if t_ms is None else float(t_ms),
            valid=valid,
            pts=pts,
        ))
    return ParseResult(seq, malformed, demoted)


def read_trajectory_file(path) -> ParseResult:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_trajectory_file(fh)


def normalize_frame(pts: np.ndarray, landmark_ids: list[int],
                    commissure_ids: tuple[int, int],
                    keep_ids: list[int] | None = None,
                    eps_width: float = EPS_WIDTH) -> np.ndarray:
    """Apply mouth-center/width normalization to one frame.

    Returns the normalized points for keep_ids (default: all landmark_ids),
    row order following landmark_ids. Raises DegenerateMouthWidth when the
    commissure distance is <= eps_width.
    """
    pos = {lm: i for i, lm in enumerate(landmark_ids)}
    try:
        left = pts[pos[commissure_ids[0]]]
        right = pts[pos[commissure_ids[1]]]
    except KeyError as exc:
        raise MissingRequiredField(
            f"commissure id {exc.args[0]} not in landmark_ids") from None
    center = (left + right) / 2.0
    width = float(np.linalg.norm(right - left))
    if width <= eps_width:
        raise DegenerateMouthWidth(f"mouth width {width:g} <= {eps_width:g}")
    if keep_ids is None:
        keep = np.arange(len(landmark_ids))
    else:
        keep = np.array([pos[lm] for lm in keep_ids], dtype=np.intp)
    return (pts[keep] - center) / width


def filter_sequence(seq: TrajectorySequence, rm: RegionMap | None = None,
                    min_valid_run: int = 25,
                    eps_width: float = EPS_WIDTH) -> NormalizedSequence:
    """Normalize the usable frames of a sequence and drop the rest.

    A frame is usable when it was marked valid and its mouth width is
    above the epsilon floor. All usable frames are kept (in order); the
    sequence is rejected unless at least one contiguous run of
    min_valid_run usable frames exists, so at least one window is free
    of detection gaps.
    """
    if min_valid_run < 25:
        raise ValueError("min_valid_run must be >= 25")
    ids = seq.landmark_ids
    if rm is not None:
        keep_ids = [lm for lm in ids if lm in set(rm.all_ids())]
        if len(keep_ids) != 64:
            missing = sorted(set(rm.all_ids()) - set(ids))
            raise MissingRequiredField(
                f"file lacks region landmarks {missing[:6]}{'...' if len(missing) > 6 else ''}")
    else:
        if len(ids) != 64:
            raise MissingRequiredField(
                "sequence transports more than 64 ids; a RegionMap is required "
                "to select the 64 region landmarks")
        keep_ids = list(ids)

    normalized = []
    retained = []
    run = 0
    best_run = 0
    for fr in seq.frames:
        ok = fr.valid
        mat = None
        if ok:
            try:
                mat = normalize_frame(fr.pts, ids, seq.commissure_ids,
                                      keep_ids=keep_ids, eps_width=eps_width)
            except DegenerateMouthWidth:
                ok = False
        if ok:
            normalized.append(mat)
            retained.append(fr.frame_index)
            run += 1
            best_run = max(best_run, run)
        else:
            run = 0

    if not normalized:
        raise AllFramesInvalid(f"{seq.video_id}: no usable frames")
    if best_run < min_valid_run:
        raise SequenceRejected(
            f"{seq.video_id}: longest valid run {best_run} < {min_valid_run}")

    return NormalizedSequence(
        video_id=seq.video_id,
        fps=seq.fps,
        label=seq.label,
        generator_tag=seq.generator_tag,
        landmark_ids=keep_ids,
        frames=np.stack(normalized),
        retained_indices=np.asarray(retained, dtype=np.int64),
    )


def _json_num(x: float):
    # json rejects NaN/inf only with allow_nan=False; coordinates are
    # validated finite upstream, so plain float round-trips bit-exactly.
    return float(x)


def write_sequence_jsonl(seq: TrajectorySequence, fh) -> None:
    """Serialize a raw sequence back to Landmark JSONL (round-trip bit-exact)."""
    head = {
        "type": "header",
        "video_id": seq.video_id,
        "fps": _json_num(seq.fps),
        "label": seq.label,
        "generator": seq.generator_tag,
        "landmark_ids": seq.landmark_ids,
        "commissure_ids": list(seq.commissure_ids),
    }
    head.update(seq.extra_header)
    fh.write(json.dumps(head) + "\n")
    for fr in seq.frames:
        rec = {
            "type": "frame",
            "i": int(fr.frame_index),
            "t_ms": None if fr.timestamp_ms is None else _json_num(fr.timestamp_ms),
            "valid": bool(fr.valid),
            "pts": None if fr.pts is None else [[_json_num(v) for v in p] for p in fr.pts],
        }
        fh.write(json.dumps(rec) + "\n")


def normalized_to_raw(seq: NormalizedSequence,
                      commissure_ids: tuple[int, int]) -> TrajectorySequence:
    """Repackage a normalized sequence as a raw one (pts already normalized).

    Normalization is idempotent when the commissures sit at the canonical
    pose, so writing these frames to JSONL and re-ingesting them is exact.
    """
    raw = TrajectorySequence(
        video_id=seq.video_id,
        fps=seq.fps,
        label=seq.label,
        generator_tag=seq.generator_tag,
        landmark_ids=list(seq.landmark_ids),
        commissure_ids=commissure_ids,
        frames=[RawLandmarkFrame(frame_index=int(i),
                                 timestamp_ms=None,
                                 valid=True,
                                 pts=seq.frames[k].copy())
                for k, i in enumerate(seq.retained_indices)],
    )
    return raw


def is_normalized(frames: np.ndarray, landmark_ids: list[int],
                  commissure_ids: tuple[int, int], tol: float = 1e-9) -> bool:
    """Check the canonical pose: commissure midpoint at origin, distance 1."""
    pos = {lm: i for i, lm in enumerate(landmark_ids)}
    try:
        li, ri = pos[commissure_ids[0]], pos[commissure_ids[1]]
    except KeyError:
        return False
    left = frames[:, li, :]
    right = frames[:, ri, :]
    mid_ok = np.abs((left + right) / 2.0).max() <= tol
    dist = np.linalg.norm(right - left, axis=1)
    width_ok = np.abs(dist - 1.0).max() <= tol
    return bool(mid_ok and width_ok)


def standard_fps(fps: float, tol: float = 1e-9) -> bool:
    """True when the sequence matches the 25 fps the 1-second window assumes."""
    return math.isclose(fps, 25.0, rel_tol=0, abs_tol=tol)
