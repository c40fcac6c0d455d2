"""Directory-level plumbing: Landmark JSONL files in, features out.

Rejections (sequences without a usable run) and malformed lines are
counted rather than fatal, so one bad export does not sink a batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import AllFramesInvalid, BiolipError, SequenceRejected
from .kinematics import FeatureConfig, VideoFeatures, extract_video_features
from .regions import RegionMap, default_region_map
from .trajectory import NormalizedSequence, filter_sequence, read_trajectory_file, standard_fps


@dataclass
class LoadStats:
    n_files: int = 0
    n_loaded: int = 0
    n_rejected: int = 0
    malformed_lines: int = 0
    demoted_frames: int = 0
    nonstandard_fps: int = 0
    rejected_ids: list[str] = field(default_factory=list)

    def summary(self) -> str:
        parts = [f"{self.n_loaded}/{self.n_files} sequences loaded"]
        if self.n_rejected:
            parts.append(f"{self.n_rejected} rejected")
        if self.malformed_lines:
            parts.append(f"{self.malformed_lines} malformed lines")
        if self.demoted_frames:
            parts.append(f"{self.demoted_frames} frames demoted")
        if self.nonstandard_fps:
            parts.append(f"{self.nonstandard_fps} sequences with fps != 25")
        return ", ".join(parts)


def landmark_files(directory) -> list[Path]:
    """All landmark exports in a directory; run manifests are not data."""
    return sorted(p for p in Path(directory).glob("*.jsonl")
                  if p.name != "manifest.jsonl" and not p.name.endswith(".manifest.jsonl"))


def load_sequences(directory, rm: RegionMap | None = None,
                   min_valid_run: int = 25) -> tuple[list[NormalizedSequence], LoadStats]:
    rm = rm or default_region_map()
    stats = LoadStats()
    out: list[NormalizedSequence] = []
    files = landmark_files(directory)
    if not files:
        raise BiolipError(f"no .jsonl files under {directory}")
    for path in files:
        stats.n_files += 1
        parsed = read_trajectory_file(path)
        stats.malformed_lines += parsed.malformed_lines
        stats.demoted_frames += parsed.demoted_frames
        try:
            seq = filter_sequence(parsed.sequence, rm, min_valid_run=min_valid_run)
        except (SequenceRejected, AllFramesInvalid):
            stats.n_rejected += 1
            stats.rejected_ids.append(parsed.sequence.video_id)
            continue
        if not standard_fps(seq.fps):
            stats.nonstandard_fps += 1
        out.append(seq)
        stats.n_loaded += 1
    return out, stats


def load_features(directory, rm: RegionMap | None = None,
                  cfg: FeatureConfig | None = None,
                  min_valid_run: int = 25) -> tuple[list[VideoFeatures], LoadStats]:
    rm = rm or default_region_map()
    cfg = cfg or FeatureConfig()
    seqs, stats = load_sequences(directory, rm, min_valid_run=min_valid_run)
    return [extract_video_features(s, cfg, rm) for s in seqs], stats


def features_from_sequences(seqs: list[NormalizedSequence],
                            cfg: FeatureConfig | None = None,
                            rm: RegionMap | None = None) -> list[VideoFeatures]:
    rm = rm or default_region_map()
    cfg = cfg or FeatureConfig()
    return [extract_video_features(s, cfg, rm) for s in seqs]
