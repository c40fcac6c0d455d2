"""Landmark-level robustness perturbations.

Noise injection models localization error: isotropic zero-mean Gaussian
noise added to every coordinate of every landmark of every frame of an
already-normalized sequence, in normalized coordinate units. The result
deliberately keeps the noise (it is not re-normalized); when written
back to JSONL and re-ingested, normalization re-runs and warps the
noise by O(sigma), which is documented behavior.

Frame dropping simulates transmission loss at the landmark level. Two
physical models: ``hold_last`` freezes the previous surviving frame in
place (decoder-freeze, length preserved), ``delete`` removes the frame
and closes the gap. Frame 0 is never dropped.

Directory-level runs derive one seed per sequence by mixing the run
seed with the first 8 bytes (little-endian) of sha256(video_id), so
per-file work can run in parallel and stays reproducible.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateRate
from .trajectory import NormalizedSequence

NOISE_SIGMA_LEVELS = (0.001, 0.002, 0.005, 0.010, 0.020, 0.030, 0.050)


@dataclass(frozen=True)
class PerturbSpec:
    kind: str                      # "noise" | "frame_drop"
    sigma: float = 0.0             # noise std, normalized units
    rate: float = 0.0              # frame-drop probability
    drop_mode: str = "hold_last"   # "hold_last" | "delete"
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("noise", "frame_drop"):
            raise ValueError(f"unknown perturbation kind {self.kind!r}")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if not 0.0 <= self.rate <= 1.0:
            raise ValueError("rate must lie in [0, 1]")
        if self.drop_mode not in ("hold_last", "delete"):
            raise ValueError(f"unknown drop_mode {self.drop_mode!r}")


def sequence_seed(seed: int, video_id: str) -> np.random.SeedSequence:
    digest = hashlib.sha256(video_id.encode("utf-8")).digest()
    return np.random.SeedSequence([seed, int.from_bytes(digest[:8], "little")])


def inject_noise(seq: NormalizedSequence, sigma: float,
                 seed) -> NormalizedSequence:
    """Add i.i.d. Gaussian noise of std sigma to every coordinate."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0.0:
        return NormalizedSequence(seq.video_id, seq.fps, seq.label, seq.generator_tag,
                                  list(seq.landmark_ids), seq.frames.copy(),
                                  seq.retained_indices.copy())
    rng = np.random.default_rng(seed)
    noisy = seq.frames + rng.normal(0.0, sigma, size=seq.frames.shape)
    return NormalizedSequence(seq.video_id, seq.fps, seq.label, seq.generator_tag,
                              list(seq.landmark_ids), noisy,
                              seq.retained_indices.copy())


def drop_frames(seq: NormalizedSequence, rate: float, drop_mode: str,
                seed) -> NormalizedSequence:
    """Independently drop each frame (except frame 0) with probability rate."""
    if not 0.0 <= rate < 1.0:
        raise DegenerateRate(f"rate must lie in [0, 1), got {rate}")
    if drop_mode not in ("hold_last", "delete"):
        raise ValueError(f"unknown drop_mode {drop_mode!r}")
    n = len(seq)
    if rate == 0.0 or n == 0:
        return NormalizedSequence(seq.video_id, seq.fps, seq.label, seq.generator_tag,
                                  list(seq.landmark_ids), seq.frames.copy(),
                                  seq.retained_indices.copy())
    rng = np.random.default_rng(seed)
    dropped = np.zeros(n, dtype=bool)
    dropped[1:] = rng.random(n - 1) < rate

    if drop_mode == "hold_last":
        frames = seq.frames.copy()
        for i in range(1, n):
            if dropped[i]:
                frames[i] = frames[i - 1]
        retained = seq.retained_indices.copy()
    else:
        keep = ~dropped
        frames = seq.frames[keep].copy()
        retained = seq.retained_indices[keep].copy()
    return NormalizedSequence(seq.video_id, seq.fps, seq.label, seq.generator_tag,
                              list(seq.landmark_ids), frames, retained)


def apply_perturbation(seq: NormalizedSequence, spec: PerturbSpec) -> NormalizedSequence:
    """Dispatch on spec.kind with the per-sequence derived seed."""
    child = sequence_seed(spec.seed, seq.video_id)
    if spec.kind == "noise":
        return inject_noise(seq, spec.sigma, child)
    return drop_frames(seq, spec.rate, spec.drop_mode, child)
