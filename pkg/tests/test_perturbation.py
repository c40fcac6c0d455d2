import numpy as np
import pytest

from biolip.errors import DegenerateRate
from biolip.perturbation import (
    NOISE_SIGMA_LEVELS,
    PerturbSpec,
    drop_frames,
    inject_noise,
    sequence_seed,
)
from biolip.synthetic import SynthConfig, gen_jittery, gen_smooth


def jerk_level(frames):
    """Direct oracle: mean over landmarks of population std of the 3rd diff (y)."""
    d3 = np.diff(frames[:, :, 1], n=3, axis=0)
    return float(d3.std(axis=0).mean())


@pytest.fixture(scope="module")
def smooth_seq():
    return gen_smooth(SynthConfig(n_frames=80), seed=10, video_id="pert_smooth")


@pytest.fixture(scope="module")
def jitter_seq():
    return gen_jittery(SynthConfig(n_frames=80), seed=11, video_id="pert_jitter")


def test_zero_sigma_is_identity(smooth_seq):
    out = inject_noise(smooth_seq, 0.0, seed=1)
    assert np.array_equal(out.frames, smooth_seq.frames)
    assert out.frames is not smooth_seq.frames  # still a fresh copy


def test_noise_is_seeded_and_reproducible(smooth_seq):
    a = inject_noise(smooth_seq, 0.005, seed=42)
    b = inject_noise(smooth_seq, 0.005, seed=42)
    c = inject_noise(smooth_seq, 0.005, seed=43)
    assert np.array_equal(a.frames, b.frames)
    assert not np.array_equal(a.frames, c.frames)


def test_noise_raises_jerk_for_both_classes(smooth_seq, jitter_seq):
    for seq in (smooth_seq, jitter_seq):
        base = jerk_level(seq.frames)
        noisy = jerk_level(inject_noise(seq, 0.005, seed=5).frames)
        assert noisy > base


def test_monotone_jerk_across_paper_noise_levels():
    # 100 + 100 sequences, mean third-order std non-decreasing in sigma
    scfg = SynthConfig(n_frames=60)
    ch = np.random.SeedSequence(21).spawn(200)
    smooth = [gen_smooth(scfg, ch[i], f"s{i}") for i in range(100)]
    jitter = [gen_jittery(scfg, ch[100 + i], f"j{i}") for i in range(100)]
    for group in (smooth, jitter):
        means = []
        for sigma in (0.0,) + NOISE_SIGMA_LEVELS:
            vals = [jerk_level(inject_noise(s, sigma, sequence_seed(3, s.video_id)).frames)
                    for s in group]
            means.append(np.mean(vals))
        assert all(np.diff(means) >= 0), means


def test_drop_rate_zero_identity(smooth_seq):
    out = drop_frames(smooth_seq, 0.0, "hold_last", seed=0)
    assert np.array_equal(out.frames, smooth_seq.frames)
    assert np.array_equal(out.retained_indices, smooth_seq.retained_indices)


def test_drop_rate_one_rejected(smooth_seq):
    with pytest.raises(DegenerateRate):
        drop_frames(smooth_seq, 1.0, "hold_last", seed=0)


def test_hold_last_preserves_length_and_freezes(smooth_seq):
    seq = gen_smooth(SynthConfig(n_frames=100), seed=12, video_id="hl")
    out = drop_frames(seq, 0.5, "hold_last", seed=7)
    assert len(out) == 100
    frozen = sum(np.array_equal(out.frames[i], out.frames[i - 1])
                 for i in range(1, 100))
    # Binomial(99, 0.5): mean 49.5, sd ~4.97; require within 4 sigma
    assert abs(frozen - 49.5) < 4 * np.sqrt(99 * 0.25)


def test_delete_mode_length_and_order(smooth_seq):
    seq = gen_smooth(SynthConfig(n_frames=100), seed=13, video_id="del")
    out = drop_frames(seq, 0.5, "delete", seed=8)
    kept = len(out)
    # 1 + Binomial(99, 0.5) kept
    assert abs(kept - 50.5) < 4 * np.sqrt(99 * 0.25)
    assert (np.diff(out.retained_indices) > 0).all()
    # surviving frames are an ordered subset of the originals
    orig_by_index = {int(i): seq.frames[k] for k, i in enumerate(seq.retained_indices)}
    for k, i in enumerate(out.retained_indices):
        assert np.array_equal(out.frames[k], orig_by_index[int(i)])


def test_frame_zero_never_dropped():
    seq = gen_smooth(SynthConfig(n_frames=40), seed=14, video_id="f0")
    for s in range(25):
        out = drop_frames(seq, 0.9, "delete", seed=s)
        assert out.retained_indices[0] == seq.retained_indices[0]
        assert np.array_equal(out.frames[0], seq.frames[0])


def test_drop_seeded_reproducibility(smooth_seq):
    a = drop_frames(smooth_seq, 0.3, "delete", seed=99)
    b = drop_frames(smooth_seq, 0.3, "delete", seed=99)
    assert np.array_equal(a.frames, b.frames)


def test_sequence_seed_mixing_is_stable():
    s1 = np.random.default_rng(sequence_seed(42, "video_a")).random(4)
    s2 = np.random.default_rng(sequence_seed(42, "video_a")).random(4)
    s3 = np.random.default_rng(sequence_seed(42, "video_b")).random(4)
    assert np.array_equal(s1, s2)
    assert not np.array_equal(s1, s3)


def test_spec_validation():
    with pytest.raises(ValueError):
        PerturbSpec(kind="warp")
    with pytest.raises(ValueError):
        PerturbSpec(kind="noise", sigma=-1)
    with pytest.raises(ValueError):
        PerturbSpec(kind="frame_drop", rate=1.5)
