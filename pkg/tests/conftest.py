import numpy as np
import pytest

from biolip.kinematics import FeatureConfig
from biolip.regions import default_region_map
from biolip.trajectory import RawLandmarkFrame, TrajectorySequence


@pytest.fixture(scope="session")
def rm():
    return default_region_map()


@pytest.fixture(scope="session")
def fcfg():
    return FeatureConfig()


def make_raw_sequence(rm, n_frames=30, seed=0, fps=25.0, label=0,
                      invalid=(), video_id="vid0"):
    """Synthetic raw sequence in image-like units (commissures spread apart)."""
    rng = np.random.default_rng(seed)
    ids = rm.all_ids()
    pos = {lm: i for i, lm in enumerate(ids)}
    frames = []
    for t in range(n_frames):
        pts = rng.uniform(0.2, 0.8, size=(64, 3))
        pts[pos[rm.commissure_ids[0]]] = (0.35, 0.5 + 0.01 * np.sin(t / 3.0), 0.1)
        pts[pos[rm.commissure_ids[1]]] = (0.65, 0.5, 0.1)
        valid = t not in invalid
        frames.append(RawLandmarkFrame(frame_index=t, timestamp_ms=t * 40.0,
                                       valid=valid, pts=pts if valid else None))
    return TrajectorySequence(video_id=video_id, fps=fps, label=label,
                              generator_tag=None, landmark_ids=ids,
                              commissure_ids=rm.commissure_ids, frames=frames)


@pytest.fixture
def raw_seq(rm):
    return make_raw_sequence(rm)
