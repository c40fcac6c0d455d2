"""biolip: coordinate-only lip-sync forgery detection.

Landmark trajectories in, real/fake scores out. No pixels, no audio:
the pipeline normalizes perioral landmarks per frame, computes
kinematic variance features over sliding windows, and classifies them
with a small three-branch network trained from scratch.
"""

__version__ = "0.1.0"

from .kinematics import FeatureConfig
from .network import ModelConfig
from .regions import RegionMap, default_region_map
from .synthetic import SynthConfig
from .training import TrainConfig

__all__ = [
    "FeatureConfig",
    "ModelConfig",
    "RegionMap",
    "SynthConfig",
    "TrainConfig",
    "default_region_map",
    "__version__",
]
