"""Perioral region map: which landmark ids form each lip region.

The four regions partition the 64 tracked ids into lower-lip inner (9),
lower-lip outer (9), upper lip (22) and surrounding perioral (24) sets.
The default map below follows the upstream face-mesh lips topology and
is a best-effort reconstruction: treat it as a configurable default and
override it per deployment (detector releases shift landmark ids).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

REGION_NAMES = ("lower_inner", "lower_outer", "upper", "perioral")
REGION_SIZES = {"lower_inner": 9, "lower_outer": 9, "upper": 22, "perioral": 24}

# Face-mesh lips topology: inner/outer lip rings minus the four shared
# corner points, corners (61/291 outer, 78/308 inner) assigned to "upper".
_DEFAULT_REGIONS = {
    "lower_inner": [95, 88, 178, 87, 14, 317, 402, 318, 324],
    "lower_outer": [146, 91, 181, 84, 17, 314, 405, 321, 375],
    "upper": [61, 185, 40, 39, 37, 0, 267, 269, 270, 409, 291,
              78, 191, 80, 81, 82, 13, 312, 311, 310, 415, 308],
    "perioral": [57, 186, 92, 165, 167, 164, 393, 391, 322, 410, 287,
                 273, 335, 406, 313, 18, 83, 182, 106, 43, 212, 432, 202, 422],
}
_DEFAULT_COMMISSURES = (61, 291)


@dataclass(frozen=True)
class RegionMap:
    """Assignment of the 64 perioral landmark ids to the four regions.

    commissure_ids are the left/right mouth corners used for
    normalization; they may be members of the 64-id set (default) or
    external ids transported alongside them.
    """

    commissure_ids: tuple[int, int]
    regions: dict[str, list[int]] = field(default_factory=dict)

    def __post_init__(self):
        if set(self.regions) != set(REGION_NAMES):
            raise ValueError(f"regions must be exactly {REGION_NAMES}")
        for name, ids in self.regions.items():
            want = REGION_SIZES[name]
            if len(ids) != want or len(set(ids)) != want:
                raise ValueError(f"region {name!r} must hold {want} distinct ids")
        all_ids = self.all_ids()
        if len(set(all_ids)) != 64:
            raise ValueError("regions must partition 64 distinct ids")
        if len(self.commissure_ids) != 2 or self.commissure_ids[0] == self.commissure_ids[1]:
            raise ValueError("commissure_ids must be two distinct ids")

    def all_ids(self) -> list[int]:
        """The 64 region ids in canonical order (lower_inner, lower_outer, upper, perioral)."""
        out: list[int] = []
        for name in REGION_NAMES:
            out.extend(self.regions[name])
        return out

    def export_ids(self) -> list[int]:
        """Ids a landmark file must transport: the 64 region ids plus any external commissures."""
        ids = self.all_ids()
        for cid in self.commissure_ids:
            if cid not in ids:
                ids.append(cid)
        return ids

    def region_rows(self, landmark_ids: list[int]) -> dict[str, np.ndarray]:
        """Row indices of each region's landmarks within a pts array ordered by landmark_ids."""
        pos = {lm: i for i, lm in enumerate(landmark_ids)}
        rows = {}
        for name in REGION_NAMES:
            try:
                rows[name] = np.array([pos[lm] for lm in self.regions[name]], dtype=np.intp)
            except KeyError as exc:
                raise ValueError(f"landmark id {exc.args[0]} of region {name!r} "
                                 "missing from the file's landmark_ids") from None
        return rows


def default_region_map() -> RegionMap:
    return RegionMap(commissure_ids=_DEFAULT_COMMISSURES,
                     regions={k: list(v) for k, v in _DEFAULT_REGIONS.items()})


def load_region_map(path) -> RegionMap:
    """Read a region map config: JSON with commissure_ids and the four region id lists."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if "commissure_ids" not in doc or "regions" not in doc:
        raise ValueError("region map file needs 'commissure_ids' and 'regions'")
    return RegionMap(commissure_ids=tuple(doc["commissure_ids"]),
                     regions={k: list(v) for k, v in doc["regions"].items()})


def save_region_map(rm: RegionMap, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"commissure_ids": list(rm.commissure_ids), "regions": rm.regions},
                  fh, indent=2)
        fh.write("\n")
