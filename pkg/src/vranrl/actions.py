"""Joint reconfiguration decision for all BSs."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ran import SplitId

SUB_ACTIONS = ("split", "vdu_flavor", "vcu_flavor", "vdu_loc", "vcu_loc")


@dataclass(frozen=True)
class Action:
    """Per-BS split index, vDU/vCU flavors (RC) and FS/ES position indices.

    ``z`` indexes ``topology.fs_ids`` and ``zeta`` indexes ``topology.es_ids``.
    Under S4 the vDU does not exist, so ``x`` and ``z`` are carried but inert.
    """
    split: np.ndarray
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    zeta: np.ndarray

    def __post_init__(self):
        for name, dtype in (("split", int), ("x", float), ("y", float), ("z", int), ("zeta", int)):
            arr = np.array(getattr(self, name), dtype=dtype).reshape(-1)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        k = self.split.size
        if any(getattr(self, n).size != k for n in ("x", "y", "z", "zeta")):
            raise ValueError("all sub-action vectors need one entry per BS")

    @property
    def n_bs(self) -> int:
        return self.split.size

    @property
    def uses_fs(self) -> np.ndarray:
        return self.split != int(SplitId.S4)

    @property
    def x_effective(self) -> np.ndarray:
        """vDU allocation that actually exists (zero under S4)."""
        return np.where(self.uses_fs, self.x, 0.0)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Action):
            return NotImplemented
        return all(np.array_equal(getattr(self, n), getattr(other, n)) for n in ("split", "x", "y", "z", "zeta"))

    def __hash__(self):
        return hash(tuple(tuple(getattr(self, n).tolist()) for n in ("split", "x", "y", "z", "zeta")))

    def bs_changed(self, other: "Action") -> np.ndarray:
        """Per-BS flag: any sub-action differs from ``other``."""
        return ((self.split != other.split) | (self.x != other.x) | (self.y != other.y)
                | (self.z != other.z) | (self.zeta != other.zeta))
