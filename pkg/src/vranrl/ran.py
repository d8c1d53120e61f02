"""Functional-split catalog, flavor sets and per-split compute shares.

Four deployable splits are modelled (downlink only):

    S1  HLS O2 (PDCP | high RLC) + LLS O7
    S2  HLS O4 (low RLC | high MAC) + LLS O7
    S3  HLS O6 (low MAC | high PHY) + LLS O7
    S4  O8 only, integrated vDU/vCU at the edge server (C-RAN)
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

MAX_DEMAND_GBPS = 4.0


class SplitId(IntEnum):
    S1 = 0
    S2 = 1
    S3 = 2
    S4 = 3

    @property
    def uses_fs(self) -> bool:
        return self is not SplitId.S4


# Protocol functions ordered from the radio upwards; a split point sits
# between two neighbours in this list.
FUNCTION_ORDER = ("LP", "HP", "LM", "HM", "LR", "HR", "PD", "RRC")
DEFAULT_FUNCTION_SHARES = {
    "LP": 0.48, "HP": 0.17, "LM": 0.07, "HM": 0.07,
    "LR": 0.005, "HR": 0.005, "PD": 0.10, "RRC": 0.10,
}

# index into FUNCTION_ORDER of the first function hosted above each split point
_HLS_BOUNDARY = {SplitId.S1: 6, SplitId.S2: 4, SplitId.S3: 2}
# O7: LP stays at the RU
_LLS_BOUNDARY = 1


@dataclass(frozen=True)
class SplitSpec:
    id: SplitId
    hls_delay_req_ms: float | None
    lls_delay_req_ms: float
    fh_load_gbps: float
    mh_slope: float
    mh_offset_gbps: float
    compute_shares: tuple[float, float, float]

    def mh_load(self, demand: float) -> float:
        return self.mh_slope * demand + self.mh_offset_gbps


def _shares_for(split: SplitId, shares: dict[str, float]) -> tuple[float, float, float]:
    vals = [shares[f] for f in FUNCTION_ORDER]
    if split is SplitId.S4:
        # the RU keeps RF only; everything else runs in the integrated unit
        return (0.0, 0.0, float(sum(vals)))
    hls = _HLS_BOUNDARY[split]
    ru = float(sum(vals[:_LLS_BOUNDARY]))
    vdu = float(sum(vals[_LLS_BOUNDARY:hls]))
    vcu = float(sum(vals[hls:]))
    return (ru, vdu, vcu)


@dataclass(frozen=True)
class SplitCatalog:
    """The split options and the function compute shares they are derived from."""

    function_shares: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_FUNCTION_SHARES))
    fh_load_gbps: float = 10.1
    o8_load_gbps: float = 157.3
    s3_mh_slope: float = 1.02
    s3_mh_offset_gbps: float = 0.5
    hls_delay_req_ms: tuple[float, float, float] = (10.0, 1.0, 0.25)
    lls_delay_req_ms: float = 0.25

    def __post_init__(self):
        missing = set(FUNCTION_ORDER) - set(self.function_shares)
        if missing:
            raise ValueError(f"function shares missing {sorted(missing)}")
        if any(v < 0 for v in self.function_shares.values()):
            raise ValueError("function shares must be non-negative")
        total = sum(self.function_shares.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"function shares must sum to 1, got {total}")

    def __getitem__(self, split) -> SplitSpec:
        split = SplitId(split)
        if split is SplitId.S4:
            return SplitSpec(split, None, self.lls_delay_req_ms, 0.0, 0.0, self.o8_load_gbps,
                             _shares_for(split, self.function_shares))
        slope, offset = (self.s3_mh_slope, self.s3_mh_offset_gbps) if split is SplitId.S3 else (1.0, 0.0)
        return SplitSpec(split, self.hls_delay_req_ms[int(split)], self.lls_delay_req_ms,
                         self.fh_load_gbps, slope, offset, _shares_for(split, self.function_shares))

    def __len__(self) -> int:
        return len(SplitId)

    def shares_matrix(self) -> np.ndarray:
        """(4, 3) array of (ru, vdu, vcu) shares indexed by split."""
        return np.array([self[s].compute_shares for s in SplitId])


DEFAULT_CATALOG = SplitCatalog()


def _check_demand(demand: float) -> None:
    if not 0.0 <= demand <= MAX_DEMAND_GBPS:
        raise ValueError(f"demand {demand} Gbps outside [0, {MAX_DEMAND_GBPS}]")


def xhaul_loads(split, demand: float, catalog: SplitCatalog = DEFAULT_CATALOG) -> tuple[float, float, float]:
    """Return (backhaul, midhaul, fronthaul) loads in Gbps.

    For S4 the O8 stream between edge server and RU is reported in the
    midhaul slot and the fronthaul load is zero.
    """
    _check_demand(demand)
    spec = catalog[split]
    return float(demand), spec.mh_load(demand), spec.fh_load_gbps


def compute_shares(split, catalog: SplitCatalog = DEFAULT_CATALOG) -> tuple[float, float, float]:
    return catalog[split].compute_shares


@dataclass(frozen=True)
class FlavorSet:
    flavors: tuple[float, ...] = tuple(float(v) for v in range(16))

    def __post_init__(self):
        f = np.asarray(self.flavors, dtype=float)
        if f.size == 0 or np.any(f < 0) or np.any(np.diff(f) <= 0):
            raise ValueError("flavors must be non-empty, non-negative and strictly increasing")
        if np.any(f != np.round(f)):
            raise ValueError("flavors must be integers (reference cores)")

    @classmethod
    def range(cls, n: int) -> "FlavorSet":
        return cls(tuple(float(v) for v in range(n)))

    def __len__(self) -> int:
        return len(self.flavors)

    @property
    def max(self) -> float:
        return self.flavors[-1]

    def values(self) -> np.ndarray:
        return np.asarray(self.flavors, dtype=float)
