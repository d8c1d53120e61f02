"""Demand/split to compute-utilization models.

The total BBU utilization depends only on demand (plus noise); the split
decides how that total is distributed across RU, vDU and vCU.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .ran import DEFAULT_CATALOG, MAX_DEMAND_GBPS, SplitCatalog


class UtilizationKind(str, Enum):
    AFFINE_NOISY = "AFFINE_NOISY"
    TRACE_TABLE = "TRACE_TABLE"


@dataclass(frozen=True)
class UtilizationModelSpec:
    kind: UtilizationKind = UtilizationKind.AFFINE_NOISY
    base_rc: float = 2.0
    slope_rc_per_gbps: float = 2.0
    noise_cv: float = 0.1
    seed: int = 0
    trace_path: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", UtilizationKind(self.kind))
        if self.base_rc < 0 or self.slope_rc_per_gbps < 0:
            raise ValueError("base_rc and slope must be non-negative")
        if not 0.0 <= self.noise_cv < 1.0:
            raise ValueError("noise_cv must lie in [0, 1)")
        if self.kind is UtilizationKind.TRACE_TABLE and not self.trace_path:
            raise ValueError("TRACE_TABLE needs a trace_path")


@dataclass(frozen=True)
class UtilizationSample:
    ru_rc: float
    vdu_rc: float
    vcu_rc: float


def load_utilization_table(path) -> tuple[np.ndarray, np.ndarray]:
    """Read ``demand_gbps,total_rc`` rows; duplicate demands are averaged."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"utilization trace {path} not found")
    acc: dict[float, list[float]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["demand_gbps", "total_rc"]:
            raise ValueError(f"{path}: expected header demand_gbps,total_rc")
        for lineno, row in enumerate(reader, start=2):
            try:
                d, u = float(row["demand_gbps"]), float(row["total_rc"])
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: non-numeric value") from exc
            if not (np.isfinite(d) and np.isfinite(u)) or u < 0:
                raise ValueError(f"{path}:{lineno}: invalid sample ({d}, {u})")
            acc.setdefault(d, []).append(u)
    if not acc:
        raise ValueError(f"{path}: no samples")
    xs = np.array(sorted(acc))
    ys = np.array([np.mean(acc[x]) for x in xs])
    return xs, ys


class UtilizationModel:
    """Callable stand-in for the measured demand->utilization mapping.

    Noise is keyed on (seed, episode, slot, bs) so that a slot's draw does
    not depend on call order or on the chosen split.
    """

    def __init__(self, spec: UtilizationModelSpec = UtilizationModelSpec(),
                 catalog: SplitCatalog = DEFAULT_CATALOG):
        self.spec = spec
        self.catalog = catalog
        self._shares = catalog.shares_matrix()
        self._table = None
        if spec.kind is UtilizationKind.TRACE_TABLE:
            self._table = load_utilization_table(spec.trace_path)

    def mean_total(self, demand) -> np.ndarray:
        demand = np.asarray(demand, dtype=float)
        if np.any(demand < 0) or np.any(demand > MAX_DEMAND_GBPS):
            raise ValueError(f"demand outside [0, {MAX_DEMAND_GBPS}] Gbps")
        if self._table is not None:
            return np.interp(demand, *self._table)
        return self.spec.base_rc + self.spec.slope_rc_per_gbps * demand

    def noise(self, episode: int, n_slots: int, n_bs: int, first_slot: int = 0) -> np.ndarray:
        """Relative noise draws, shape (n_slots, n_bs), truncated at -100%."""
        if self.spec.noise_cv == 0.0:
            return np.zeros((n_slots, n_bs))
        # one stream per slot; the bs-th draw is independent of n_bs
        out = np.empty((n_slots, n_bs))
        for i in range(n_slots):
            rng = np.random.default_rng([self.spec.seed, episode, first_slot + i])
            out[i] = rng.normal(0.0, self.spec.noise_cv, size=n_bs)
        return np.maximum(out, -1.0)

    def split_total(self, total, splits) -> np.ndarray:
        """(..., 3) per-component utilization from totals and split indices."""
        return np.asarray(total, dtype=float)[..., None] * self._shares[np.asarray(splits)]

    def sample(self, demands, splits, noise=None) -> np.ndarray:
        """Per-BS (ru, vdu, vcu) utilization, shape (K, 3)."""
        total = self.mean_total(demands)
        if noise is not None:
            total = np.maximum(0.0, total * (1.0 + noise))
        return self.split_total(total, splits)


def utilization(spec: UtilizationModelSpec, demand: float, split, slot: int = 0, episode: int = 0,
                bs: int = 0, catalog: SplitCatalog = DEFAULT_CATALOG) -> UtilizationSample:
    """Single-BS convenience wrapper, deterministic in (seed, episode, slot, bs)."""
    model = UtilizationModel(spec, catalog)
    eps = model.noise(episode, 1, bs + 1, first_slot=slot)[0, bs]
    ru, vdu, vcu = model.sample(np.array([demand]), np.array([int(split)]), np.array([eps]))[0]
    return UtilizationSample(float(ru), float(vdu), float(vcu))
