"""Per-BS demand traces: synthetic diurnal generator and CSV ingestion."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ran import MAX_DEMAND_GBPS

logger = logging.getLogger(__name__)

SLOTS_PER_DAY = 144  # 10-minute slots
SLOT_MINUTES = 10
TROUGH_HOUR = 4.0
PEAK_HOUR = 20.0
FLOOR_FRACTION = 0.08


@dataclass
class TrafficTrace:
    demands: np.ndarray  # (n_slots, n_bs) Gbps
    clamped_cells: int = 0

    def __post_init__(self):
        self.demands = np.asarray(self.demands, dtype=float)
        if self.demands.ndim != 2:
            raise ValueError("demands must be a [slot][bs] matrix")
        if np.any(~np.isfinite(self.demands)) or np.any(self.demands < 0) \
                or np.any(self.demands > MAX_DEMAND_GBPS):
            raise ValueError(f"demands must lie in [0, {MAX_DEMAND_GBPS}] Gbps")

    @property
    def n_slots(self) -> int:
        return self.demands.shape[0]

    @property
    def n_bs(self) -> int:
        return self.demands.shape[1]

    def window(self, start: int, length: int) -> "TrafficTrace":
        if start < 0 or start + length > self.n_slots:
            raise ValueError(f"window [{start}, {start + length}) exceeds trace of {self.n_slots} slots")
        return TrafficTrace(self.demands[start:start + length].copy())

    def save(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["slot", "bs_id", "demand_gbps"])
            for n in range(self.n_slots):
                for k in range(self.n_bs):
                    w.writerow([n, k, repr(float(self.demands[n, k]))])


def diurnal_shape(hour: np.ndarray) -> np.ndarray:
    """Smooth daily profile in [0, 1]: 0 at 04:00, 1 at 20:00."""
    h = np.mod(np.asarray(hour, dtype=float) - TROUGH_HOUR, 24.0)
    rise = PEAK_HOUR - TROUGH_HOUR
    up = 0.5 * (1.0 - np.cos(np.pi * h / rise))
    down = 0.5 * (1.0 + np.cos(np.pi * (h - rise) / (24.0 - rise)))
    return np.where(h <= rise, up, down)


def generate_diurnal(n_days: int, n_bs: int, peak_gbps: float = MAX_DEMAND_GBPS, seed: int = 0,
                     noise_std: float = 0.05, max_phase_hours: float = 2.0,
                     slots_per_day: int = SLOTS_PER_DAY) -> TrafficTrace:
    """Daily-periodic demand with an ~92% peak-to-trough swing and per-BS phase offsets."""
    if not 0.0 <= peak_gbps <= MAX_DEMAND_GBPS:
        raise ValueError(f"peak must lie in [0, {MAX_DEMAND_GBPS}] Gbps")
    if n_days < 1 or n_bs < 1:
        raise ValueError("need at least one day and one BS")
    rng = np.random.default_rng(seed)
    phase = rng.uniform(-max_phase_hours, max_phase_hours, size=n_bs)
    n_slots = n_days * slots_per_day
    hours = np.arange(n_slots) * (24.0 / slots_per_day)
    shape = diurnal_shape(hours[:, None] - phase[None, :])
    noise = rng.normal(0.0, noise_std, size=(n_slots, n_bs)) if noise_std > 0 else 0.0
    demand = peak_gbps * (FLOOR_FRACTION + (1.0 - FLOOR_FRACTION) * shape) * (1.0 + noise)
    return TrafficTrace(np.clip(demand, 0.0, MAX_DEMAND_GBPS))


def load_trace(path) -> TrafficTrace:
    """Read a dense ``slot,bs_id,demand_gbps`` CSV; values above 4 Gbps are clamped."""
    path = Path(path)
    cells: dict[tuple[int, int], float] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["slot", "bs_id", "demand_gbps"]:
            raise ValueError(f"{path}: expected header slot,bs_id,demand_gbps")
        for lineno, row in enumerate(reader, start=2):
            try:
                slot, bs, val = int(row["slot"]), int(row["bs_id"]), float(row["demand_gbps"])
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: non-numeric value") from exc
            if slot < 0 or bs < 0:
                raise ValueError(f"{path}:{lineno}: negative slot or bs index")
            if not np.isfinite(val):
                raise ValueError(f"{path}:{lineno}: non-finite demand")
            if val < 0:
                raise ValueError(f"{path}:{lineno}: negative demand {val}")
            if (slot, bs) in cells:
                raise ValueError(f"{path}:{lineno}: duplicate cell slot={slot} bs={bs}")
            cells[(slot, bs)] = val
    if not cells:
        raise ValueError(f"{path}: empty trace")
    n_slots = max(s for s, _ in cells) + 1
    n_bs = max(b for _, b in cells) + 1
    demands = np.empty((n_slots, n_bs))
    for n in range(n_slots):
        for k in range(n_bs):
            if (n, k) not in cells:
                raise ValueError(f"{path}: missing cell slot={n} bs={k} (trace must be dense)")
            demands[n, k] = cells[(n, k)]
    over = demands > MAX_DEMAND_GBPS
    clamped = int(over.sum())
    if clamped:
        logger.warning("%s: clamped %d cells to %.1f Gbps", path, clamped, MAX_DEMAND_GBPS)
        demands[over] = MAX_DEMAND_GBPS
    return TrafficTrace(demands, clamped_cells=clamped)
