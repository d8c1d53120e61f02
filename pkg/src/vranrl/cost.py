"""Monetary operation cost of a joint vRAN configuration.

All fee functions are linear: f(v) = kappa * v. The penalty fee ``kappa_d``
is charged per RC of capacity or allocation shortfall and per ms of delay
excess alike.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from .actions import Action
from .ran import DEFAULT_CATALOG, SplitCatalog, SplitId
from .topology import RoutePlan, Topology


@dataclass(frozen=True)
class CostParams:
    kappa_ru: float = 1.0
    kappa_fs: float = 0.5
    kappa_es: float = 0.25
    kappa_o: float = 1.0
    kappa_d: float = 5.0
    kappa_i: float = 0.1
    kappa_r: float = 0.1
    kappa_h: float = 1.0
    # optional per-segment routing fee overrides, keys among bh/mh/fh
    kappa_h_segment: dict = field(default_factory=dict)
    penalize_link_overflow: bool = False

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, float) and v < 0:
                raise ValueError(f"{f.name} must be non-negative")
        bad = set(self.kappa_h_segment) - {"bh", "mh", "fh"}
        if bad:
            raise ValueError(f"unknown routing segments {sorted(bad)}")
        if any(v < 0 for v in self.kappa_h_segment.values()):
            raise ValueError("routing fees must be non-negative")

    def fee_h(self, segment: str) -> float:
        return float(self.kappa_h_segment.get(segment, self.kappa_h))

    def scaled(self, c: float) -> "CostParams":
        vals = {f.name: getattr(self, f.name) for f in fields(self)}
        for name, v in vals.items():
            if isinstance(v, float):
                vals[name] = v * c
        vals["kappa_h_segment"] = {k: v * c for k, v in self.kappa_h_segment.items()}
        return CostParams(**vals)


COST_TERMS = ("computing", "overprovisioning", "declined", "instantiation", "reconfiguration", "routing")


@dataclass(frozen=True)
class CostBreakdown:
    computing: float = 0.0
    overprovisioning: float = 0.0
    declined: float = 0.0
    instantiation: float = 0.0
    reconfiguration: float = 0.0
    routing: float = 0.0

    @property
    def total_j(self) -> float:
        return (self.computing + self.overprovisioning + self.declined
                + self.instantiation + self.reconfiguration + self.routing)

    @property
    def reward(self) -> float:
        return -self.total_j

    def as_dict(self) -> dict[str, float]:
        d = {t: getattr(self, t) for t in COST_TERMS}
        d["total"] = self.total_j
        return d


@dataclass(frozen=True)
class RouteArrays:
    """Segment lengths (km) and delays (ms) per BS; NaN marks an absent segment."""
    len_0m: np.ndarray
    len_ml: np.ndarray
    len_lk: np.ndarray
    len_mk: np.ndarray
    d_ml: np.ndarray
    d_lk: np.ndarray
    d_mk: np.ndarray

    @classmethod
    def from_routes(cls, routes: list[RoutePlan]) -> "RouteArrays":
        def col(seg, attr):
            return np.array([np.nan if getattr(r, seg) is None else getattr(getattr(r, seg), attr)
                             for r in routes], dtype=float)
        return cls(col("p_0m", "length_km"), col("p_ml", "length_km"), col("p_lk", "length_km"),
                   col("p_mk", "length_km"), col("p_ml", "delay_ms"), col("p_lk", "delay_ms"),
                   col("p_mk", "delay_ms"))


def _as_route_arrays(routes) -> RouteArrays:
    return routes if isinstance(routes, RouteArrays) else RouteArrays.from_routes(routes)


def computing_cost(params: CostParams, util: np.ndarray) -> float:
    util = np.asarray(util, dtype=float).reshape(-1, 3)
    fees = np.array([params.kappa_ru, params.kappa_fs, params.kappa_es])
    return float((util @ fees).sum())


def overprovisioning_cost(params: CostParams, x, y, xhat, yhat) -> float:
    over = np.maximum(0.0, np.asarray(x, float) - xhat) + np.maximum(0.0, np.asarray(y, float) - yhat)
    return float(params.kappa_o * over.sum())


def capacity_excess(action: Action, fs_capacity: np.ndarray, es_capacity: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-server allocation above capacity (RC), FS first then ES."""
    fs_load = np.bincount(action.z, weights=action.x_effective, minlength=len(fs_capacity))
    es_load = np.bincount(action.zeta, weights=action.y, minlength=len(es_capacity))
    return np.maximum(0.0, fs_load - fs_capacity), np.maximum(0.0, es_load - es_capacity)


def delay_excess(splits: np.ndarray, routes, catalog: SplitCatalog = DEFAULT_CATALOG) -> np.ndarray:
    """Per-BS worst delay excess (ms) over the segments present in the route."""
    r = _as_route_arrays(routes)
    splits = np.asarray(splits)
    d_h = np.array([np.nan if catalog[s].hls_delay_req_ms is None else catalog[s].hls_delay_req_ms
                    for s in SplitId])[splits]
    d_l = catalog.lls_delay_req_ms
    cands = np.stack([r.d_ml - d_h, r.d_lk - d_l, r.d_mk - d_l, np.zeros_like(r.d_ml)])
    return np.nanmax(cands, axis=0)


def underprovision_excess(action: Action, util: np.ndarray) -> np.ndarray:
    util = np.asarray(util, dtype=float).reshape(-1, 3)
    return np.maximum(0.0, np.maximum(util[:, 1] - action.x_effective, util[:, 2] - action.y))


def link_overflow(topo: Topology, routes: list[RoutePlan], splits, demands,
                  catalog: SplitCatalog = DEFAULT_CATALOG) -> float:
    """Total Gbps above link capacity when every BS flow is booked on its links."""
    load: dict[tuple[int, int], float] = {}
    for r, s, lam in zip(routes, splits, demands):
        spec = catalog[int(s)]
        seg_load = {"p_0m": lam, "p_ml": spec.mh_load(lam), "p_mk": spec.mh_load(lam), "p_lk": spec.fh_load_gbps}
        for name, seg in r.segments().items():
            for u, v in seg.links:
                key = (min(u, v), max(u, v))
                load[key] = load.get(key, 0.0) + seg_load[name]
    return float(sum(max(0.0, l - topo.link(*k).capacity_gbps) for k, l in load.items()))


def declined_cost(params: CostParams, topo: Topology, action: Action, util, routes,
                  catalog: SplitCatalog = DEFAULT_CATALOG, demands=None) -> float:
    fs_x, es_x = capacity_excess(action, topo.fs_capacity, topo.es_capacity)
    total = fs_x.sum() + es_x.sum()
    total += delay_excess(action.split, routes, catalog).sum()
    total += underprovision_excess(action, util).sum()
    if params.penalize_link_overflow:
        if demands is None or isinstance(routes, RouteArrays):
            raise ValueError("link overflow needs route plans and demands")
        total += link_overflow(topo, routes, action.split, demands, catalog)
    return float(params.kappa_d * total)


def change_costs(params: CostParams, prev: Action, new: Action) -> tuple[float, float]:
    """(instantiation, reconfiguration) fees for moving from ``prev`` to ``new``."""
    px, nx = prev.x_effective, new.x_effective
    grow = np.maximum(0.0, nx - px) + np.maximum(0.0, new.y - prev.y)
    resize = np.abs(nx - px) + np.abs(new.y - prev.y)
    migrate = nx * (new.z != prev.z) + new.y * (new.zeta != prev.zeta)
    return float(params.kappa_i * grow.sum()), float(params.kappa_r * (resize + migrate).sum())


def routing_cost_per_bs(params: CostParams, routes, splits, demands,
                        catalog: SplitCatalog = DEFAULT_CATALOG) -> np.ndarray:
    r = _as_route_arrays(routes)
    splits = np.asarray(splits)
    demands = np.asarray(demands, dtype=float)
    specs = [catalog[s] for s in SplitId]
    slope = np.array([s.mh_slope for s in specs])[splits]
    offset = np.array([s.mh_offset_gbps for s in specs])[splits]
    fh = np.array([s.fh_load_gbps for s in specs])[splits]
    mh_len = np.where(np.isnan(r.len_ml), np.nan_to_num(r.len_mk), r.len_ml)
    cost = (params.fee_h("bh") * demands * r.len_0m
            + params.fee_h("mh") * (slope * demands + offset) * mh_len
            + params.fee_h("fh") * fh * np.nan_to_num(r.len_lk))
    return cost


def routing_cost(params: CostParams, routes, splits, demands, catalog: SplitCatalog = DEFAULT_CATALOG) -> float:
    return float(routing_cost_per_bs(params, routes, splits, demands, catalog).sum())


def evaluate(params: CostParams, topo: Topology, prev_action: Action, action: Action, util, routes,
             demands, catalog: SplitCatalog = DEFAULT_CATALOG) -> CostBreakdown:
    """All cost terms of one slot; ``reward`` on the result is the negated total."""
    util = np.asarray(util, dtype=float).reshape(-1, 3)
    inst, reconf = change_costs(params, prev_action, action)
    return CostBreakdown(
        computing=computing_cost(params, util),
        overprovisioning=overprovisioning_cost(params, action.x_effective, action.y, util[:, 1], util[:, 2]),
        declined=declined_cost(params, topo, action, util, routes, catalog, demands),
        instantiation=inst,
        reconfiguration=reconf,
        routing=routing_cost(params, routes, action.split, demands, catalog),
    )
