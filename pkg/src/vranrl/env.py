"""The reconfiguration MDP: state, action encoding and one-slot transitions."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import cost as costmod
from .actions import Action
from .cost import CostBreakdown, CostParams, RouteArrays
from .ran import DEFAULT_CATALOG, FlavorSet, MAX_DEMAND_GBPS, SplitCatalog, SplitId
from .topology import RoutePlan, Topology, route_for, shortest_path
from .traffic import SLOTS_PER_DAY, TrafficTrace
from .utilization import UtilizationModel

N_SUB_ACTIONS = 5


@dataclass(frozen=True)
class State:
    demands: np.ndarray
    prev_action: Action
    slot: int = 0


def action_space_spec(n_bs: int, n_splits: int, n_flavors: int, n_fs: int, n_es: int) -> list[int]:
    """Branch sizes, BS-major: [|I|, |X|, |X|, |L|, |M|] repeated per BS."""
    return [n_splits, n_flavors, n_flavors, n_fs, n_es] * n_bs


def joint_action_count(branch_sizes: list[int]) -> int:
    return math.prod(branch_sizes)


class VranEnv:
    """One vRAN system driven by a demand trace.

    Episodes cover ``horizon`` slots starting at ``start_slot`` of the trace.
    Rewards returned by :meth:`step` are raw (negated dollars).
    """

    def __init__(self, topo: Topology, trace: TrafficTrace, utilization: UtilizationModel | None = None,
                 cost_params: CostParams = CostParams(), flavors: FlavorSet = FlavorSet(),
                 catalog: SplitCatalog = DEFAULT_CATALOG, horizon: int = SLOTS_PER_DAY):
        if trace.n_bs != len(topo.ru_ids):
            raise ValueError(f"trace has {trace.n_bs} BSs but topology has {len(topo.ru_ids)} RUs")
        if trace.n_slots < 1:
            raise ValueError("empty trace")
        if not topo.fs_ids or not topo.es_ids:
            raise ValueError("topology needs at least one FS and one ES")
        self.topo = topo
        self.trace = trace
        self.catalog = catalog
        self.utilization = utilization or UtilizationModel(catalog=catalog)
        self.cost_params = cost_params
        self.flavors = flavors
        self.horizon = horizon
        self.K, self.L, self.M = len(topo.ru_ids), len(topo.fs_ids), len(topo.es_ids)
        self._flavor_values = flavors.values()
        self._build_route_tables()
        self._state: State | None = None

    def with_cost_params(self, cost_params: CostParams) -> "VranEnv":
        return VranEnv(self.topo, self.trace, self.utilization, cost_params, self.flavors, self.catalog, self.horizon)

    # -- routes ------------------------------------------------------------
    def _build_route_tables(self) -> None:
        t = self.topo
        self._len_0m = np.array([shortest_path(t, t.epc_id, m).length_km for m in t.es_ids])
        self._ml = [[shortest_path(t, m, l) for l in t.fs_ids] for m in t.es_ids]
        self._lk = [[shortest_path(t, l, k) for k in t.ru_ids] for l in t.fs_ids]
        self._mk = [[shortest_path(t, m, k) for k in t.ru_ids] for m in t.es_ids]
        self._len_ml = np.array([[p.length_km for p in row] for row in self._ml])
        self._d_ml = np.array([[p.delay_ms for p in row] for row in self._ml])
        self._len_lk = np.array([[p.length_km for p in row] for row in self._lk])
        self._d_lk = np.array([[p.delay_ms for p in row] for row in self._lk])
        self._len_mk = np.array([[p.length_km for p in row] for row in self._mk])
        self._d_mk = np.array([[p.delay_ms for p in row] for row in self._mk])

    def route_arrays(self, action: Action, bs: np.ndarray | None = None) -> RouteArrays:
        """Segment lengths/delays of ``action``; ``bs`` maps entries to BS indices (default 0..K-1)."""
        k = np.arange(self.K) if bs is None else np.asarray(bs, dtype=int)
        fs_used = action.uses_fs
        z, m = action.z, action.zeta

        def pick(values, mask):
            return np.where(mask, values, np.nan)

        return RouteArrays(
            len_0m=self._len_0m[m],
            len_ml=pick(self._len_ml[m, z], fs_used),
            len_lk=pick(self._len_lk[z, k], fs_used),
            len_mk=pick(self._len_mk[m, k], ~fs_used),
            d_ml=pick(self._d_ml[m, z], fs_used),
            d_lk=pick(self._d_lk[z, k], fs_used),
            d_mk=pick(self._d_mk[m, k], ~fs_used),
        )

    def route_plans(self, action: Action) -> list[RoutePlan]:
        t = self.topo
        return [route_for(t, t.ru_ids[k], int(s), t.fs_ids[int(z)] if s != SplitId.S4 else None, t.es_ids[int(m)])
                for k, (s, z, m) in enumerate(zip(action.split, action.z, action.zeta))]

    # -- action encoding ---------------------------------------------------
    @property
    def branch_sizes(self) -> list[int]:
        return action_space_spec(self.K, len(self.catalog), len(self.flavors), self.L, self.M)

    def action_from_indices(self, idx) -> Action:
        idx = np.asarray(idx, dtype=int).reshape(self.K, N_SUB_ACTIONS)
        sizes = np.array(self.branch_sizes).reshape(self.K, N_SUB_ACTIONS)
        if np.any(idx < 0) or np.any(idx >= sizes):
            raise ValueError(f"action indices {idx.tolist()} outside branch sizes")
        return Action(idx[:, 0], self._flavor_values[idx[:, 1]], self._flavor_values[idx[:, 2]], idx[:, 3], idx[:, 4])

    def indices_from_action(self, action: Action) -> np.ndarray:
        xi = np.searchsorted(self._flavor_values, action.x)
        yi = np.searchsorted(self._flavor_values, action.y)
        ok = (xi < len(self._flavor_values)) & (yi < len(self._flavor_values))
        if not np.all(ok) or np.any(self._flavor_values[np.minimum(xi, len(self._flavor_values) - 1)] != action.x) \
                or np.any(self._flavor_values[np.minimum(yi, len(self._flavor_values) - 1)] != action.y):
            raise ValueError("action flavors are not in the flavor set")
        return np.stack([action.split, xi, yi, action.z, action.zeta], axis=1).reshape(-1)

    def validate(self, action: Action) -> None:
        if action.n_bs != self.K:
            raise ValueError(f"action covers {action.n_bs} BSs, env has {self.K}")
        if np.any((action.split < 0) | (action.split >= len(self.catalog))):
            raise ValueError("split index out of range")
        if np.any((action.z < 0) | (action.z >= self.L)) or np.any((action.zeta < 0) | (action.zeta >= self.M)):
            raise ValueError("location index out of range")
        self.indices_from_action(action)

    # -- state encoding ----------------------------------------------------
    @property
    def state_dim(self) -> int:
        return self.K * (1 + len(self.catalog) + 2 + self.L + self.M)

    def encode_state(self, state: State) -> np.ndarray:
        K, n_split = self.K, len(self.catalog)
        a = state.prev_action
        fmax = self.flavors.max if self.flavors.max > 0 else 1.0
        blocks = [
            (np.asarray(state.demands, float) / MAX_DEMAND_GBPS)[:, None],
            np.eye(n_split)[a.split],
            (a.x / fmax)[:, None],
            (a.y / fmax)[:, None],
            np.eye(self.L)[a.z],
            np.eye(self.M)[a.zeta],
        ]
        return np.concatenate(blocks, axis=1).reshape(K * (1 + n_split + 2 + self.L + self.M))

    # -- dynamics ----------------------------------------------------------
    def initial_action(self, rng: np.random.Generator) -> Action:
        top = self.flavors.max
        return Action(np.full(self.K, int(SplitId.S1)), np.full(self.K, top), np.full(self.K, top),
                      rng.integers(0, self.L, size=self.K), rng.integers(0, self.M, size=self.K))

    def reset(self, episode_seed: int = 0, start_slot: int = 0, horizon: int | None = None) -> State:
        horizon = self.horizon if horizon is None else horizon
        if horizon < 1 or start_slot < 0 or start_slot + horizon > self.trace.n_slots:
            raise ValueError(f"episode [{start_slot}, {start_slot + horizon}) does not fit trace of "
                             f"{self.trace.n_slots} slots")
        rng = np.random.default_rng(episode_seed)
        self._start = start_slot
        self._ep_horizon = horizon
        self._noise = self.utilization.noise(episode_seed, horizon, self.K, first_slot=start_slot)
        self._state = State(self.trace.demands[start_slot].copy(), self.initial_action(rng), 0)
        return self._state

    @property
    def state(self) -> State:
        return self._state

    def slot_cost(self, prev: Action, action: Action, demands: np.ndarray, noise: np.ndarray | None) -> tuple[CostBreakdown, np.ndarray]:
        util = self.utilization.sample(demands, action.split, noise)
        if self.cost_params.penalize_link_overflow:
            routes = self.route_plans(action)
        else:
            routes = self.route_arrays(action)
        bd = costmod.evaluate(self.cost_params, self.topo, prev, action, util, routes, demands, self.catalog)
        return bd, util

    def step(self, action: Action) -> tuple[State, float, CostBreakdown, bool]:
        if self._state is None:
            raise RuntimeError("call reset() before step()")
        self.validate(action)
        s = self._state
        n = s.slot
        bd, _ = self.slot_cost(s.prev_action, action, s.demands, self._noise[n])
        done = n + 1 >= self._ep_horizon
        nxt = self._start + min(n + 1, self._ep_horizon - 1)
        self._state = State(self.trace.demands[nxt].copy(), action, n + 1)
        return self._state, bd.reward, bd, done
