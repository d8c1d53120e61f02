"""Shared builders and independent reference implementations for the tests.

The oracles here are written directly from the model definitions with plain
Python loops, without reusing any vectorised code from the package.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

from vranrl.actions import Action
from vranrl.cost import CostParams
from vranrl.env import VranEnv
from vranrl.ran import FlavorSet
from vranrl.topology import Link, Node, Role, Topology, generate_waxman, route_for
from vranrl.traffic import generate_diurnal
from vranrl.utilization import UtilizationModel, UtilizationModelSpec

# (ru, vdu, vcu) shares and xhaul constants, restated from the model tables
SHARES = {0: (0.48, 0.32, 0.20), 1: (0.48, 0.31, 0.21), 2: (0.48, 0.17, 0.35), 3: (0.0, 0.0, 1.0)}
HLS_DELAY = {0: 10.0, 1: 1.0, 2: 0.25}
LLS_DELAY = 0.25
FH_LOAD = 10.1
O8_LOAD = 157.3


def mh_load(split: int, lam: float) -> float:
    if split == 3:
        return O8_LOAD
    if split == 2:
        return 1.02 * lam + 0.5
    return lam


def line_topology() -> Topology:
    """EPC(0) - ES(1) - FS(2) - RU(3), plus a second FS(4) hanging off the ES."""
    nodes = [Node(0, Role.EPC, (0.0, 0.0)), Node(1, Role.ES, (1.0, 0.0), 100.0),
             Node(2, Role.FS, (2.0, 0.0), 20.0), Node(3, Role.RU, (3.0, 0.0)), Node(4, Role.FS, (1.0, 1.0), 20.0)]
    links = [Link((0, 1), 0.05, 100.0, 0.01, 2.0), Link((1, 2), 0.1, 100.0, 0.01, 1.0),
             Link((2, 3), 0.1, 100.0, 0.01, 0.5), Link((1, 4), 0.02, 100.0, 0.02, 0.7),
             Link((4, 3), 0.3, 100.0, 0.02, 0.9)]
    return Topology(nodes, links, 0, [1], [2, 4], [3])


def desk_env(K=2, n_flavors=8, L=2, M=1, n_nodes=12, topo_seed=1, traffic_seed=2, util_seed=3, noise_cv=0.1,
             horizon=144, n_days=3, cost_params=CostParams(), fs_capacity=20.0, es_capacity=100.0,
             slope=2.0) -> VranEnv:
    topo = generate_waxman(n_nodes, seed=topo_seed, role_counts=(M, L, K), fs_capacity_rc=fs_capacity,
                           es_capacity_rc=es_capacity)
    trace = generate_diurnal(n_days, K, seed=traffic_seed)
    util = UtilizationModel(UtilizationModelSpec(seed=util_seed, noise_cv=noise_cv, slope_rc_per_gbps=slope))
    return VranEnv(topo, trace, util, cost_params, FlavorSet.range(n_flavors), horizon=horizon)


def random_action(rng, K, n_flavors, L, M) -> Action:
    return Action(rng.integers(0, 4, K), rng.integers(0, n_flavors, K).astype(float),
                  rng.integers(0, n_flavors, K).astype(float), rng.integers(0, L, K), rng.integers(0, M, K))


# -- small experiment config ---------------------------------------------------

def tiny(**overrides) -> dict:
    data = {
        "name": "tiny",
        "topology": {"n_nodes": 12, "n_es": 1, "n_fs": 2, "n_ru": 2},
        "traffic": {"n_days": 3},
        "catalog": {"n_flavors": 8},
        "agent": {"hidden_widths": [16], "batch_size": 16, "buffer_capacity": 2000, "learning_rate": 1e-3},
        "run": {"episodes": 2, "episode_slots": 24, "eval_start_slot": 144, "eval_slots": 48},
        "seeds": {"topology_seed": 1, "traffic_seed": 2, "util_seed": 3, "agent_seed": 4},
    }
    for dotted, v in overrides.items():
        sec, key = dotted.split(".")
        data.setdefault(sec, {})[key] = v
    return data


# -- straight-line cost oracle -------------------------------------------------

def oracle_cost(params: CostParams, topo: Topology, prev: Action, act: Action, util, routes, demands) -> dict:
    """Per-term slot cost written out term by term.

    ``util`` is a list of (ru, vdu, vcu) triples; ``routes`` a list of RoutePlans
    (or objects with the same attributes). Under S4 the vDU does not exist, so
    its allocation counts as zero everywhere.
    """
    K = len(demands)
    kd = params.kappa_d

    def xe(a, k):
        return 0.0 if int(a.split[k]) == 3 else float(a.x[k])

    computing = 0.0
    over = 0.0
    for k in range(K):
        w, xh, yh = util[k]
        computing += params.kappa_ru * w + params.kappa_fs * xh + params.kappa_es * yh
        over += params.kappa_o * (max(0.0, xe(act, k) - xh) + max(0.0, float(act.y[k]) - yh))

    declined = 0.0
    for li, cap in enumerate(topo.fs_capacity):
        load = sum(xe(act, k) for k in range(K) if int(act.z[k]) == li)
        declined += kd * max(0.0, load - cap)
    for mi, cap in enumerate(topo.es_capacity):
        load = sum(float(act.y[k]) for k in range(K) if int(act.zeta[k]) == mi)
        declined += kd * max(0.0, load - cap)
    for k in range(K):
        s = int(act.split[k])
        r = routes[k]
        terms = [0.0]
        if s == 3:
            terms.append(r.p_mk.delay_ms - LLS_DELAY)
        else:
            terms.append(r.p_ml.delay_ms - HLS_DELAY[s])
            terms.append(r.p_lk.delay_ms - LLS_DELAY)
        declined += kd * max(terms)
        declined += kd * max(0.0, util[k][1] - xe(act, k), util[k][2] - float(act.y[k]))

    inst = 0.0
    reconf = 0.0
    for k in range(K):
        dx = xe(act, k) - xe(prev, k)
        dy = float(act.y[k]) - float(prev.y[k])
        inst += params.kappa_i * (max(0.0, dx) + max(0.0, dy))
        reconf += params.kappa_r * (abs(dx) + abs(dy)
                                    + (xe(act, k) if int(act.z[k]) != int(prev.z[k]) else 0.0)
                                    + (float(act.y[k]) if int(act.zeta[k]) != int(prev.zeta[k]) else 0.0))

    routing = 0.0
    for k in range(K):
        s = int(act.split[k])
        lam = float(demands[k])
        r = routes[k]
        routing += params.fee_h("bh") * lam * r.p_0m.length_km
        if s == 3:
            routing += params.fee_h("mh") * O8_LOAD * r.p_mk.length_km
        else:
            routing += params.fee_h("mh") * mh_load(s, lam) * r.p_ml.length_km
            routing += params.fee_h("fh") * FH_LOAD * r.p_lk.length_km

    if params.penalize_link_overflow:
        load = {}
        for k in range(K):
            s = int(act.split[k])
            lam = float(demands[k])
            segs = [(routes[k].p_0m, lam)]
            if s == 3:
                segs.append((routes[k].p_mk, O8_LOAD))
            else:
                segs += [(routes[k].p_ml, mh_load(s, lam)), (routes[k].p_lk, FH_LOAD)]
            for path, gbps in segs:
                for u, v in zip(path.nodes[:-1], path.nodes[1:]):
                    key = (min(u, v), max(u, v))
                    load[key] = load.get(key, 0.0) + gbps
        declined += kd * sum(max(0.0, l - topo.link(*key).capacity_gbps) for key, l in load.items())

    out = {"computing": computing, "overprovisioning": over, "declined": declined,
           "instantiation": inst, "reconfiguration": reconf, "routing": routing}
    out["total"] = sum(out.values())
    return out


def plans_for(topo, act):
    return [route_for(topo, topo.ru_ids[k], int(s), None if s == 3 else topo.fs_ids[int(z)], topo.es_ids[int(m)])
            for k, (s, z, m) in enumerate(zip(act.split, act.z, act.zeta))]


def random_cost_case(seed):
    """A random (topology, fees, previous action, action, utilization, demands) instance."""
    rng = np.random.default_rng(seed)
    K, L, M = int(rng.integers(1, 5)), int(rng.integers(1, 4)), int(rng.integers(1, 3))
    nf = int(rng.integers(2, 17))
    topo = generate_waxman(K + L + M + 1 + int(rng.integers(0, 6)), seed=int(rng.integers(1 << 30)),
                           role_counts=(M, L, K), fs_capacity_rc=float(rng.uniform(5, 30)),
                           es_capacity_rc=float(rng.uniform(10, 60)))
    params = CostParams(*rng.uniform(0, 3, 8), kappa_h_segment={"fh": float(rng.uniform(0, 2))}
                        if rng.random() < 0.3 else {}, penalize_link_overflow=bool(rng.random() < 0.3))
    prev = random_action(rng, K, nf, L, M)
    act = random_action(rng, K, nf, L, M)
    util = rng.uniform(0, 12, size=(K, 3))
    util[act.split == 3, :2] = 0.0
    demands = rng.uniform(0, 4, K)
    return topo, params, prev, act, util, demands


def oracle_utilization(base, slope, lam, split, noise=0.0):
    total = max(0.0, (base + slope * lam) * (1.0 + noise))
    return tuple(total * s for s in SHARES[split])


# -- brute-force shortest paths ------------------------------------------------

def brute_force_path(topo: Topology, src: int, dst: int):
    """Min-weight simple path by full enumeration; ties to the smallest node sequence."""
    import networkx as nx
    if src == dst:
        return (src,), 0.0
    g = nx.Graph()
    for link in topo.links:
        g.add_edge(*link.endpoints, weight=link.weight)
    best = None
    for path in nx.all_simple_paths(g, src, dst):
        w = 0.0
        for u, v in zip(path[:-1], path[1:]):
            w += g[u][v]["weight"]
        key = (w, tuple(path))
        if best is None or key < best:
            best = key
    return best[1], best[0]


# -- reference dueling / double-Q --------------------------------------------------

def dense_forward(layers, x):
    """Plain affine/ReLU stack from (W, b, activation) triples."""
    h = np.array(x, dtype=float)
    for W, b, act in layers:
        h = h @ W + b
        if act == "relu":
            h = np.maximum(h, 0.0)
    return h


def dueling_q(net, s):
    """Single-branch dueling Q: V + A - mean(A), computed from the raw weights."""
    trunk = [(l.W, l.b, l.activation) for l in net.trunk.layers]
    h = dense_forward(trunk, s)
    v = dense_forward([(l.W, l.b, l.activation) for l in net.value.layers], h)
    a = dense_forward([(l.W, l.b, l.activation) for l in net.adv.layers], h)
    return v + a - a.mean(axis=-1, keepdims=True)


def ddqn_targets(online, target, r, s2, done, gamma):
    """Scalar double-DQN target: r + gamma * Q_target(s', argmax_a Q_online(s', a))."""
    q_on = dueling_q(online, s2)
    q_tg = dueling_q(target, s2)
    out = []
    for i in range(len(r)):
        a = int(np.argmax(q_on[i]))
        out.append(r[i] if done[i] else r[i] + gamma * q_tg[i, a])
    return np.array(out)


def brute_force_static(env: VranEnv, peaks) -> tuple[float, Action]:
    """Exhaustive best static joint action, scored through the environment's cost path."""
    sizes = env.branch_sizes
    best = (math.inf, None)
    for idx in itertools.product(*[range(n) for n in sizes]):
        a = env.action_from_indices(idx)
        bd, _ = env.slot_cost(a, a, np.asarray(peaks, float), None)
        if bd.total_j < best[0]:
            best = (bd.total_j, a)
    return best
