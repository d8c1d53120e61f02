"""Reference policies: best static provisioning (BSP), random, and multi-agent D3QN (MDQ).

BSP fixes one joint action chosen for every BS's peak demand, with mean
(noise-free) utilization. Every cost term except server capacity excess is
separable per BS, so the per-BS optimum is exact whenever capacities are not
binding; otherwise a greedy repair plus coordinate descent takes over. Exact
joint enumeration is used when the joint space is small enough.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import cost as costmod
from .actions import Action
from .agent import (AgentConfig, BranchingQNet, ReplayBuffer, select_action, train_step)
from .env import N_SUB_ACTIONS, VranEnv
from .nn import AdamState
from .policies import RandomPolicy, StaticPolicy, random_policy, rollout

logger = logging.getLogger(__name__)

__all__ = ["BspResult", "InfeasibleCapacityError", "bsp_search", "static_peak_cost", "per_bs_static_costs",
           "StaticPolicy", "RandomPolicy", "random_policy", "MdqPolicy", "MdqResult", "mdq_training"]


class InfeasibleCapacityError(RuntimeError):
    def __init__(self, violations: dict):
        self.violations = violations
        super().__init__(f"server capacity exceeded after repair: {violations}")


@dataclass
class BspResult:
    policy: StaticPolicy
    cost: float
    mode: str
    repaired: bool
    peak_demands: np.ndarray
    capacity_violations: dict = field(default_factory=dict)

    @property
    def action(self) -> Action:
        return self.policy.action


def peak_demands(env: VranEnv, trace=None) -> np.ndarray:
    trace = env.trace if trace is None else trace
    if trace.n_slots < 1:
        raise ValueError("empty trace")
    return trace.demands.max(axis=0)


def static_peak_cost(env: VranEnv, action: Action, peaks: np.ndarray) -> float:
    """Slot cost of holding ``action`` at peak demand with mean utilization (no change fees)."""
    bd, _ = env.slot_cost(action, action, np.asarray(peaks, float), None)
    return bd.total_j


def _candidate_grid(env: VranEnv) -> np.ndarray:
    """All per-BS sub-action index tuples, lexicographic, shape (N, 5)."""
    sizes = env.branch_sizes[:N_SUB_ACTIONS]
    return np.indices(sizes).reshape(N_SUB_ACTIONS, -1).T


def per_bs_static_costs(env: VranEnv, bs: int, peak: float):
    """Separable static cost of every candidate for one BS.

    Returns (candidate indices (N, 5), cost (N,), effective vDU RC (N,), vCU RC (N,)).
    """
    grid = _candidate_grid(env)
    n = len(grid)
    fv = env.flavors.values()
    cand = Action(grid[:, 0], fv[grid[:, 1]], fv[grid[:, 2]], grid[:, 3], grid[:, 4])
    lam = np.full(n, float(peak))
    p = env.cost_params
    util = env.utilization.sample(lam, cand.split, None)
    routes = env.route_arrays(cand, bs=np.full(n, bs))
    fees = np.array([p.kappa_ru, p.kappa_fs, p.kappa_es])
    over = np.maximum(0.0, cand.x_effective - util[:, 1]) + np.maximum(0.0, cand.y - util[:, 2])
    declined = (costmod.delay_excess(cand.split, routes, env.catalog)
                + costmod.underprovision_excess(cand, util))
    c = (util @ fees + p.kappa_o * over + p.kappa_d * declined
         + costmod.routing_cost_per_bs(p, routes, cand.split, lam, env.catalog))
    return grid, c, cand.x_effective, np.asarray(cand.y, float)


def _capacity_penalty(env, fs_load, es_load) -> np.ndarray:
    fs_x = np.maximum(0.0, fs_load - env.topo.fs_capacity).sum(axis=-1)
    es_x = np.maximum(0.0, es_load - env.topo.es_capacity).sum(axis=-1)
    return env.cost_params.kappa_d * (fs_x + es_x)


def _exact(env, tables) -> tuple[list[int], float]:
    """Joint enumeration by broadcasting; ties go to the lexicographically first joint action."""
    K = len(tables)
    total = 0.0
    fs_load = [0.0] * env.L
    es_load = [0.0] * env.M
    for k, (grid, c, x, y) in enumerate(tables):
        shape = [1] * K
        shape[k] = len(c)
        total = total + c.reshape(shape)
        for l in range(env.L):
            fs_load[l] = fs_load[l] + (x * (grid[:, 3] == l)).reshape(shape)
        for m in range(env.M):
            es_load[m] = es_load[m] + (y * (grid[:, 4] == m)).reshape(shape)
    full = [len(t[1]) for t in tables]
    fs = np.stack([np.broadcast_to(a, full) for a in fs_load], axis=-1)
    es = np.stack([np.broadcast_to(a, full) for a in es_load], axis=-1)
    total = np.broadcast_to(total, full) + _capacity_penalty(env, fs, es)
    flat = int(np.argmin(total))
    return list(np.unravel_index(flat, full)), float(total.reshape(-1)[flat])


def _loads(env, tables, choice):
    fs = np.zeros(env.L)
    es = np.zeros(env.M)
    for (grid, _, x, y), j in zip(tables, choice):
        fs[grid[j, 3]] += x[j]
        es[grid[j, 4]] += y[j]
    return fs, es


def _joint_cost(env, tables, choice) -> float:
    fs, es = _loads(env, tables, choice)
    return float(sum(t[1][j] for t, j in zip(tables, choice)) + _capacity_penalty(env, fs, es))


def _best_response(env, tables, choice, k) -> int:
    """Cheapest candidate for BS k given every other BS's current loads."""
    grid, c, x, y = tables[k]
    fs, es = _loads(env, tables, choice)
    fs[grid[choice[k], 3]] -= x[choice[k]]
    es[grid[choice[k], 4]] -= y[choice[k]]
    fs_all = np.tile(fs, (len(c), 1))
    es_all = np.tile(es, (len(c), 1))
    fs_all[np.arange(len(c)), grid[:, 3]] += x
    es_all[np.arange(len(c)), grid[:, 4]] += y
    return int(np.argmin(c + _capacity_penalty(env, fs_all, es_all)))


def _decomposed(env, tables) -> tuple[list[int], float, bool]:
    choice = [int(np.argmin(t[1])) for t in tables]
    fs, es = _loads(env, tables, choice)
    if not (np.any(fs > env.topo.fs_capacity) or np.any(es > env.topo.es_capacity)):
        return choice, _joint_cost(env, tables, choice), False
    # greedy repair: most expensive BSs claim capacity first
    order = sorted(range(len(tables)), key=lambda k: (-tables[k][1][choice[k]], k))
    placed = list(choice)
    active = set()
    for k in order:
        grid, c, x, y = tables[k]
        fs, es = np.zeros(env.L), np.zeros(env.M)
        for j in active:
            g = tables[j][0]
            fs[g[placed[j], 3]] += tables[j][2][placed[j]]
            es[g[placed[j], 4]] += tables[j][3][placed[j]]
        fs_all = np.tile(fs, (len(c), 1))
        es_all = np.tile(es, (len(c), 1))
        fs_all[np.arange(len(c)), grid[:, 3]] += x
        es_all[np.arange(len(c)), grid[:, 4]] += y
        placed[k] = int(np.argmin(c + _capacity_penalty(env, fs_all, es_all)))
        active.add(k)
    # coordinate descent on the true joint objective
    best = _joint_cost(env, tables, placed)
    for _ in range(100):
        improved = False
        for k in range(len(tables)):
            trial = list(placed)
            trial[k] = _best_response(env, tables, placed, k)
            cost = _joint_cost(env, tables, trial)
            if cost < best - 1e-12:
                placed, best, improved = trial, cost, True
        if not improved:
            break
    return placed, best, True


def bsp_search(env: VranEnv, trace=None, mode: str = "auto", exact_limit: int = 10 ** 6,
               allow_violations: bool = False) -> BspResult:
    """Best static joint action for peak demand; ``mode`` is auto, exact or decomposed."""
    if mode not in ("auto", "exact", "decomposed"):
        raise ValueError(f"unknown BSP mode {mode!r}")
    peaks = peak_demands(env, trace)
    tables = [per_bs_static_costs(env, k, peaks[k]) for k in range(env.K)]
    joint = math.prod(len(t[1]) for t in tables)
    use_exact = mode == "exact" or (mode == "auto" and joint <= exact_limit)
    if use_exact:
        choice, cost = _exact(env, tables)
        repaired, used = False, "exact"
    else:
        choice, cost, repaired = _decomposed(env, tables)
        used = "decomposed"
    idx = np.concatenate([t[0][j] for t, j in zip(tables, choice)])
    action = env.action_from_indices(idx)
    fs_x, es_x = costmod.capacity_excess(action, env.topo.fs_capacity, env.topo.es_capacity)
    violations = {**{env.topo.fs_ids[i]: float(v) for i, v in enumerate(fs_x) if v > 0},
                  **{env.topo.es_ids[i]: float(v) for i, v in enumerate(es_x) if v > 0}}
    if violations and not allow_violations:
        raise InfeasibleCapacityError(violations)
    if violations:
        logger.warning("BSP leaves servers over capacity: %s", violations)
    return BspResult(StaticPolicy(action), cost, used, repaired, peaks, violations)


# -- MDQ ----------------------------------------------------------------------

class MdqPolicy:
    """Greedy joint action from independent single-branch agents."""

    def __init__(self, nets: list[BranchingQNet], env: VranEnv, observation: str = "local"):
        self.nets = nets
        self.env = env
        self.observation = observation

    def observe(self, s_vec: np.ndarray, agent: int) -> np.ndarray:
        return _observe(s_vec, agent, self.env, self.observation)

    def indices(self, s_vec: np.ndarray) -> np.ndarray:
        return np.array([net.greedy(net.q_values(self.observe(s_vec, i)))[0, 0]
                         for i, net in enumerate(self.nets)])

    def act(self, state):
        return self.env.action_from_indices(self.indices(self.env.encode_state(state)))


def _observe(s_vec, agent, env, observation):
    if observation == "global":
        return s_vec
    per = env.state_dim // env.K
    k = agent // N_SUB_ACTIONS
    return s_vec[k * per:(k + 1) * per]


@dataclass
class MdqResult:
    nets: list[BranchingQNet]
    metrics: list[dict]
    policy: MdqPolicy


def mdq_training(env: VranEnv, config: AgentConfig, episodes: int, seed: int = 0, observation: str = "local",
                 episode_starts=(0,)) -> MdqResult:
    """One dueling double DQN per sub-action, all trained on the shared reward.

    With ``observation="local"`` every agent of BS k sees only BS k's block of the state.
    """
    if observation not in ("local", "global"):
        raise ValueError("observation must be 'local' or 'global'")
    sizes = env.branch_sizes
    n_agents = len(sizes)
    obs_dim = env.state_dim if observation == "global" else env.state_dim // env.K
    streams = [[np.random.default_rng(s) for s in child.spawn(3)]
               for child in np.random.SeedSequence(seed).spawn(n_agents)]
    nets = [BranchingQNet(obs_dim, [n], config.hidden, config.input_layer, streams[i][0])
            for i, n in enumerate(sizes)]
    targets = [n.copy() for n in nets]
    adams = [AdamState.for_params(n.params(), lr=config.learning_rate) for n in nets]
    buffers = [ReplayBuffer(config.buffer_capacity, obs_dim, 1) for _ in nets]
    policy = MdqPolicy(nets, env, observation)
    warmup = max(config.batch_size, config.learning_starts)

    metrics = []
    step = 0
    for ep in range(episodes):
        eps = config.epsilon(ep, episodes)
        for adam in adams:
            adam.lr = config.lr(ep, episodes)
        start = episode_starts[ep % len(episode_starts)]
        episode_seed = seed * 1_000_003 + ep
        state = env.reset(episode_seed, start)
        s_vec = env.encode_state(state)
        totals = dict.fromkeys(("computing", "overprovisioning", "declined", "instantiation",
                                "reconfiguration", "routing", "total"), 0.0)
        losses = []
        done = False
        while not done:
            obs = [policy.observe(s_vec, i) for i in range(n_agents)]
            idx = np.array([select_action(nets[i], obs[i], eps, streams[i][1])[0] for i in range(n_agents)])
            state, reward, bd, done = env.step(env.action_from_indices(idx))
            s2_vec = env.encode_state(state)
            for i in range(n_agents):
                buffers[i].add(obs[i], idx[i:i + 1], reward / config.reward_scale,
                               policy.observe(s2_vec, i), done)
            s_vec = s2_vec
            for k, v in bd.as_dict().items():
                totals[k] += v
            step += 1
            if len(buffers[0]) >= warmup and step % config.train_every == 0:
                losses.append(np.mean([train_step(nets[i], targets[i], buffers[i], adams[i], config,
                                                  streams[i][2]) for i in range(n_agents)]))
            if step % config.target_sync_every == 0:
                for net, tgt in zip(nets, targets):
                    tgt.load_from(net)
        row = {
            "episode": ep, "return": -totals["total"], "cost_total": totals["total"],
            "cost_declined": totals["declined"], "cost_overprov": totals["overprovisioning"],
            "cost_reconf": totals["reconfiguration"], "cost_routing": totals["routing"], "epsilon": eps,
            "mean_loss": float(np.mean(losses)) if losses else float("nan"),
            "cost_computing": totals["computing"], "cost_instantiation": totals["instantiation"],
            "greedy_cost_total": float("nan"), "greedy_cost_declined": float("nan"),
        }
        if config.greedy_eval:
            g = rollout(policy, env, episode_seed, start)
            row["greedy_cost_total"] = g.total_cost
            row["greedy_cost_declined"] = float(sum(c.declined for c in g.costs))
        metrics.append(row)
    return MdqResult(nets, metrics, policy)
