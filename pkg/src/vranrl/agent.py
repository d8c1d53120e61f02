"""Branching dueling double DQN over a shared trunk, and its training loop.

Every sub-action (split, vDU flavor, vCU flavor, vDU location, vCU location
of every BS) gets its own advantage head. Per branch,

    Q_c(s, j) = V(s) + A_c(s, j) - mean_j' A_c(s, j')

Targets average the target-network value of the online-greedy sub-action
over all branches, and the loss is the branch-averaged squared TD error.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .env import VranEnv
from .nn import (IDENTITY, RELU, AdamState, DenseNet, SignatureError, _named, adam_step, assign_arrays,
                 load_arrays, save_arrays)

logger = logging.getLogger(__name__)

METRIC_COLUMNS = ("episode", "return", "cost_total", "cost_declined", "cost_overprov", "cost_reconf",
                  "cost_routing", "epsilon", "mean_loss", "cost_computing", "cost_instantiation",
                  "greedy_cost_total", "greedy_cost_declined")


@dataclass
class AgentConfig:
    gamma: float = 0.99
    eps_max: float = 1.0
    eps_min: float = 0.015
    # epsilon reaches 1.05 * eps_min after this fraction of the episodes
    eps_decay_fraction: float = 0.8
    batch_size: int = 128
    target_sync_every: int = 500
    learning_rate: float = 1e-4
    # learning rate at the last episode, reached geometrically; None keeps it constant
    learning_rate_final: float | None = None
    reward_scale: float = 100.0
    buffer_capacity: int = 10 ** 6
    hidden: tuple[int, ...] = (512, 256)
    input_layer: bool = True
    train_every: int = 1
    learning_starts: int = 0
    greedy_eval: bool = True

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if not 0.0 <= self.eps_min <= self.eps_max <= 1.0:
            raise ValueError("need 0 <= eps_min <= eps_max <= 1")
        if self.batch_size < 1 or self.target_sync_every < 1 or self.train_every < 1:
            raise ValueError("batch size, sync period and train period must be positive")
        if self.reward_scale <= 0 or self.learning_rate <= 0:
            raise ValueError("reward scale and learning rate must be positive")
        if self.learning_rate_final is not None and self.learning_rate_final <= 0:
            raise ValueError("final learning rate must be positive")
        if self.buffer_capacity < self.batch_size:
            raise ValueError("buffer capacity smaller than batch size")

    def epsilon(self, episode: int, n_episodes: int) -> float:
        """Exponential per-episode decay from eps_max toward eps_min."""
        if self.eps_max <= self.eps_min:
            return self.eps_min
        horizon = max(1.0, self.eps_decay_fraction * n_episodes)
        rate = (1.05 * self.eps_min / self.eps_max) ** (1.0 / horizon) if self.eps_min > 0 else 0.0
        return float(max(self.eps_min, self.eps_max * rate ** episode))

    def lr(self, episode: int, n_episodes: int) -> float:
        if self.learning_rate_final is None or n_episodes <= 1:
            return self.learning_rate
        frac = episode / (n_episodes - 1)
        return float(self.learning_rate * (self.learning_rate_final / self.learning_rate) ** frac)


class BranchingQNet:
    """Shared ReLU trunk, linear state-value head, one linear advantage head per branch."""

    def __init__(self, state_dim: int, branch_sizes: list[int], hidden=(512, 256), input_layer: bool = True,
                 rng: np.random.Generator | None = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.state_dim = int(state_dim)
        self.branch_sizes = [int(n) for n in branch_sizes]
        if not self.branch_sizes or min(self.branch_sizes) < 1:
            raise ValueError("every branch needs at least one sub-action")
        widths = ([self.state_dim] if input_layer else []) + list(hidden)
        sizes = [self.state_dim] + widths
        self.trunk = DenseNet.build(sizes, [RELU] * len(widths), rng)
        feat = sizes[-1]
        self.value = DenseNet.build([feat, 1], [IDENTITY], rng)
        self.adv = DenseNet.build([feat, sum(self.branch_sizes)], [IDENTITY], rng)
        self.offsets = np.concatenate([[0], np.cumsum(self.branch_sizes)])
        # maps every output column to its branch, for segment means
        self._branch_of = np.repeat(np.arange(len(self.branch_sizes)), self.branch_sizes)
        self._inv_size = 1.0 / np.array(self.branch_sizes, dtype=float)

    @property
    def n_branches(self) -> int:
        return len(self.branch_sizes)

    @property
    def n_outputs(self) -> int:
        return int(self.offsets[-1])

    def params(self) -> list[np.ndarray]:
        return self.trunk.params() + self.value.params() + self.adv.params()

    def named_params(self) -> list[tuple[str, np.ndarray]]:
        return _named(self.trunk, "trunk") + _named(self.value, "value") + _named(self.adv, "adv")

    def copy(self) -> "BranchingQNet":
        out = object.__new__(BranchingQNet)
        out.__dict__.update(self.__dict__)
        out.trunk, out.value, out.adv = self.trunk.copy(), self.value.copy(), self.adv.copy()
        return out

    def load_from(self, other: "BranchingQNet") -> None:
        if other.branch_sizes != self.branch_sizes:
            raise SignatureError("branch sizes differ")
        self.trunk.load_from(other.trunk)
        self.value.load_from(other.value)
        self.adv.load_from(other.adv)

    def _branch_mean(self, A: np.ndarray) -> np.ndarray:
        """Per-row mean of each branch block, broadcast back to (B, n_outputs)."""
        sums = np.add.reduceat(A, self.offsets[:-1], axis=1)
        return (sums * self._inv_size)[:, self._branch_of]

    def forward(self, states: np.ndarray):
        states = np.atleast_2d(np.asarray(states, dtype=float))
        h, c_trunk = self.trunk.forward(states)
        v, c_val = self.value.forward(h)
        a, c_adv = self.adv.forward(h)
        q = v + a - self._branch_mean(a)
        return q, (c_trunk, c_val, c_adv)

    def q_values(self, states: np.ndarray) -> np.ndarray:
        """Concatenated per-branch Q vectors, shape (B, n_outputs)."""
        return self.forward(states)[0]

    def split_branches(self, q: np.ndarray) -> list[np.ndarray]:
        return [q[..., a:b] for a, b in zip(self.offsets[:-1], self.offsets[1:])]

    def greedy(self, q: np.ndarray) -> np.ndarray:
        """Per-branch argmax (lowest index on ties), shape (B, n_branches)."""
        q = np.atleast_2d(q)
        return np.stack([np.argmax(qb, axis=1) for qb in self.split_branches(q)], axis=1)

    def backward(self, cache, grad_q: np.ndarray) -> list[np.ndarray]:
        """Parameter gradients (params() order) from dLoss/dQ."""
        c_trunk, c_val, c_adv = cache
        grad_v = grad_q.sum(axis=1, keepdims=True)
        grad_a = grad_q - self._branch_mean(grad_q)
        g_val, gh_v = self.value.backward(c_val, grad_v)
        g_adv, gh_a = self.adv.backward(c_adv, grad_a)
        g_trunk, _ = self.trunk.backward(c_trunk, gh_v + gh_a)
        return g_trunk + g_val + g_adv

    def save(self, path) -> None:
        meta = np.array([self.state_dim] + self.branch_sizes, dtype=float)
        save_arrays(path, [("meta.state_dim_and_branches", meta)] + self.named_params())

    def load(self, path) -> None:
        stored = load_arrays(path)
        if not stored or stored[0][0] != "meta.state_dim_and_branches":
            raise SignatureError(f"{path} is not a branching Q-network checkpoint")
        meta = stored[0][1].astype(int).tolist()
        if meta != [self.state_dim] + self.branch_sizes:
            raise SignatureError(f"checkpoint for state/branches {meta} does not match "
                                 f"{[self.state_dim] + self.branch_sizes}")
        assign_arrays(self.named_params(), stored[1:])


def select_action(net: BranchingQNet, state_vec: np.ndarray, epsilon: float, rng: np.random.Generator) -> np.ndarray:
    """Epsilon-greedy: a uniformly random joint action with probability epsilon, else per-branch argmax."""
    if epsilon > 0 and rng.random() < epsilon:
        return np.array([rng.integers(0, n) for n in net.branch_sizes])
    return net.greedy(net.q_values(state_vec))[0]


def td_targets(online: BranchingQNet, target: BranchingQNet, rewards: np.ndarray, next_states: np.ndarray,
               dones: np.ndarray, gamma: float) -> np.ndarray:
    """Branch-averaged double-Q targets; terminal transitions get u = r."""
    rewards = np.asarray(rewards, dtype=float)
    if gamma == 0.0:
        return rewards.copy()
    best = online.greedy(online.q_values(next_states))
    q_tgt = target.q_values(next_states)
    picked = np.take_along_axis(q_tgt, best + online.offsets[:-1], axis=1)
    boot = picked.mean(axis=1)
    return rewards + gamma * (1.0 - np.asarray(dones, dtype=float)) * boot


def branched_loss_and_grads(net: BranchingQNet, states: np.ndarray, actions: np.ndarray, targets: np.ndarray):
    """Mean over the batch of the branch-averaged squared TD error, and its gradients."""
    q, cache = net.forward(states)
    B, nb = actions.shape
    cols = actions + net.offsets[:-1]
    q_sel = np.take_along_axis(q, cols, axis=1)
    resid = targets[:, None] - q_sel
    loss = float((resid ** 2).mean())
    grad_q = np.zeros_like(q)
    np.put_along_axis(grad_q, cols, -2.0 * resid / (B * nb), axis=1)
    return loss, net.backward(cache, grad_q)


class ReplayBuffer:
    """Ring buffer with uniform sampling; storage grows on demand up to capacity."""

    def __init__(self, capacity: int, state_dim: int, n_branches: int):
        self.capacity = int(capacity)
        self.state_dim = state_dim
        self.n_branches = n_branches
        self._alloc = 0
        self.size = 0
        self._pos = 0
        self.s = self.a = self.r = self.s2 = self.d = None
        self._grow(min(self.capacity, 1024))

    def _grow(self, n: int) -> None:
        def resize(old, shape, dtype):
            new = np.zeros(shape, dtype=dtype)
            if old is not None:
                new[:len(old)] = old
            return new
        self.s = resize(self.s, (n, self.state_dim), float)
        self.s2 = resize(self.s2, (n, self.state_dim), float)
        self.a = resize(self.a, (n, self.n_branches), np.int64)
        self.r = resize(self.r, (n,), float)
        self.d = resize(self.d, (n,), float)
        self._alloc = n

    def __len__(self) -> int:
        return self.size

    def add(self, s, a, r, s2, done) -> None:
        if self._pos >= self._alloc and self._alloc < self.capacity:
            self._grow(min(self.capacity, 2 * self._alloc))
        i = self._pos
        self.s[i], self.a[i], self.r[i], self.s2[i], self.d[i] = s, a, r, s2, float(done)
        self._pos = (self._pos + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator):
        if self.size < batch_size:
            raise ValueError(f"buffer holds {self.size} transitions, batch needs {batch_size}")
        idx = rng.integers(0, self.size, size=batch_size)
        return self.s[idx], self.a[idx], self.r[idx], self.s2[idx], self.d[idx]


def train_step(online: BranchingQNet, target: BranchingQNet, buffer: ReplayBuffer, adam: AdamState,
               config: AgentConfig, rng: np.random.Generator) -> float:
    s, a, r, s2, d = buffer.sample(config.batch_size, rng)
    u = td_targets(online, target, r, s2, d, config.gamma)
    loss, grads = branched_loss_and_grads(online, s, a, u)
    adam_step(online.params(), grads, adam)
    return loss


@dataclass
class TrainingResult:
    online: BranchingQNet
    target: BranchingQNet
    metrics: list[dict] = field(default_factory=list)
    config: AgentConfig | None = None

    def save_checkpoint(self, path) -> None:
        self.online.save(path)


def make_net(env: VranEnv, config: AgentConfig, rng: np.random.Generator) -> BranchingQNet:
    return BranchingQNet(env.state_dim, env.branch_sizes, config.hidden, config.input_layer, rng)


def greedy_rollout(net: BranchingQNet, env: VranEnv, episode_seed: int, start_slot: int = 0,
                   horizon: int | None = None):
    """Run one epsilon=0 episode; returns the list of per-slot cost breakdowns."""
    state = env.reset(episode_seed, start_slot, horizon)
    out = []
    done = False
    while not done:
        idx = net.greedy(net.q_values(env.encode_state(state)))[0]
        state, _, bd, done = env.step(env.action_from_indices(idx))
        out.append(bd)
    return out


def run_training(env: VranEnv, config: AgentConfig, episodes: int, seed: int = 0,
                 init_checkpoint=None, episode_starts=(0,), progress: bool = False) -> TrainingResult:
    """Train from scratch, or warm-start from a same-shaped checkpoint."""
    ss = np.random.SeedSequence(seed)
    init_rng, explore_rng, sample_rng = (np.random.default_rng(s) for s in ss.spawn(3))
    online = make_net(env, config, init_rng)
    if init_checkpoint is not None:
        online.load(init_checkpoint)
        if config.eps_max > 0.1:
            config = AgentConfig(**{**asdict(config), "eps_max": 0.1})
    if online.branch_sizes != env.branch_sizes or online.state_dim != env.state_dim:
        raise ValueError("agent and environment branch layouts differ")
    target = online.copy()
    adam = AdamState.for_params(online.params(), lr=config.learning_rate)
    buffer = ReplayBuffer(config.buffer_capacity, env.state_dim, online.n_branches)
    warmup = max(config.batch_size, config.learning_starts)

    metrics = []
    global_step = 0
    for ep in range(episodes):
        eps = config.epsilon(ep, episodes)
        adam.lr = config.lr(ep, episodes)
        start = episode_starts[ep % len(episode_starts)]
        episode_seed = seed * 1_000_003 + ep
        state = env.reset(episode_seed, start)
        s_vec = env.encode_state(state)
        totals = dict.fromkeys(("computing", "overprovisioning", "declined", "instantiation",
                                "reconfiguration", "routing", "total"), 0.0)
        ret = 0.0
        losses = []
        done = False
        while not done:
            idx = select_action(online, s_vec, eps, explore_rng)
            state, reward, bd, done = env.step(env.action_from_indices(idx))
            s2_vec = env.encode_state(state)
            buffer.add(s_vec, idx, reward / config.reward_scale, s2_vec, done)
            s_vec = s2_vec
            ret += reward
            for k, v in bd.as_dict().items():
                totals[k] += v
            global_step += 1
            if len(buffer) >= warmup and global_step % config.train_every == 0:
                losses.append(train_step(online, target, buffer, adam, config, sample_rng))
            if global_step % config.target_sync_every == 0:
                target.load_from(online)
        row = {
            "episode": ep, "return": ret, "cost_total": totals["total"], "cost_declined": totals["declined"],
            "cost_overprov": totals["overprovisioning"], "cost_reconf": totals["reconfiguration"],
            "cost_routing": totals["routing"], "epsilon": eps,
            "mean_loss": float(np.mean(losses)) if losses else float("nan"),
            "cost_computing": totals["computing"], "cost_instantiation": totals["instantiation"],
            "greedy_cost_total": float("nan"), "greedy_cost_declined": float("nan"),
        }
        if config.greedy_eval:
            g = greedy_rollout(online, env, episode_seed, start)
            row["greedy_cost_total"] = float(sum(b.total_j for b in g))
            row["greedy_cost_declined"] = float(sum(b.declined for b in g))
        metrics.append(row)
        if progress:
            logger.info("episode %d eps=%.3f cost=%.1f greedy=%.1f loss=%.4g", ep, eps, row["cost_total"],
                        row["greedy_cost_total"], row["mean_loss"])
    return TrainingResult(online, target, metrics, config)


def write_metrics_csv(rows: list[dict], path, columns=METRIC_COLUMNS) -> None:
    """Fixed-column CSV; floats are written with repr so reruns compare byte-for-byte."""
    with open(path, "w") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(repr(row[c]) if isinstance(row[c], float) else str(row[c]) for c in columns) + "\n")


def read_metrics_csv(path) -> list[dict]:
    import csv
    with open(path, newline="") as fh:
        return [{k: (int(v) if k == "episode" else float(v)) for k, v in row.items()}
                for row in csv.DictReader(fh)]
