"""Policies map an environment state to a joint action, plus a rollout helper."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .actions import Action
from .cost import CostBreakdown
from .env import State, VranEnv


class Policy(Protocol):
    def act(self, state: State) -> Action: ...


@dataclass(frozen=True)
class StaticPolicy:
    """The same joint action at every slot."""
    action: Action

    def act(self, state: State) -> Action:
        return self.action


class RandomPolicy:
    """Uniform over every sub-action, independently per slot."""

    def __init__(self, env: VranEnv, seed: int = 0):
        self.env = env
        self.rng = np.random.default_rng(seed)
        self._sizes = np.array(env.branch_sizes)

    def indices(self) -> np.ndarray:
        return self.rng.integers(0, self._sizes)

    def act(self, state: State) -> Action:
        return self.env.action_from_indices(self.indices())


def random_policy(env: VranEnv, seed: int = 0) -> RandomPolicy:
    return RandomPolicy(env, seed)


class GreedyQPolicy:
    """Per-branch argmax of a branching Q-network (epsilon = 0)."""

    def __init__(self, net, env: VranEnv):
        self.net = net
        self.env = env

    def act(self, state: State) -> Action:
        q = self.net.q_values(self.env.encode_state(state))
        return self.env.action_from_indices(self.net.greedy(q)[0])


@dataclass
class Rollout:
    actions: list[Action]
    costs: list[CostBreakdown]
    demands: np.ndarray
    initial_action: Action

    @property
    def total_cost(self) -> float:
        return float(sum(c.total_j for c in self.costs))


def rollout(policy: Policy, env: VranEnv, episode_seed: int = 0, start_slot: int = 0,
            horizon: int | None = None) -> Rollout:
    """Run one episode; costs are undiscounted."""
    state = env.reset(episode_seed, start_slot, horizon)
    first = state.prev_action
    actions, costs, demands = [], [], []
    done = False
    while not done:
        action = policy.act(state)
        demands.append(state.demands)
        state, _, bd, done = env.step(action)
        actions.append(action)
        costs.append(bd)
    return Rollout(actions, costs, np.array(demands), first)
