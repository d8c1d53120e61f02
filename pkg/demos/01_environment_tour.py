"""A walk through the simulator without any learning.

Builds the small two-cell network from ``configs/desk.yaml``, shows what the
agent observes and controls, and compares a random controller with the best
static configuration found by the search baseline.

    python demos/01_environment_tour.py
"""
from pathlib import Path

import numpy as np

from vranrl.baselines import bsp_search
from vranrl.env import joint_action_count
from vranrl.experiment import ExperimentConfig, build_env
from vranrl.policies import RandomPolicy, rollout

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "desk.yaml"


def main():
    cfg = ExperimentConfig.load(CONFIG)
    env = build_env(cfg)
    topo = env.topo
    print(f"network: {len(topo.nodes)} nodes, radio units {topo.ru_ids}, "
          f"far-edge servers {topo.fs_ids}, edge servers {topo.es_ids}")
    print(f"trace: {env.trace.demands.shape[0]} slots of 10 minutes for {env.trace.demands.shape[1]} cells, "
          f"peak {env.trace.demands.max():.2f} Gbps")
    print(f"state vector: {env.state_dim} numbers; action branches {env.branch_sizes} "
          f"({joint_action_count(env.branch_sizes):.3g} joint actions)")

    state = env.reset(episode_seed=0)
    action = env.initial_action(np.random.default_rng(0))
    print(f"\nfirst slot demands (Gbps): {np.round(state.demands, 3)}")
    print(f"starting configuration: splits {action.split}, vDU flavors {action.x}, vCU flavors {action.y}")
    _, reward, breakdown, _ = env.step(action)
    print(f"one step costs {-reward:.1f}: " + ", ".join(f"{k} {v:.1f}" for k, v in breakdown.as_dict().items()))

    day = cfg.run.episode_slots
    rnd = rollout(RandomPolicy(env, seed=1), env, episode_seed=0, start_slot=0, horizon=day)
    bsp = bsp_search(env, env.trace.window(0, day))
    best = rollout(bsp.policy, env, episode_seed=0, start_slot=0, horizon=day)
    print(f"\none day under a random controller: {rnd.total_cost:,.0f}")
    print(f"one day under the best static configuration ({bsp.mode} search): {best.total_cost:,.0f}")
    print(f"static choice: splits {bsp.action.split}, vDU {bsp.action.x}, vCU {bsp.action.y}, "
          f"far-edge slots {bsp.action.z}, edge slots {bsp.action.zeta}")


if __name__ == "__main__":
    main()
