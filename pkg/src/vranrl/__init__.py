"""Trace-driven vRAN reconfiguration: topology, cost model, environment and a branching D3QN agent."""
from .actions import Action
from .agent import AgentConfig, BranchingQNet, ReplayBuffer, run_training, select_action, td_targets, train_step
from .baselines import bsp_search, mdq_training
from .cost import CostBreakdown, CostParams
from .env import State, VranEnv, action_space_spec, joint_action_count
from .experiment import ExperimentConfig, evaluate_policy, run_experiment, run_sweep
from .policies import GreedyQPolicy, RandomPolicy, StaticPolicy, random_policy, rollout
from .ran import DEFAULT_CATALOG, FlavorSet, SplitCatalog, SplitId
from .topology import Topology, generate_waxman, route_for, shortest_path
from .traffic import TrafficTrace, generate_diurnal, load_trace
from .utilization import UtilizationModel, UtilizationModelSpec

__version__ = "0.1.0"

__all__ = [
    "Action",
    "AgentConfig",
    "BranchingQNet",
    "ReplayBuffer",
    "run_training",
    "select_action",
    "td_targets",
    "train_step",
    "bsp_search",
    "mdq_training",
    "CostBreakdown",
    "CostParams",
    "State",
    "VranEnv",
    "action_space_spec",
    "joint_action_count",
    "ExperimentConfig",
    "evaluate_policy",
    "run_experiment",
    "run_sweep",
    "GreedyQPolicy",
    "RandomPolicy",
    "StaticPolicy",
    "random_policy",
    "rollout",
    "DEFAULT_CATALOG",
    "FlavorSet",
    "SplitCatalog",
    "SplitId",
    "Topology",
    "generate_waxman",
    "route_for",
    "shortest_path",
    "TrafficTrace",
    "generate_diurnal",
    "load_trace",
    "UtilizationModel",
    "UtilizationModelSpec",
]
