"""Experiment configuration, evaluation and artifact writing.

Configs are YAML with one section per component. Keys carry their unit in
the name (``kappa_h_per_gbps_km``, ``fs_capacity_rc``); unknown keys are errors.
All randomness comes from the named seeds in the ``seeds`` section.
"""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import MISSING, asdict, dataclass, field, fields, is_dataclass, replace
from pathlib import Path

import numpy as np
import yaml

from .agent import AgentConfig, make_net, run_training, write_metrics_csv
from .baselines import bsp_search, mdq_training
from .cost import COST_TERMS, CostParams
from .env import VranEnv
from .policies import GreedyQPolicy, Policy, random_policy, rollout
from .ran import DEFAULT_FUNCTION_SHARES, FlavorSet, SplitCatalog
from .topology import Topology, generate_waxman
from .traffic import SLOTS_PER_DAY, TrafficTrace, generate_diurnal, load_trace
from .utilization import UtilizationModel, UtilizationModelSpec

logger = logging.getLogger(__name__)

BASELINE_KINDS = ("bsp", "random", "mdq")


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending field."""


@dataclass
class TopologySection:
    source: str = "generate"
    path: str | None = None
    n_nodes: int = 40
    alpha: float = 0.5
    beta: float = 0.1
    n_es: int = 4
    n_fs: int = 8
    n_ru: int = 8
    area_km: float = 10.0
    fs_capacity_rc: float = 20.0
    es_capacity_rc: float = 100.0

    def __post_init__(self):
        if self.source not in ("generate", "file"):
            raise ValueError("source must be 'generate' or 'file'")
        if self.source == "file" and not self.path:
            raise ValueError("path is required when source is 'file'")


@dataclass
class TrafficSection:
    source: str = "generate"
    path: str | None = None
    n_days: int = 3
    peak_gbps: float = 4.0
    noise_std: float = 0.05
    max_phase_hours: float = 2.0

    def __post_init__(self):
        if self.source not in ("generate", "file"):
            raise ValueError("source must be 'generate' or 'file'")
        if self.source == "file" and not self.path:
            raise ValueError("path is required when source is 'file'")
        if self.n_days < 1:
            raise ValueError("n_days must be at least 1")


@dataclass
class CatalogSection:
    n_flavors: int = 16
    flavors_rc: list | None = None
    function_shares: dict = field(default_factory=lambda: dict(DEFAULT_FUNCTION_SHARES))

    def flavor_set(self) -> FlavorSet:
        if self.flavors_rc is not None:
            return FlavorSet(tuple(float(v) for v in self.flavors_rc))
        if self.n_flavors < 1:
            raise ValueError("n_flavors must be positive")
        return FlavorSet.range(self.n_flavors)


@dataclass
class UtilizationSection:
    kind: str = "AFFINE_NOISY"
    base_rc: float = 2.0
    slope_rc_per_gbps: float = 2.0
    noise_cv: float = 0.1
    trace_path: str | None = None


@dataclass
class CostSection:
    kappa_ru_per_rc: float = 1.0
    kappa_fs_per_rc: float = 0.5
    kappa_es_per_rc: float = 0.25
    kappa_o_per_rc: float = 1.0
    kappa_d_per_unit: float = 5.0
    kappa_i_per_rc: float = 0.1
    kappa_r_per_rc: float = 0.1
    kappa_h_per_gbps_km: float = 1.0
    kappa_h_segment_per_gbps_km: dict = field(default_factory=dict)
    penalize_link_overflow: bool = False

    def params(self) -> CostParams:
        return CostParams(self.kappa_ru_per_rc, self.kappa_fs_per_rc, self.kappa_es_per_rc, self.kappa_o_per_rc,
                          self.kappa_d_per_unit, self.kappa_i_per_rc, self.kappa_r_per_rc,
                          self.kappa_h_per_gbps_km, dict(self.kappa_h_segment_per_gbps_km),
                          self.penalize_link_overflow)


@dataclass
class AgentSection:
    gamma: float = 0.99
    eps_max: float = 1.0
    eps_min: float = 0.015
    eps_decay_fraction: float = 0.8
    batch_size: int = 128
    target_sync_every_slots: int = 500
    learning_rate: float = 1e-4
    learning_rate_final: float | None = None
    reward_scale: float = 100.0
    buffer_capacity: int = 10 ** 6
    hidden_widths: list = field(default_factory=lambda: [512, 256])
    input_layer: bool = True
    train_every_slots: int = 1
    learning_starts: int = 0
    greedy_eval: bool = True

    def config(self) -> AgentConfig:
        return AgentConfig(gamma=self.gamma, eps_max=self.eps_max, eps_min=self.eps_min,
                           eps_decay_fraction=self.eps_decay_fraction, batch_size=self.batch_size,
                           target_sync_every=self.target_sync_every_slots, learning_rate=self.learning_rate,
                           learning_rate_final=self.learning_rate_final, reward_scale=self.reward_scale,
                           buffer_capacity=self.buffer_capacity, hidden=tuple(self.hidden_widths),
                           input_layer=self.input_layer, train_every=self.train_every_slots,
                           learning_starts=self.learning_starts, greedy_eval=self.greedy_eval)


@dataclass
class RunSection:
    episodes: int = 500
    episode_slots: int = SLOTS_PER_DAY
    train_start_slot: int = 0
    eval_start_slot: int = SLOTS_PER_DAY
    eval_slots: int = 2 * SLOTS_PER_DAY
    baselines: list = field(default_factory=lambda: ["bsp", "random"])
    bsp_mode: str = "auto"
    mdq_observation: str = "local"
    init_from: str | None = None
    load_checkpoint: str | None = None

    def __post_init__(self):
        if self.episodes < 0:
            raise ValueError("episodes must be non-negative")
        bad = set(self.baselines) - set(BASELINE_KINDS)
        if bad:
            raise ValueError(f"unknown baselines {sorted(bad)}")
        if self.bsp_mode not in ("auto", "exact", "decomposed"):
            raise ValueError("bsp_mode must be auto, exact or decomposed")


@dataclass
class SeedSection:
    topology_seed: int = 0
    traffic_seed: int = 0
    agent_seed: int = 0
    util_seed: int = 0
    eval_seed: int = 12345


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    topology: TopologySection = field(default_factory=TopologySection)
    traffic: TrafficSection = field(default_factory=TrafficSection)
    catalog: CatalogSection = field(default_factory=CatalogSection)
    utilization: UtilizationSection = field(default_factory=UtilizationSection)
    costs: CostSection = field(default_factory=CostSection)
    agent: AgentSection = field(default_factory=AgentSection)
    run: RunSection = field(default_factory=RunSection)
    seeds: SeedSection = field(default_factory=SeedSection)

    @classmethod
    def from_dict(cls, data: dict, base_dir: Path | None = None) -> "ExperimentConfig":
        cfg = _build(cls, data or {}, "")
        if base_dir is not None:
            cfg = cfg.resolve_paths(base_dir)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            data = yaml.safe_load(path.read_text())
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: not valid YAML ({exc})") from exc
        if data is not None and not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        return cls.from_dict(data, path.parent)

    def to_dict(self) -> dict:
        return asdict(self)

    def save(self, path) -> None:
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=False))

    def resolve_paths(self, base: Path) -> "ExperimentConfig":
        def fix(p):
            return None if p is None or Path(p).is_absolute() else str(base / p)
        out = replace(self)
        for sec, key in (("topology", "path"), ("traffic", "path"), ("utilization", "trace_path"),
                         ("run", "init_from"), ("run", "load_checkpoint")):
            section = getattr(out, sec)
            value = getattr(section, key)
            if value is not None and not Path(value).is_absolute():
                setattr(out, sec, replace(section, **{key: fix(value)}))
        return out

    def validate(self) -> None:
        for sec, key in (("topology", "path"), ("traffic", "path"), ("utilization", "trace_path"),
                         ("run", "init_from"), ("run", "load_checkpoint")):
            value = getattr(getattr(self, sec), key)
            used = value is not None and (key != "path" or getattr(getattr(self, sec), "source") == "file")
            if used and not Path(value).exists():
                raise ConfigError(f"{sec}.{key}: file {value} does not exist")
        checks = [("catalog", lambda: (self.catalog.flavor_set(),
                                       SplitCatalog(function_shares=dict(self.catalog.function_shares)))),
                  ("utilization", self.utilization_spec),
                  ("costs", self.costs.params),
                  ("agent", self.agent.config)]
        for name, fn in checks:
            try:
                fn()
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"{name}: {exc}") from exc
        r = self.run
        if r.eval_slots < 1 or r.episode_slots < 1:
            raise ConfigError("run: episode_slots and eval_slots must be positive")

    def utilization_spec(self) -> UtilizationModelSpec:
        u = self.utilization
        return UtilizationModelSpec(u.kind, u.base_rc, u.slope_rc_per_gbps, u.noise_cv, self.seeds.util_seed,
                                    u.trace_path)

    def with_override(self, dotted: str, value) -> "ExperimentConfig":
        """Copy with one ``section.key`` replaced, validated like a loaded file."""
        data = self.to_dict()
        sec, _, key = dotted.partition(".")
        if sec not in data or not isinstance(data[sec], dict) or key not in data[sec]:
            raise ConfigError(f"{dotted}: unknown parameter")
        data[sec][key] = value
        return ExperimentConfig.from_dict(data)


def _build(cls, data, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'}: expected a mapping")
    names = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(names))
    if unknown:
        raise ConfigError(f"{where + '.' if where else ''}{unknown[0]}: unknown key")
    kwargs = {}
    for key, value in data.items():
        f = names[key]
        default = f.default_factory() if f.default_factory is not MISSING else f.default
        path = f"{where}.{key}" if where else key
        if is_dataclass(default):
            kwargs[key] = _build(type(default), value, path)
        else:
            kwargs[key] = _coerce(value, default, path)
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{where or 'config'}: {exc}") from exc


def _coerce(value, default, path):
    if value is None or default is None:
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or float(value) != int(value):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return int(value)
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, (list, dict)) and not isinstance(value, type(default)):
        raise ConfigError(f"{path}: expected a {type(default).__name__}")
    if isinstance(default, str) and not isinstance(value, str):
        raise ConfigError(f"{path}: expected a string")
    return value


# -- building blocks -----------------------------------------------------------

def build_topology(cfg: ExperimentConfig) -> Topology:
    t = cfg.topology
    if t.source == "file":
        return Topology.load(t.path)
    return generate_waxman(t.n_nodes, t.alpha, t.beta, cfg.seeds.topology_seed, (t.n_es, t.n_fs, t.n_ru),
                           t.area_km, t.fs_capacity_rc, t.es_capacity_rc)


def build_trace(cfg: ExperimentConfig, n_bs: int) -> TrafficTrace:
    t = cfg.traffic
    if t.source == "file":
        return load_trace(t.path)
    return generate_diurnal(t.n_days, n_bs, t.peak_gbps, cfg.seeds.traffic_seed, t.noise_std, t.max_phase_hours)


def build_env(cfg: ExperimentConfig) -> VranEnv:
    topo = build_topology(cfg)
    trace = build_trace(cfg, len(topo.ru_ids))
    catalog = SplitCatalog(function_shares=dict(cfg.catalog.function_shares))
    util = UtilizationModel(cfg.utilization_spec(), catalog)
    env = VranEnv(topo, trace, util, cfg.costs.params(), cfg.catalog.flavor_set(), catalog, cfg.run.episode_slots)
    r = cfg.run
    for name, start, length in (("training", r.train_start_slot, r.episode_slots),
                                ("evaluation", r.eval_start_slot, r.eval_slots)):
        if start < 0 or start + length > trace.n_slots:
            raise ConfigError(f"run: {name} window [{start}, {start + length}) exceeds the "
                              f"{trace.n_slots}-slot trace")
    return env


# -- evaluation ----------------------------------------------------------------

@dataclass
class Evaluation:
    rows: list[dict]
    summary: dict

    @property
    def columns(self) -> list[str]:
        return list(self.rows[0]) if self.rows else []


def evaluate_policy(policy: Policy, env: VranEnv, horizon: int, seed: int = 0, start_slot: int = 0) -> Evaluation:
    """Undiscounted greedy rollout with per-slot rows and a summary.

    ``reconfiguration_events`` counts slots whose joint action differs from the
    previous slot's action; the first slot is compared with nothing.
    """
    if horizon < 1 or start_slot + horizon > env.trace.n_slots:
        raise ValueError(f"horizon {horizon} from slot {start_slot} exceeds the {env.trace.n_slots}-slot trace")
    ro = rollout(policy, env, seed, start_slot, horizon)
    rows = []
    for n, (a, c, lam) in enumerate(zip(ro.actions, ro.costs, ro.demands)):
        row = {"slot": start_slot + n}
        row.update({t: getattr(c, t) for t in COST_TERMS})
        row["total"] = c.total_j
        row["reward"] = c.reward
        for k in range(env.K):
            row[f"demand_{k}"] = float(lam[k])
            row[f"split_{k}"] = int(a.split[k])
            row[f"x_{k}"] = float(a.x[k])
            row[f"y_{k}"] = float(a.y[k])
            row[f"z_{k}"] = int(a.z[k])
            row[f"zeta_{k}"] = int(a.zeta[k])
        rows.append(row)
    return Evaluation(rows, summarize_rows(rows, env.K))


def summarize_rows(rows: list[dict], n_bs: int) -> dict:
    """Summary numbers, all recomputable from the per-slot rows."""
    out = {"slots": len(rows), "total_cost": float(sum(r["total"] for r in rows))}
    for t in COST_TERMS:
        out[f"cost_{t}"] = float(sum(r[t] for r in rows))
    keys = [f"{p}_{k}" for k in range(n_bs) for p in ("split", "x", "y", "z", "zeta")]
    events = 0
    per_bs = [0] * n_bs
    for prev, cur in zip(rows[:-1], rows[1:]):
        if any(prev[k] != cur[k] for k in keys):
            events += 1
        for k in range(n_bs):
            if any(prev[f"{p}_{k}"] != cur[f"{p}_{k}"] for p in ("split", "x", "y", "z", "zeta")):
                per_bs[k] += 1
    out["reconfiguration_events"] = events
    out["bs_reconfigurations"] = per_bs
    return out


def write_rows(path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        if not rows:
            return
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def read_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        out = []
        for row in csv.DictReader(fh):
            parsed = {}
            for k, v in row.items():
                if k == "slot" or k.split("_")[0] in ("split", "z", "zeta"):
                    parsed[k] = int(v)
                else:
                    parsed[k] = float(v)
            out.append(parsed)
        return out


def timeline_rows(rows: list[dict], n_bs: int) -> list[dict]:
    """Long-format per-BS action timeline."""
    return [{"slot": r["slot"], "bs": k, "demand_gbps": r[f"demand_{k}"], "split": r[f"split_{k}"],
             "vdu_rc": r[f"x_{k}"], "vcu_rc": r[f"y_{k}"], "vdu_loc": r[f"z_{k}"], "vcu_loc": r[f"zeta_{k}"]}
            for r in rows for k in range(n_bs)]


# -- orchestration -------------------------------------------------------------

def train_larv(cfg: ExperimentConfig, env: VranEnv, progress: bool = False):
    r = cfg.run
    return run_training(env, cfg.agent.config(), r.episodes, cfg.seeds.agent_seed, init_checkpoint=r.init_from,
                        episode_starts=(r.train_start_slot,), progress=progress)


def run_experiment(cfg: ExperimentConfig, out_dir, progress: bool = False) -> dict:
    """Train (or load) the agent, evaluate it and the baselines, and write all artifacts.

    Returns the summary dict that is also written to ``summary.json``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg.save(out / "config.yaml")
    env = build_env(cfg)
    r = cfg.run
    env.topo.save(out / "topology.json")

    policies: dict[str, Policy] = {}
    if r.load_checkpoint:
        net = make_net(env, cfg.agent.config(), np.random.default_rng(0))
        net.load(r.load_checkpoint)
    else:
        result = train_larv(cfg, env, progress)
        net = result.online
        write_metrics_csv(result.metrics, out / "training_larv.csv")
    net.save(out / "larv.ckpt")
    policies["larv"] = GreedyQPolicy(net, env)

    bsp = None
    if "bsp" in r.baselines:
        window = env.trace.window(r.eval_start_slot, r.eval_slots)
        bsp = bsp_search(env, window, r.bsp_mode, allow_violations=True)
        policies["bsp"] = bsp.policy
    if "random" in r.baselines:
        policies["random"] = random_policy(env, cfg.seeds.eval_seed)
    if "mdq" in r.baselines:
        mdq = mdq_training(env, cfg.agent.config(), r.episodes, cfg.seeds.agent_seed, r.mdq_observation,
                           (r.train_start_slot,))
        write_metrics_csv(mdq.metrics, out / "training_mdq.csv")
        policies["mdq"] = mdq.policy

    summary = {"name": cfg.name, "eval_start_slot": r.eval_start_slot, "eval_slots": r.eval_slots, "policies": {}}
    for name, pol in policies.items():
        ev = evaluate_policy(pol, env, r.eval_slots, cfg.seeds.eval_seed, r.eval_start_slot)
        write_rows(out / f"evaluation_{name}.csv", ev.rows)
        write_rows(out / f"timeline_{name}.csv", timeline_rows(ev.rows, env.K))
        summary["policies"][name] = ev.summary
    if bsp is not None:
        base = summary["policies"]["bsp"]["total_cost"]
        summary["bsp"] = {"mode": bsp.mode, "repaired": bsp.repaired, "peak_cost": bsp.cost,
                          "capacity_violations": {str(k): v for k, v in bsp.capacity_violations.items()}}
        for s in summary["policies"].values():
            s["normalized_cost"] = s["total_cost"] / base if base > 0 else float("nan")
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    validate_artifacts(out, env.K)
    return summary


def validate_artifacts(out_dir, n_bs: int) -> None:
    """Recompute every policy summary from its per-slot CSV; raise on any mismatch."""
    out = Path(out_dir)
    summary = json.loads((out / "summary.json").read_text())
    for name, s in summary["policies"].items():
        again = summarize_rows(read_rows(out / f"evaluation_{name}.csv"), n_bs)
        for key, value in again.items():
            if s[key] != value:
                raise RuntimeError(f"{name}: summary field {key} is {s[key]} but the CSV gives {value}")


def run_sweep(cfg: ExperimentConfig, parameter: str, values, out_dir, progress: bool = False) -> list[dict]:
    """One full experiment per value of ``section.key``; writes ``sweep.csv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for v in values:
        sub = cfg.with_override(parameter, v)
        summary = run_experiment(sub, out / f"{parameter.replace('.', '_')}={v}", progress)
        for name, s in summary["policies"].items():
            rows.append({"parameter": parameter, "value": v, "policy": name, "total_cost": s["total_cost"],
                         "normalized_cost": s.get("normalized_cost", float("nan")),
                         "reconfiguration_events": s["reconfiguration_events"]})
    write_rows(out / "sweep.csv", rows)
    return rows
