"""Train the branching agent on one day of traffic and compare it on the next two.

Uses ``configs/desk.yaml``; a full run of 300 episodes takes a few minutes on
one core. Artifacts (metrics, checkpoint, per-slot evaluations) land in the
output directory.

    python demos/02_train_and_compare.py [--episodes 300] [--out runs/desk]
"""
import argparse
from pathlib import Path

from vranrl.agent import read_metrics_csv
from vranrl.experiment import ExperimentConfig, run_experiment

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "desk.yaml"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--episodes", type=int, default=300)
    ap.add_argument("--out", default="runs/desk")
    args = ap.parse_args()

    cfg = ExperimentConfig.load(CONFIG).with_override("run.episodes", args.episodes)
    summary = run_experiment(cfg, args.out, progress=True)

    metrics = read_metrics_csv(Path(args.out) / "training_larv.csv")
    for m in metrics[:: max(1, len(metrics) // 10)]:
        print(f"episode {m['episode']:4d}  epsilon {m['epsilon']:.3f}  training cost {m['cost_total']:9,.0f}  "
              f"greedy cost {m['greedy_cost_total']:9,.0f}")

    print(f"\nheld-out evaluation over {cfg.run.eval_slots} slots (cost relative to the static baseline):")
    for name, s in summary["policies"].items():
        print(f"  {name:7s} total {s['total_cost']:10,.0f}  ratio {s['normalized_cost']:.3f}  "
              f"declined {s['cost_declined']:8,.0f}  reconfiguration events {s['reconfiguration_events']}")


if __name__ == "__main__":
    main()
