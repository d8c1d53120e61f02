"""How the reconfiguration fee changes the agent's behaviour.

Trains one agent per fee value and reports how often each one changes the
configuration during evaluation. A higher fee should make the agent keep its
configuration longer.

    python demos/03_reconfiguration_fee_sweep.py [--values 0.05,0.5,1] [--episodes 300]
"""
import argparse
from pathlib import Path

from vranrl.experiment import ExperimentConfig, run_sweep

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "desk.yaml"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--values", default="0.05,0.5,1")
    ap.add_argument("--episodes", type=int, default=300)
    ap.add_argument("--out", default="runs/kappa_r")
    args = ap.parse_args()

    cfg = (ExperimentConfig.load(CONFIG)
           .with_override("run.episodes", args.episodes)
           .with_override("run.baselines", ["bsp"]))
    values = [float(v) for v in args.values.split(",")]
    rows = run_sweep(cfg, "costs.kappa_r_per_rc", values, args.out)
    print(f"{'fee':>6}  {'policy':7}  {'total':>10}  {'ratio':>6}  events")
    for r in rows:
        print(f"{r['value']:6.2f}  {r['policy']:7}  {r['total_cost']:10,.0f}  {r['normalized_cost']:6.3f}  "
              f"{r['reconfiguration_events']}")


if __name__ == "__main__":
    main()
