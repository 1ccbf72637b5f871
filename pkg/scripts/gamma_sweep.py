#!/usr/bin/env python3
"""Sweep the Tikhonov coefficient and tabulate (residual, deviation norm)
pairs for a manual L-curve inspection.

For each gamma the plain model update runs on the chosen scenario; the
resulting residual J - gamma*pen and the deviation norm ||theta/theta_h - 1||
are written as CSV and plotted on log-log axes. Pick gamma near the corner.

Usage: python scripts/gamma_sweep.py [--scenario scenarios/case1.json]
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from beamloc.measurements import make_damaged_params, synthesize_measurement
from beamloc.objective import ObjectiveWeights, evaluate_objective
from beamloc.plots import plt
from beamloc.scenario import load_scenario
from beamloc.strategies import plain_localize

ROOT = Path(__file__).parent.parent


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scenario", default=ROOT / "scenarios" / "case1.json", type=Path)
    parser.add_argument("--out", default=Path("results/gamma_sweep"), type=Path)
    parser.add_argument(
        "--gammas", type=float, nargs="+",
        default=[1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1],
    )
    args = parser.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    scenario = load_scenario(args.scenario)
    seed_h, seed_d = scenario.measurement_seeds()
    params = make_damaged_params(scenario.beam, scenario.damage)
    measured = synthesize_measurement(
        scenario.beam, params, scenario.n_modes, scenario.damage.noise_level, seed_d
    )

    rows = []
    for gamma in args.gammas:
        weights = ObjectiveWeights(
            alpha_f=scenario.objective.alpha_f,
            alpha_g=scenario.objective.alpha_g,
            alpha_c=scenario.objective.alpha_c,
            gamma=gamma,
            epsilon_curvature=scenario.objective.epsilon_curvature,
            penalty_form=scenario.objective.penalty_form,
        )
        solution, trace = plain_localize(scenario.beam, measured, weights, scenario.optimizer)
        ev = evaluate_objective(scenario.beam, solution, measured, weights)
        residual = ev.value - gamma * ev.penalty
        deviation = float(np.linalg.norm(
            solution.youngs_moduli / scenario.beam.healthy_youngs_modulus - 1.0
        ))
        rows.append((gamma, residual, deviation, trace.termination.value))
        print(f"gamma={gamma:.1e}  residual={residual:.4e}  deviation={deviation:.4e}")

    with open(args.out / "gamma_sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("gamma", "residual", "deviation_norm", "termination"))
        writer.writerows(rows)

    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog([r[1] for r in rows], [r[2] for r in rows], marker="o")
    for gamma, residual, deviation, _ in rows:
        ax.annotate(f"{gamma:.0e}", (residual, deviation), fontsize=7)
    ax.set_xlabel("residual J")
    ax.set_ylabel("deviation norm")
    ax.grid(True, which="both", alpha=0.3)
    fig.savefig(args.out / "l_curve.svg", metadata={"Date": None}, bbox_inches="tight")
    print(f"wrote {args.out}/gamma_sweep.csv and l_curve.svg")


if __name__ == "__main__":
    main()
