"""Small Monte Carlo risk study for the horseshoe posterior mean.

Compares Monte Carlo quadratic risk with the minimax rate 2 p ln(n/p) and
shows how the ratio changes as n grows with p = n**0.5.

Run with ``python demos/risk_study.py``. Set SHRINKAGE_WORKERS to use threads.
"""

import numpy as np

from shrinkage_priors.experiments import (
    PowerPRule, ReplicationPlan, SignalSpec, TauRule, generate_problem, run_risk,
    run_scaling_study, stream,
)
from shrinkage_priors.priors import parse_prior


def main():
    prior = parse_prior("horseshoe")
    plan = ReplicationPlan(reps=40, master_seed=7)
    problem = generate_problem(400, 20, SignalSpec.constant(7.0), stream(7, 0))
    report = run_risk(prior, problem, TauRule("default_log"), plan)
    print(f"n=400 p=20 tau={report.tau:.4f}")
    print(f"  risk = {report.mc_risk:.3f} +/- {report.mc_se:.3f}")
    print(f"  nonzero part = {report.nonzero_risk:.3f}, zero part = {report.zero_risk:.3f}")
    print(f"  risk / (2 p ln(n/p)) = {report.minimax_ratio:.4f}")

    table = run_scaling_study(prior, [200, 800, 3200], PowerPRule(0.5),
                              TauRule("default_log"), plan, SignalSpec.scaled(1.5))
    print("\nscaling with p = n^0.5")
    for row in table.rows:
        cells = dict(zip(table.COLUMNS, row))
        print(f"  n={cells['n']:5d} p={cells['p']:3d} tau={cells['tau']:.4f} "
              f"risk={cells['mc_risk']:.2f} ratio={cells['minimax_ratio']:.4f}")
    print(f"  max/min ratio = {table.stability:.3f}")


if __name__ == "__main__":
    np.set_printoptions(precision=4)
    main()
