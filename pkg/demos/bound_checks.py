"""Numerical checks of the concentration and moment bounds.

Evaluates both sides of each inequality on a grid of observations and reports
the worst margin per tau.

Run with ``python demos/bound_checks.py``.
"""

import numpy as np

from shrinkage_priors.bounds import ConcentrationParams, check_suite
from shrinkage_priors.priors import parse_prior


def main():
    prior = parse_prior("horseshoe")
    grid = np.arange(-10.0, 10.0 + 1e-9, 0.5)
    taus = (0.3, 0.1, 0.01, 1e-4)
    for suite in ("moment", "concentration", "gap"):
        rows = check_suite(prior, suite, taus, grid, ConcentrationParams())
        print(f"\n{suite}")
        for tau in taus:
            sub = [r for r in rows if r[1] == tau]
            worst = min(r[5] for r in sub)
            ok = all(r[6] for r in sub)
            print(f"  tau={tau:<8g} rows={len(sub):3d} min margin={worst: .3e} pass={ok}")


if __name__ == "__main__":
    main()
