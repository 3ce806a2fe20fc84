"""Posterior mean, variance and shrinkage across the registered priors.

Prints how each prior shrinks small observations toward zero while leaving
large ones nearly untouched, for a few global scales tau.

Run with ``python demos/shrinkage_profiles.py``.
"""

import numpy as np

from shrinkage_priors.posterior import PosteriorContext, posterior_mean, posterior_variance
from shrinkage_priors.priors import parse_prior, registry
from shrinkage_priors.quadrature import QuadratureConfig


def main():
    xs = np.array([0.0, 1.0, 2.0, 3.0, 5.0, 8.0, 12.0])
    for tau in (0.1, 0.01):
        print(f"\ntau = {tau:g}")
        print("prior".ljust(22) + "".join(f"x={x:<8g}" for x in xs))
        for prior in registry():
            ctx = PosteriorContext(prior, tau, QuadratureConfig())
            mean = posterior_mean(ctx, xs)
            print(prior.name.ljust(22) + "".join(f"{m:<10.4f}" for m in mean))
    prior = parse_prior("horseshoe")
    ctx = PosteriorContext(prior, 0.05, QuadratureConfig())
    var = posterior_variance(ctx, xs)
    print("\nhorseshoe, tau = 0.05: posterior variance and identity gap")
    for x, v, g in zip(xs, var.value, var.identity_gap):
        print(f"  x={x:5.1f}  Var={v:.6f}  gap={g:.1e}")


if __name__ == "__main__":
    main()
