"""Log-space trapezoid quadrature for integrands on the real line.

All integrals in this package are taken after a logarithmic substitution
(``s = log t``), which turns the heavy-tailed, endpoint-singular integrands
over ``(0, inf)`` into smooth functions on the real line that decay
exponentially in both directions. For such integrands the plain trapezoid
rule converges geometrically in the step size, so successive halving with a
difference test is both cheap and reliable.

Integrands are supplied as *log*-integrands: ``logf(nodes)`` must return an
array whose last axis matches ``nodes``. Leading axes are independent rows
that share the grid, which is how many observations are integrated at once.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import InputError, QuadratureError

__all__ = [
    "QuadratureConfig",
    "log_integrate",
    "log_integrate_halfline",
]

# Log-units below the row peak at which the window may be truncated.
_TAIL_DROP = 46.0
_MAX_WIDTH = 1.0e5
_MAX_NODES = 1 << 22


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerance contract for every integral evaluated in this package.

    Attributes
    ----------
    relative_tolerance : float
        Accept an estimate once two successive halvings agree to this
        relative difference, row by row.
    max_refinements : int
        Maximum number of step halvings.
    initial_step : float
        Starting step in the log variable.
    min_refinements : int
        Halvings always performed before the difference test is trusted.

    The window is split into sub-intervals implicitly: the grid is a single
    uniform lattice in ``log t`` widened until every row has decayed by
    ``exp(-46)`` relative to its peak at both ends.
    """

    relative_tolerance: float = 1e-10
    max_refinements: int = 30
    initial_step: float = 0.5
    min_refinements: int = 2

    def __post_init__(self):
        if not 0.0 < self.relative_tolerance <= 1e-4:
            raise ValueError("relative_tolerance must lie in (0, 1e-4]")
        if self.max_refinements < 5:
            raise ValueError("max_refinements must be at least 5")
        if self.initial_step <= 0:
            raise ValueError("initial_step must be positive")


def _evaluate(logf, nodes):
    vals = np.asarray(logf(nodes), dtype=float)
    if np.isnan(vals).any():
        raise InputError("log-integrand returned NaN")
    return vals


def _find_window(logf, center, half_width, step):
    lo, hi = center - half_width, center + half_width
    while True:
        nodes = np.arange(lo, hi + 0.5 * step, step)
        vals = _evaluate(logf, nodes)
        peak = vals.max(axis=-1, keepdims=True)
        if not np.isfinite(peak).all():
            raise InputError("integrand is identically zero or infinite on the window")
        cut = peak[..., 0] - _TAIL_DROP
        grow_left = bool((vals[..., 0] > cut).any())
        grow_right = bool((vals[..., -1] > cut).any())
        if not (grow_left or grow_right):
            return nodes, vals, peak
        width = hi - lo
        if width > _MAX_WIDTH:
            raise QuadratureError("integrand does not decay within the search window")
        if grow_left:
            lo -= width
        if grow_right:
            hi += width


def log_integrate(logf, config=None, center=0.0, half_width=32.0):
    """Return ``log(integral of exp(logf(s)) ds)`` over the real line.

    Parameters
    ----------
    logf : callable
        Maps a 1-D array of nodes to an array of shape ``(..., len(nodes))``.
    config : QuadratureConfig, optional
    center, half_width : float
        Initial window guess; it is widened automatically.

    Returns
    -------
    ndarray
        Log of the integral, one entry per leading-axis row.
    """
    config = config or QuadratureConfig()
    step = config.initial_step
    nodes, vals, peak = _find_window(logf, center, half_width, step)
    total = step * np.exp(vals - peak).sum(axis=-1)
    previous = total
    for level in range(1, config.max_refinements + 1):
        mids = nodes[:-1] + 0.5 * step
        mid_vals = _evaluate(logf, mids)
        total = 0.5 * (previous + step * np.exp(mid_vals - peak).sum(axis=-1))
        step *= 0.5
        merged = np.empty(nodes.size + mids.size)
        merged[0::2] = nodes
        merged[1::2] = mids
        nodes = merged
        if level >= config.min_refinements:
            diff = np.abs(total - previous)
            if np.all(diff <= config.relative_tolerance * np.abs(total)):
                return peak[..., 0] + np.log(total)
        if nodes.size > _MAX_NODES:
            break
        previous = total
    raise QuadratureError(
        "trapezoid refinement did not converge",
        estimates=(peak[..., 0] + np.log(previous), peak[..., 0] + np.log(total)),
    )


def log_integrate_halfline(logf, anchor, side, config=None):
    """Log of the integral of ``exp(logf)`` over a half-line.

    ``side=+1`` integrates over ``(anchor, inf)`` and ``side=-1`` over
    ``(-inf, anchor)``. The map ``s = anchor + side * exp(v)`` sends the
    finite endpoint to ``v = -inf`` with a vanishing Jacobian, so the
    transformed integrand decays at both ends and the line rule applies.
    """
    if side not in (1, -1):
        raise ValueError("side must be +1 or -1")

    def transformed(v):
        return logf(anchor + side * np.exp(v)) + v

    return log_integrate(transformed, config, center=0.0, half_width=8.0)
