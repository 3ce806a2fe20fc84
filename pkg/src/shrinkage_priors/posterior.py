"""Posterior functionals of the shrinkage weight kappa = 1/(1 + lambda**2 tau**2).

Every functional reduces to ratios of the kernel

    G(j, m; x, tau) = int_0^inf (t tau^2)^j (1 + t tau^2)^(-m) t^(-a-1) L(t)
                      exp(-x^2 / (2 (1 + t tau^2))) dt,

since the posterior of t = lambda**2 given x is proportional to
pi(t) (1 + t tau^2)^(-1/2) exp(-x^2 / (2 (1 + t tau^2))), and therefore

    E[kappa^p (1 - kappa)^q | x, tau] = G(q, p + q + 1/2) / G(0, 1/2).

Kernels are computed as log-magnitudes on a grid in s = log t.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .exceptions import InternalConsistencyError, SamplingError
from .priors import PriorFamily
from .quadrature import QuadratureConfig, _find_window, log_integrate, log_integrate_halfline

__all__ = [
    "PosteriorContext",
    "PosteriorVariance",
    "kernel_integral",
    "log_kernels",
    "kappa_moment",
    "shrinkage_factor",
    "posterior_mean",
    "posterior_variance",
    "crossterm_J",
    "kappa_tail_prob",
    "kappa_cdf",
    "sample_kappa",
    "sample_theta",
    "sample_theta_matrix",
]

_ROW_CHUNK = 256
_NORMALIZER = (0.0, 0.5)


@dataclass(frozen=True)
class PosteriorContext:
    """A prior, a global scale tau and the quadrature settings."""

    prior: PriorFamily
    tau: float
    quad: QuadratureConfig = field(default_factory=QuadratureConfig)

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")

    @property
    def log_tau2(self):
        return 2.0 * math.log(self.tau)

    def window(self):
        # grid guess spanning both natural scales t = 1 and t = 1/tau**2
        center = -0.5 * self.log_tau2
        return center, max(32.0, 0.5 * abs(self.log_tau2) + 24.0)


def _as_rows(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.reshape(-1)


def _shape_like(values, arr):
    out = values.reshape(arr.shape)
    return float(out) if out.ndim == 0 else out


def _kernel_logf(ctx, specs, x2):
    a = ctx.prior.a
    log_L = ctx.prior.L.log_L
    lt2 = ctx.log_tau2
    js = np.array([j for j, _ in specs], dtype=float)[:, None, None]
    ms = np.array([m for _, m in specs], dtype=float)[:, None, None]
    half_x2 = 0.5 * x2[None, :, None]

    def logf(s):
        z = s + lt2
        soft = np.logaddexp(0.0, z)
        kappa = np.exp(-soft)
        base = -a * s + log_L(s)
        # j * z is skipped when j == 0 so that z never multiplies a zero weight
        jz = np.where(js == 0.0, 0.0, js * z[None, None, :])
        return jz - ms * soft[None, None, :] + base[None, None, :] - half_x2 * kappa[None, None, :]

    return logf


def log_kernels(ctx, specs, x, config=None):
    """Log of G(j, m; x, tau) for several (j, m) pairs over a vector of x.

    Returns an array of shape ``(len(specs), x.size)``. All pairs share one
    grid and one refinement loop, so they converge together.
    """
    config = config or ctx.quad
    x = np.asarray(x, dtype=float).reshape(-1)
    center, half_width = ctx.window()
    out = np.empty((len(specs), x.size))
    for start in range(0, x.size, _ROW_CHUNK):
        chunk = x[start:start + _ROW_CHUNK]
        logf = _kernel_logf(ctx, specs, chunk * chunk)
        out[:, start:start + chunk.size] = log_integrate(logf, config, center, half_width)
    return out


def kernel_integral(ctx, j, m, x):
    """Log-magnitude of G(j, m; x, tau); the integral itself is always positive."""
    arr, flat = _as_rows(x)
    return _shape_like(log_kernels(ctx, [(j, m)], flat)[0], arr)


def kappa_moment(ctx, x, r):
    """E[kappa**r | x, tau] for r in {1, 2}."""
    if r not in (1, 2):
        raise ValueError("r must be 1 or 2")
    arr, flat = _as_rows(x)
    lg = log_kernels(ctx, [_NORMALIZER, (0.0, r + 0.5)], flat)
    return _shape_like(np.exp(lg[1] - lg[0]), arr)


def shrinkage_factor(ctx, x):
    """E[1 - kappa | x, tau], computed directly so small values keep full precision."""
    arr, flat = _as_rows(x)
    lg = log_kernels(ctx, [_NORMALIZER, (1.0, 1.5)], flat)
    return _shape_like(np.exp(lg[1] - lg[0]), arr)


def posterior_mean(ctx, x):
    """Bayes estimate T_tau(x) = (1 - E[kappa | x, tau]) x."""
    arr, flat = _as_rows(x)
    return _shape_like(flat * shrinkage_factor(ctx, flat), arr)


@dataclass(frozen=True)
class PosteriorVariance:
    """Var(theta | x) together with the gap between its two identities."""

    value: object
    identity_gap: object
    mean: object = None


_VARIANCE_SPECS = [_NORMALIZER, (1.0, 1.5), (0.0, 1.5), (0.0, 2.5), (2.0, 2.5)]


def _variance_parts(ctx, flat):
    lg = log_kernels(ctx, _VARIANCE_SPECS, flat)
    e_one_minus = np.exp(lg[1] - lg[0])
    e_kappa = np.exp(lg[2] - lg[0])
    e_kappa2 = np.exp(lg[3] - lg[0])
    e_one_minus2 = np.exp(lg[4] - lg[0])
    x2 = flat * flat
    # law of iterated variance, once through kappa and once through 1 - kappa
    via_kappa = e_one_minus + x2 * (e_kappa2 - e_kappa * e_kappa)
    via_one_minus = e_one_minus + x2 * (e_one_minus2 - e_one_minus * e_one_minus)
    return e_one_minus, e_kappa, via_kappa, via_one_minus, e_one_minus2


def posterior_variance(ctx, x, check=True):
    """Var(theta | x, tau) from both iterated-variance identities.

    ``value`` uses whichever identity subtracts the smaller squared moment
    (the 1 - kappa form when kappa is mostly near 1). ``identity_gap`` is the
    absolute difference between the two; a gap above
    ``1e-8 * (1 + value)`` raises :class:`InternalConsistencyError`.
    """
    arr, flat = _as_rows(x)
    e_one_minus, e_kappa, via_kappa, via_one_minus, _ = _variance_parts(ctx, flat)
    value = np.where(e_kappa > 0.5, via_one_minus, via_kappa)
    gap = np.abs(via_kappa - via_one_minus)
    if check and np.any(gap > 1e-8 * (1.0 + np.abs(value))):
        worst = int(np.argmax(gap / (1.0 + np.abs(value))))
        raise InternalConsistencyError(
            f"variance identities disagree by {gap[worst]:.3e} at x={flat[worst]!r}"
        )
    return PosteriorVariance(
        value=_shape_like(value, arr),
        identity_gap=_shape_like(gap, arr),
        mean=_shape_like(flat * e_one_minus, arr),
    )


def crossterm_J(ctx, x):
    """J(x, tau) = x**2 E[(1 - kappa)**2 | x, tau]."""
    arr, flat = _as_rows(x)
    lg = log_kernels(ctx, [_NORMALIZER, (2.0, 2.5)], flat)
    return _shape_like(flat * flat * np.exp(lg[1] - lg[0]), arr)


def _log_partial_mass(ctx, flat, eta, side):
    if not 0.0 < eta < 1.0:
        raise ValueError("eta must lie in (0, 1)")
    # kappa > eta  <=>  t < (1/tau^2)(1/eta - 1)
    anchor = -ctx.log_tau2 + math.log(1.0 / eta - 1.0)
    out = np.empty(flat.size)
    for start in range(0, flat.size, _ROW_CHUNK):
        chunk = flat[start:start + _ROW_CHUNK]
        logf = _kernel_logf(ctx, [_NORMALIZER], chunk * chunk)
        out[start:start + chunk.size] = log_integrate_halfline(
            lambda s: logf(s)[0], anchor, side, ctx.quad
        )
    return out


def kappa_tail_prob(ctx, x, eta):
    """Pr(kappa > eta | x, tau)."""
    arr, flat = _as_rows(x)
    log_total = log_kernels(ctx, [_NORMALIZER], flat)[0]
    log_part = _log_partial_mass(ctx, flat, eta, side=-1)
    return _shape_like(np.minimum(np.exp(log_part - log_total), 1.0), arr)


def kappa_cdf(ctx, x, eta):
    """Pr(kappa <= eta | x, tau), integrated over the complementary range."""
    arr, flat = _as_rows(x)
    log_total = log_kernels(ctx, [_NORMALIZER], flat)[0]
    log_part = _log_partial_mass(ctx, flat, eta, side=1)
    return _shape_like(np.minimum(np.exp(log_part - log_total), 1.0), arr)


# -- sampling ----------------------------------------------------------------

_CDF_TOLERANCE = 1e-6
_DENSE_LEVEL = math.log(1e-3)
_COARSE_STEP = 0.25


def _refined_nodes(coarse, marked, factor):
    """Split marked cells into ``factor[0]`` pieces and the rest into ``factor[1]``.

    Also returns the positions of the coarse nodes inside the refined array.
    """
    counts = np.where(marked, factor[0], factor[1])
    widths = np.diff(coarse)
    frac = np.concatenate([np.arange(k) / k for k in counts])
    cell = np.repeat(np.arange(widths.size), counts)
    nodes = np.append(coarse[cell] + widths[cell] * frac, coarse[-1])
    positions = np.concatenate([[0], np.cumsum(counts)])
    return nodes, positions


def _cdf_on(logf, nodes):
    """Normalized CDF at the nodes and at every cell midpoint, by per-cell Simpson."""
    mids = 0.5 * (nodes[1:] + nodes[:-1])
    vals = logf(nodes)
    mid_vals = logf(mids)
    peak = np.maximum(vals.max(axis=-1), mid_vals.max(axis=-1))[:, None]
    f = np.exp(vals - peak)
    fm = np.exp(mid_vals - peak)
    h = np.diff(nodes)
    first = h / 24.0 * (5.0 * f[:, :-1] + 8.0 * fm - f[:, 1:])
    whole = h / 6.0 * (f[:, :-1] + 4.0 * fm + f[:, 1:])
    pieces = np.empty((f.shape[0], 2 * h.size))
    pieces[:, 0::2] = np.maximum(first, 0.0)
    pieces[:, 1::2] = np.maximum(whole - first, 0.0)
    cdf = np.concatenate([np.zeros((f.shape[0], 1)), np.cumsum(pieces, axis=1)], axis=1)
    all_nodes = np.empty(2 * nodes.size - 1)
    all_nodes[0::2] = nodes
    all_nodes[1::2] = mids
    return all_nodes, cdf / cdf[:, -1:]


def _inverse_cdf_grid(ctx, flat):
    """Nodes in s and normalized CDF rows with CDF error below 1e-6."""
    logf3 = _kernel_logf(ctx, [_NORMALIZER], flat * flat)

    def logf(s):
        return logf3(s)[0]

    center, half_width = ctx.window()
    coarse, vals, peak = _find_window(logf, center, half_width, _COARSE_STEP)
    dense = (vals - peak >= _DENSE_LEVEL).any(axis=0)
    marked = dense[:-1] | dense[1:]
    factor = 2
    base, pos = _refined_nodes(coarse, marked, (factor, 1))
    nodes, cdf = _cdf_on(logf, base)
    while factor <= 512:
        finer_base, finer_pos = _refined_nodes(coarse, marked, (2 * factor, 2))
        finer_nodes, finer = _cdf_on(logf, finer_base)
        # compare at the coarse lattice, which both grids contain
        err = np.abs(finer[:, 2 * finer_pos] - cdf[:, 2 * pos]).max()
        nodes, cdf, pos = finer_nodes, finer, finer_pos
        if err <= _CDF_TOLERANCE:
            return nodes, cdf
        factor *= 2
    raise SamplingError(f"inverse-CDF grid did not reach CDF error {_CDF_TOLERANCE}")


def _draw_log_t(ctx, flat, rng, n_draws):
    nodes, cdf = _inverse_cdf_grid(ctx, flat)
    rows = cdf.shape[0]
    u = rng.random((rows, n_draws))
    offsets = np.arange(rows, dtype=float)[:, None]
    stacked = (cdf + offsets).ravel()
    idx = np.searchsorted(stacked, (u + offsets).ravel(), side="right") - 1
    idx = idx.reshape(rows, n_draws)
    col = idx - np.arange(rows)[:, None] * nodes.size
    col = np.clip(col, 0, nodes.size - 2)
    lo = np.take_along_axis(cdf, col, axis=1)
    hi = np.take_along_axis(cdf, col + 1, axis=1)
    span = hi - lo
    frac = np.where(span > 0, (u - lo) / np.where(span > 0, span, 1.0), 0.5)
    return nodes[col] + np.clip(frac, 0.0, 1.0) * (nodes[col + 1] - nodes[col])


_KAPPA_MAX = np.nextafter(1.0, 0.0)
_KAPPA_MIN = np.finfo(float).tiny


def sample_kappa(ctx, x, rng, n_draws):
    """Independent draws of kappa from its posterior given a scalar x."""
    if n_draws < 1:
        raise ValueError("n_draws must be at least 1")
    s = _draw_log_t(ctx, np.array([float(x)]), rng, int(n_draws))[0]
    return np.clip(expit(-(s + ctx.log_tau2)), _KAPPA_MIN, _KAPPA_MAX)


def sample_theta_matrix(ctx, x, rng, n_draws):
    """Posterior draws of theta_i for every x_i; shape ``(len(x), n_draws)``.

    kappa is drawn by inverse CDF, then theta ~ N((1 - kappa) x, 1 - kappa).
    """
    if n_draws < 1:
        raise ValueError("n_draws must be at least 1")
    flat = np.asarray(x, dtype=float).reshape(-1)
    out = np.empty((flat.size, int(n_draws)))
    for start in range(0, flat.size, _ROW_CHUNK):
        chunk = flat[start:start + _ROW_CHUNK]
        s = _draw_log_t(ctx, chunk, rng, int(n_draws))
        one_minus = expit(s + ctx.log_tau2)
        noise = rng.standard_normal(s.shape)
        out[start:start + chunk.size] = one_minus * chunk[:, None] + np.sqrt(one_minus) * noise
    return out


def sample_theta(ctx, x, rng, n_draws):
    """Independent draws of theta from its posterior given a scalar x."""
    return sample_theta_matrix(ctx, np.array([float(x)]), rng, n_draws)[0]
