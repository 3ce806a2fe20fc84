"""Heavy-tailed local-scale priors of the form K * t**(-a-1) * L(t).

Every family is described by its tail exponent ``a``, the normalizer ``K``
and a slowly varying, bounded function ``L`` together with the certificates
(``M``, ``c0``, ``t0``) the bound formulas consume. ``L`` is carried in log
form on the log scale, ``log L(exp(s))``, because every integral in the
package is taken in ``s = log t``.
"""

import math
import warnings
from dataclasses import dataclass, field
from functools import partial

import numpy as np
from scipy import special

from .exceptions import QuadratureError
from .quadrature import QuadratureConfig, log_integrate

__all__ = [
    "SlowlyVaryingSpec",
    "PriorFamily",
    "Diagnostics",
    "make_horseshoe",
    "make_tpbn",
    "make_named",
    "make_custom",
    "parse_prior",
    "registry",
    "validate",
    "OutsideTheoremRangeWarning",
]


class OutsideTheoremRangeWarning(UserWarning):
    """The family lies in the prior class but outside a in [1/2, 1)."""


@dataclass(frozen=True)
class SlowlyVaryingSpec:
    """A bounded slowly varying function L with its certificates.

    ``log_evaluate`` maps ``s`` (an array of ``log t`` values) to
    ``log L(exp(s))``. ``limit_at_infinity`` is ``None`` when unknown.
    """

    log_evaluate: object
    upper_bound: float
    c0: float
    t0: float
    limit_at_infinity: float = None
    nondecreasing: bool = False

    def log_L(self, s):
        return self.log_evaluate(np.asarray(s, dtype=float))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.exp(self.log_L(np.log(t)))
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class PriorFamily:
    name: str
    a: float
    K: float
    L: SlowlyVaryingSpec
    params: tuple = field(default=())

    def __post_init__(self):
        if not 0.0 < self.a < 1.0:
            raise ValueError(f"exponent a={self.a} must lie strictly inside (0, 1)")
        if not self.K > 0:
            raise ValueError("normalizer K must be positive")

    @property
    def in_theorem_range(self):
        return 0.5 <= self.a < 1.0

    @property
    def M(self):
        return self.L.upper_bound

    def log_density(self, t):
        """Log prior density of the local variance t = lambda**2."""
        s = np.log(np.asarray(t, dtype=float))
        return math.log(self.K) - (self.a + 1.0) * s + self.L.log_L(s)

    @property
    def label(self):
        if not self.params:
            return self.name
        return self.name + ":" + ",".join(f"{p:g}" for p in self.params)


# -- log L implementations (module level so families pickle cleanly) -------


def _log_beta_ratio(s, power):
    # power * log(t / (1 + t))
    return -power * np.logaddexp(0.0, -s)


def _log_inverse_gamma(s, beta):
    with np.errstate(over="ignore"):
        return -beta * np.exp(-np.asarray(s, dtype=float))


def _log_half_t(s, nu):
    # ((t / (nu + t)) ** ((nu + 1) / 2))
    return -0.5 * (nu + 1.0) * np.logaddexp(0.0, math.log(nu) - s)


_GDP_V = np.arange(-30.0, 6.0 + 1e-12, 1.0 / 64.0)


def _log_gdp(s, alpha):
    """log L for the generalized double Pareto with unit rate.

    With z = t**-0.5, L(t) = E[exp(-z * mu)] where mu has density
    proportional to mu**(alpha+1) * exp(-mu**2 / 2). Each column is
    integrated on a log-grid centred at its own peak.
    """
    s = np.asarray(s, dtype=float)
    nu = alpha + 2.0
    c = 4.0 * (nu - 1.0)
    # mode of mu**(nu-1) exp(-mu**2/2 - z mu), written to survive z -> 0, inf
    log_mode = (
        math.log(2.0 * (nu - 1.0))
        + 0.5 * s
        - np.logaddexp(0.0, 0.5 * np.logaddexp(0.0, math.log(c) + s))
    )
    mu_log = log_mode[..., None] + _GDP_V
    zmu = np.exp(mu_log - 0.5 * s[..., None])
    expo = nu * mu_log - 0.5 * np.exp(2.0 * mu_log) - zmu
    peak = expo.max(axis=-1, keepdims=True)
    h = _GDP_V[1] - _GDP_V[0]
    log_int = peak[..., 0] + np.log(h * np.exp(expo - peak).sum(axis=-1))
    log_norm = (0.5 * nu - 1.0) * math.log(2.0) + special.gammaln(0.5 * nu)
    return log_int - log_norm


# -- constructors ----------------------------------------------------------


def make_horseshoe():
    """Horseshoe prior: a = 1/2, L(t) = t/(1+t), K = 1/pi."""
    L = SlowlyVaryingSpec(
        partial(_log_beta_ratio, power=1.0),
        upper_bound=1.0,
        c0=0.5,
        t0=1.0,
        limit_at_infinity=1.0,
        nondecreasing=True,
    )
    return PriorFamily("horseshoe", 0.5, 1.0 / math.pi, L)


def make_tpbn(a_beta, b_beta):
    """Three-parameter beta normal member with kappa ~ Beta(a_beta, b_beta).

    The local variance has density t**(b-1) (1+t)**(-a-b) / B(a, b), which
    is the class form with exponent a_beta, L(t) = (t/(1+t))**(a_beta+b_beta)
    and K = 1/B(a_beta, b_beta).
    """
    a_beta, b_beta = float(a_beta), float(b_beta)
    if a_beta <= 0 or b_beta <= 0:
        raise ValueError("TPBN parameters must be positive")
    if a_beta >= 1.0:
        raise ValueError(f"TPBN exponent a={a_beta} is outside the class range (0, 1)")
    if a_beta < 0.5:
        warnings.warn(
            f"TPBN exponent a={a_beta} < 1/2 lies outside the theorem range",
            OutsideTheoremRangeWarning,
            stacklevel=2,
        )
    power = a_beta + b_beta
    L = SlowlyVaryingSpec(
        partial(_log_beta_ratio, power=power),
        upper_bound=1.0,
        c0=2.0**-power,
        t0=1.0,
        limit_at_infinity=1.0,
        nondecreasing=True,
    )
    K = math.exp(-special.betaln(a_beta, b_beta))
    return PriorFamily("tpbn", a_beta, K, L, (a_beta, b_beta))


def _inverse_gamma(alpha, beta):
    alpha, beta = float(alpha), float(beta)
    if beta <= 0:
        raise ValueError("inverse-gamma scale must be positive")
    L = SlowlyVaryingSpec(
        partial(_log_inverse_gamma, beta=beta),
        upper_bound=1.0,
        c0=math.exp(-beta),
        t0=1.0,
        limit_at_infinity=1.0,
        nondecreasing=True,
    )
    K = math.exp(alpha * math.log(beta) - special.gammaln(alpha))
    return PriorFamily("inverse_gamma", alpha, K, L, (alpha, beta))


def _half_t(nu):
    nu = float(nu)
    if nu <= 0:
        raise ValueError("half-t degrees of freedom must be positive")
    a = nu / 2.0
    # density of lambda**2 is C t**-0.5 (1 + t/nu)**-((nu+1)/2); L -> 1.
    log_K = (
        special.gammaln(0.5 * (nu + 1.0))
        + 0.5 * nu * math.log(nu)
        - 0.5 * math.log(math.pi)
        - special.gammaln(0.5 * nu)
    )
    L = SlowlyVaryingSpec(
        partial(_log_half_t, nu=nu),
        upper_bound=1.0,
        c0=(1.0 / (1.0 + nu)) ** (0.5 * (nu + 1.0)),
        t0=1.0,
        limit_at_infinity=1.0,
        nondecreasing=True,
    )
    return PriorFamily("half_t", a, math.exp(log_K), L, (nu,))


def _gdp(alpha):
    alpha = float(alpha)
    if alpha <= 0:
        raise ValueError("GDP shape must be positive")
    a = alpha / 2.0
    log_K = (
        0.5 * alpha * math.log(2.0)
        + special.gammaln(0.5 * alpha + 1.0)
        - math.log(2.0)
        - special.gammaln(alpha)
    )
    log_L = partial(_log_gdp, alpha=alpha)
    L = SlowlyVaryingSpec(
        log_L,
        upper_bound=1.0,
        c0=float(np.exp(log_L(np.array([0.0])))[0]),
        t0=1.0,
        limit_at_infinity=1.0,
        nondecreasing=True,
    )
    return PriorFamily("gdp", a, math.exp(log_K), L, (alpha,))


def _neg(shape):
    # exponential mixing of the normal variance: TPBN with b_beta = 1
    fam = make_tpbn(shape, 1.0)
    return PriorFamily("neg", fam.a, fam.K, fam.L, (float(shape),))


def _horseshoe_named():
    return make_horseshoe()


def _tpbn_named(a_beta=0.5, b_beta=1.0):
    return make_tpbn(a_beta, b_beta)


_NAMED = {
    "horseshoe": (_horseshoe_named, ()),
    "tpbn": (_tpbn_named, (0.5, 1.0)),
    "inverse_gamma": (_inverse_gamma, (0.5, 1.0)),
    "half_t": (_half_t, (1.5,)),
    "gdp": (_gdp, (1.0,)),
    "neg": (_neg, (0.75,)),
}


def make_named(name, params=()):
    """Construct a registered family by name.

    Names: ``horseshoe``, ``tpbn(a, b)``, ``inverse_gamma(alpha, beta)``,
    ``half_t(nu)``, ``gdp(alpha)``, ``neg(shape)``. Missing parameters take
    the registry defaults.
    """
    try:
        ctor, defaults = _NAMED[name]
    except KeyError:
        raise ValueError(f"unknown prior family {name!r}; known: {sorted(_NAMED)}") from None
    params = tuple(float(p) for p in params)
    if len(params) > len(defaults):
        raise ValueError(f"{name} takes at most {len(defaults)} parameters")
    params = params + tuple(defaults[len(params):])
    return ctor(*params)


def make_custom(name, a, K, L):
    """Wrap a user-supplied L (a :class:`SlowlyVaryingSpec`) as a family."""
    return PriorFamily(name, float(a), float(K), L)


def parse_prior(text):
    """Parse ``NAME[:p1,p2,...]`` into a family."""
    name, _, rest = text.partition(":")
    params = [float(p) for p in rest.split(",") if p.strip()] if rest else []
    return make_named(name.strip(), params)


def registry():
    """Default instance of every registered family, in a fixed order."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", OutsideTheoremRangeWarning)
        return [make_named(name) for name in _NAMED]


# -- validation -------------------------------------------------------------


@dataclass
class Diagnostics:
    """Per-invariant outcome of :func:`validate` with measured margins."""

    normalization_residual: float
    slow_variation_ratios: dict
    max_L: float
    min_L_above_t0: float
    monotone_violation: float
    checks: dict

    @property
    def passed(self):
        return all(self.checks.values())


_SV_POINTS = (1e6, 1e8, 1e10)


def validate(prior, config=None, normalization_tol=1e-8):
    """Check a family against the class assumptions.

    Returns a :class:`Diagnostics` record; nothing is raised for a failing
    family.
    """
    config = config or QuadratureConfig(relative_tolerance=1e-12)
    L = prior.L

    def log_integrand(s):
        return -prior.a * s + L.log_L(s)

    try:
        log_mass = float(log_integrate(log_integrand, config))
        residual = abs(math.expm1(math.log(prior.K) + log_mass))
    except QuadratureError:
        # divergent or unresolvable mass
        residual = math.inf

    ratios = {}
    for t in _SV_POINTS:
        ls = L.log_L(np.log(np.array([t, 2 * t])))
        ratios[t] = float(np.exp(ls[1] - ls[0]))

    grid = np.linspace(math.log(1e-6), math.log(1e12), 1000)
    log_values = L.log_L(grid)
    values = np.exp(log_values)
    upper_grid = np.linspace(math.log(L.t0), math.log(1e12), 1000)
    min_above = float(np.exp(L.log_L(upper_grid)).min())
    drops = -np.diff(values)
    monotone_violation = float(max(drops.max(), 0.0))

    checks = {
        "normalization": residual < normalization_tol,
        "slow_variation": all(abs(r - 1.0) < 1e-3 for r in ratios.values()),
        "positive": bool(np.isfinite(log_values).all()),
        "upper_bound": float(values.max()) <= L.upper_bound * (1 + 1e-12),
        "lower_bound": min_above >= L.c0 * (1 - 1e-12),
        "exponent": 0.0 < prior.a < 1.0,
    }
    if L.nondecreasing:
        checks["nondecreasing"] = monotone_violation <= 1e-12
    return Diagnostics(
        normalization_residual=residual,
        slow_variation_ratios=ratios,
        max_L=float(values.max()),
        min_L_above_t0=min_above,
        monotone_violation=monotone_violation,
        checks=checks,
    )
