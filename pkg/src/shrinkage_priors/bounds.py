"""Closed-form bounds and rate expressions, with checks against quadrature.

Bounds that can be astronomically large or small are returned as natural
logarithms (functions documented as "log-scaled"); the factor
``exp(x**2 / 2)`` is never exponentiated on its own.
"""

import math
from dataclasses import dataclass, fields

import numpy as np
from scipy import special

from .exceptions import BoundRangeError, PreconditionError
from .posterior import (
    PosteriorContext,
    kappa_tail_prob,
    log_kernels,
    posterior_mean,
    posterior_variance,
    shrinkage_factor,
)
from .quadrature import QuadratureConfig, log_integrate_halfline

__all__ = [
    "ConcentrationParams",
    "GapEnvelope",
    "IkBounds",
    "RateFormulas",
    "moment_bound",
    "concentration_bound",
    "delta_term",
    "gap_envelope",
    "tail_sup_h",
    "lemma_threshold",
    "proof_threshold",
    "zeta_threshold",
    "variance_crossterm_bound",
    "ik_integral",
    "ik_bounds",
    "variance_lower_expression",
    "rate_formulas",
    "minimax_rate",
    "thm31_rate",
    "thm32_rate",
    "thm35_rate",
    "SUITES",
    "check_suite",
]

_TAIL_WINDOW = 50.0
_TAIL_STEP = 0.01


def _require_unit_tau(tau):
    if not 0.0 < tau < 1.0:
        raise PreconditionError(f"tau must lie in (0, 1), got {tau!r}")


@dataclass(frozen=True)
class ConcentrationParams:
    """Tuning pair (eta, delta) of the concentration inequality.

    The defaults give ``c = 2 / (eta (1 - delta)) = 3``.
    """

    eta: float = 5.0 / 6.0
    delta: float = 0.2

    def __post_init__(self):
        for name in ("eta", "delta"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {value!r}")

    @property
    def c(self):
        return 2.0 / (self.eta * (1.0 - self.delta))


def moment_bound(prior, x, tau):
    """log of g1(a) exp(x**2/2) tau**(2a) with g1(a) = K M / (a (1 - a))."""
    _require_unit_tau(tau)
    a = prior.a
    x = np.asarray(x, dtype=float)
    out = math.log(prior.K * prior.M / (a * (1.0 - a))) + 0.5 * x * x + 2.0 * a * math.log(tau)
    return float(out) if out.ndim == 0 else out


def delta_term(prior, tau, params, config=None):
    """log Delta(tau^2, eta, delta) = log[(a + 1/2) T^(a+1/2) int_T^inf t^-(a+3/2) L(t) dt].

    Here ``T = (1/tau^2)(1/(eta delta) - 1)``. Delta equals xi * L(T), where
    xi is the tail integral divided by its regularly varying normalizer.
    """
    a = prior.a
    ed = params.eta * params.delta
    log_T = -2.0 * math.log(tau) + math.log(1.0 / ed - 1.0)

    def logf(s):
        return -(a + 0.5) * s + prior.L.log_L(s)

    tail = float(log_integrate_halfline(logf, log_T, 1, config or QuadratureConfig()))
    return math.log(a + 0.5) + (a + 0.5) * log_T + tail


def concentration_bound(prior, x, tau, params=None, config=None):
    """log of H exp(-eta (1-delta) x^2/2) / (tau^(2a) Delta), bounding Pr(kappa > eta | x)."""
    _require_unit_tau(tau)
    params = params or ConcentrationParams()
    a, eta, delta = prior.a, params.eta, params.delta
    ed = eta * delta
    log_H = math.log(a + 0.5) + a * math.log1p(-ed) - math.log(prior.K) - (a + 0.5) * math.log(ed)
    log_delta = delta_term(prior, tau, params, config)
    x = np.asarray(x, dtype=float)
    out = log_H - 0.5 * eta * (1.0 - delta) * x * x - 2.0 * a * math.log(tau) - log_delta
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class GapEnvelope:
    """Envelope h = h1 + h2 for |T_tau(x) - x|.

    ``h1`` depends on x only; ``h2(x, tau) = |x| * concentration_bound``.
    """

    prior: object
    params: ConcentrationParams
    C_star: float
    s: float

    def log_h1(self, x):
        x = np.abs(np.asarray(x, dtype=float))
        b = self.prior.a + 0.5
        # int_0^{s x^2} e^{-u/2} u^{a-1/2} du = 2^b * lower_gamma(b, s x^2 / 2)
        with np.errstate(divide="ignore"):
            log_lower = np.log(special.gammainc(b, 0.5 * self.s * x * x)) + special.gammaln(b)
            out = math.log(self.C_star) - np.log(x) - b * math.log(2.0) - log_lower
        return np.where(x == 0.0, np.inf, out)

    def h1(self, x):
        out = np.exp(self.log_h1(x))
        return float(out) if np.ndim(out) == 0 else out

    def h2(self, x, tau, config=None):
        x = np.abs(np.asarray(x, dtype=float))
        out = x * np.exp(concentration_bound(self.prior, x, tau, self.params, config))
        return float(out) if out.ndim == 0 else out

    def h(self, x, tau, config=None):
        out = self.h1(x) + self.h2(x, tau, config)
        return float(out) if np.ndim(out) == 0 else out


def gap_envelope(prior, params=None):
    """Build the envelope from the prior's certificates (M, c0, t0)."""
    params = params or ConcentrationParams()
    if params.c <= 2.0:
        raise PreconditionError(f"c = {params.c:g} must exceed 2")
    L = prior.L
    if L.c0 is None or L.t0 is None or not L.c0 > 0:
        raise PreconditionError(f"prior {prior.label} lacks the (c0, t0) certificate")
    a = prior.a
    log_gamma_int = special.gammaln(a + 1.5) + (a + 1.5) * math.log(2.0)
    C_star = prior.M * math.exp(log_gamma_int) / (L.c0 * (1.0 - params.eta) ** (1.0 + a))
    return GapEnvelope(prior=prior, params=params, C_star=C_star, s=1.0 / (1.0 + L.t0))


def lemma_threshold(tau, a, rho):
    """sqrt(rho log(1/tau^(2a)))."""
    _require_unit_tau(tau)
    return math.sqrt(rho * -2.0 * a * math.log(tau))


def zeta_threshold(tau, a):
    """zeta_tau = sqrt(2 log(1/tau^(2a)))."""
    _require_unit_tau(tau)
    return math.sqrt(-4.0 * a * math.log(tau))


def proof_threshold(tau, a, rho):
    """rho * zeta_tau, the cut used in the risk argument."""
    return rho * zeta_threshold(tau, a)


def tail_sup_h(envelope, prior, tau, rho, config=None):
    """Supremum of h(x, tau) over |x| in (threshold, threshold + 50] on a 0.01 grid."""
    c = envelope.params.c
    if not rho > c:
        raise PreconditionError(f"rho = {rho:g} must exceed c = {c:g}")
    if prior is not envelope.prior and prior != envelope.prior:
        raise ValueError("prior does not match the envelope")
    start = lemma_threshold(tau, prior.a, rho)
    steps = int(round(_TAIL_WINDOW / _TAIL_STEP))
    grid = start + _TAIL_STEP * np.arange(1, steps + 1)
    return float(np.max(envelope.h(grid, tau, config)))


def variance_crossterm_bound(prior, x, tau):
    """log of 2 K M exp(x^2/2) tau^(2a), for a in [1/2, 1)."""
    _require_unit_tau(tau)
    a = prior.a
    if not 0.5 <= a < 1.0:
        raise PreconditionError(f"exponent a = {a:g} must lie in [1/2, 1)")
    x = np.asarray(x, dtype=float)
    out = math.log(2.0 * prior.K * prior.M) + 0.5 * x * x + 2.0 * a * math.log(tau)
    return float(out) if out.ndim == 0 else out


# -- I_k integrals (a = 1/2) -------------------------------------------------

_IK_ORDERS = (0.5, 1.5, 2.5)


def _require_half(prior):
    if prior.a != 0.5:
        raise PreconditionError(f"I_k integrals are defined for a = 1/2, got a = {prior.a:g}")


def _require_y(y):
    if not y >= 0.0 or not math.isfinite(y):
        raise ValueError("y must be nonnegative and finite")


def ik_integral(prior, k, y, tau, config=None):
    """log I_k = y + log G(k - 1/2, k; sqrt(2y), tau)."""
    _require_half(prior)
    _require_y(y)
    if k not in _IK_ORDERS:
        raise ValueError("k must be one of 1/2, 3/2, 5/2")
    ctx = PosteriorContext(prior, tau, config or QuadratureConfig())
    return float(y + log_kernels(ctx, [(k - 0.5, k)], [math.sqrt(2.0 * y)])[0, 0])


@dataclass(frozen=True)
class IkBounds:
    """Closed-form bounds on I_k; entries outside their tau range are None."""

    i52_lower: object
    i12_upper: object
    i32_upper: object
    i12_lower: object
    tau: float = float("nan")

    _RANGE = {
        "i52_lower": 1.0 / math.sqrt(2.0),
        "i12_upper": 0.5,
        "i32_upper": 1.0 / math.sqrt(2.0),
        "i12_lower": 0.5,
    }

    def get(self, name):
        value = getattr(self, name)
        if value is None:
            raise BoundRangeError(
                f"bound {name} requires tau < {self._RANGE[name]:.6g}, got tau = {self.tau:g}",
                bound=name,
            )
        return value

    def available(self):
        return {f.name: getattr(self, f.name) for f in fields(self)
                if f.name != "tau" and getattr(self, f.name) is not None}


def ik_bounds(prior, y, tau):
    """The four closed-form I_k bounds at (y, tau) for a nondecreasing L."""
    _require_half(prior)
    if not prior.L.nondecreasing:
        raise PreconditionError(f"prior {prior.label} does not certify a nondecreasing L")
    if not y > 0.0:
        raise ValueError("y must be positive")
    if not tau > 0.0:
        raise ValueError("tau must be positive")
    K, M, L1 = prior.K, prior.M, float(prior.L(1.0))
    rt, r2 = math.sqrt(tau), math.sqrt(2.0)
    ey, ehalf, et2, et = math.exp(y), math.exp(0.5 * y), math.exp(tau * tau * y), math.exp(tau * y)
    wide = tau < 1.0 / r2
    narrow = tau < 0.5
    i52_lower = i32_upper = i12_upper = i12_lower = None
    if wide:
        i52_lower = L1 * tau * ((tau / y) * (ehalf - et2) + (ey - ehalf) / (r2 * y))
        i32_upper = M * tau * (et2 * tau + 2.0 * ehalf * (1.0 / r2 - tau) + (r2 / y) * (ey - ehalf))
    if narrow:
        i12_upper = tau * (
            et2 / (K * tau)
            + 2.0 * M * et * (1.0 / tau - 1.0 / rt)
            + 2.0 * M * ehalf * (1.0 / rt - r2)
            + (2.0 * M * r2 / y) * (ey - ehalf)
        )
        i12_lower = L1 * tau * (
            et2 * (1.0 / tau - 1.0 / rt) + (r2 / y) * (ey - et) + (ey - ehalf) / (2.0 * y)
        )
    return IkBounds(i52_lower, i12_upper, i32_upper, i12_lower, tau=tau)


def variance_lower_expression(prior, y, tau, config=None):
    """2y [I_{5/2}/I_{1/2} - (I_{3/2}/I_{1/2})^2]."""
    _require_half(prior)
    _require_y(y)
    ctx = PosteriorContext(prior, tau, config or QuadratureConfig())
    lg = log_kernels(ctx, [(k - 0.5, k) for k in _IK_ORDERS], [math.sqrt(2.0 * y)])[:, 0]
    r52 = math.exp(lg[2] - lg[0])
    r32 = math.exp(lg[1] - lg[0])
    return 2.0 * y * (r52 - r32 * r32)


# -- rates -------------------------------------------------------------------


def _log_inv(tau, a):
    _require_unit_tau(tau)
    return -2.0 * a * math.log(tau)


def minimax_rate(n, p):
    """2 p ln(n/p); requires 0 < p < n."""
    if not 0 < p < n:
        raise ValueError(f"need 0 < p < n, got p={p}, n={n}")
    return 2.0 * p * math.log(n / p)


def thm31_rate(n, p, tau, a):
    """p log(1/tau^(2a)) + (n - p) tau^(2a) sqrt(log(1/tau^(2a)))."""
    ell = _log_inv(tau, a)
    return p * ell + (n - p) * tau ** (2.0 * a) * math.sqrt(ell)


def thm32_rate(n, p, tau, a):
    """p + (n - p) tau^(2a) sqrt(log(1/tau^(2a)))."""
    ell = _log_inv(tau, a)
    return p + (n - p) * tau ** (2.0 * a) * math.sqrt(ell)


def thm35_rate(n, p, tau):
    """(n - p) tau sqrt(log(1/tau))."""
    _require_unit_tau(tau)
    return (n - p) * tau * math.sqrt(-math.log(tau))


@dataclass(frozen=True)
class RateFormulas:
    minimax: float
    thm31_rate: float
    thm32_rate: float
    thm35_rate: float


def rate_formulas(n, p, tau, a):
    """All four rate expressions, without multiplicative constants."""
    if not 0 < p < n:
        raise ValueError(f"need 0 < p < n, got p={p}, n={n}")
    return RateFormulas(
        minimax=minimax_rate(n, p),
        thm31_rate=thm31_rate(n, p, tau, a),
        thm32_rate=thm32_rate(n, p, tau, a),
        thm35_rate=thm35_rate(n, p, tau),
    )


# -- verification suites -----------------------------------------------------

SUITES = ("moment", "concentration", "gap", "variance-ub", "variance-lb", "ik")

# slack for quadrature error when comparing a computed value with a bound
_SLACK = 1e-9


def _rows(suite, tau, grid, lhs, rhs):
    out = []
    for g, l, r in zip(np.atleast_1d(grid), np.atleast_1d(lhs), np.atleast_1d(rhs)):
        l, r = float(l), float(r)
        ok = l <= r * (1.0 + _SLACK) + 1e-300
        out.append((suite, float(tau), float(g), l, r, r - l, bool(ok)))
    return out


def check_suite(prior, suite, taus, grid, params=None, config=None):
    """Compare computed quantities with one family of bounds.

    Returns rows ``(suite, tau, x_or_y, lhs, rhs, margin, pass)`` where
    ``pass`` means ``lhs <= rhs`` up to quadrature slack. For the ``ik``
    suite ``grid`` holds y values and the suite label names the bound;
    bounds outside their tau range and y <= 0 are skipped.
    """
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)}")
    params = params or ConcentrationParams()
    config = config or QuadratureConfig()
    grid = np.asarray(grid, dtype=float)
    rows = []
    for tau in taus:
        _require_unit_tau(tau)
        ctx = PosteriorContext(prior, tau, config)
        if suite == "moment":
            lhs = shrinkage_factor(ctx, grid)
            rhs = np.exp(moment_bound(prior, grid, tau))
        elif suite == "concentration":
            lhs = kappa_tail_prob(ctx, grid, params.eta)
            rhs = np.exp(concentration_bound(prior, grid, tau, params, config))
        elif suite == "gap":
            env = gap_envelope(prior, params)
            lhs = np.abs(posterior_mean(ctx, grid) - grid)
            rhs = env.h(grid, tau, config)
        elif suite == "variance-ub":
            lhs = posterior_variance(ctx, grid).value
            rhs = 1.0 + grid * grid
        elif suite == "variance-lb":
            lhs = [variance_lower_expression(prior, 0.5 * x * x, tau, config) for x in grid]
            rhs = posterior_variance(ctx, grid).value
        else:
            for y in grid[grid > 0]:
                bounds = ik_bounds(prior, y, tau)
                logs = {k: ik_integral(prior, k, y, tau, config) for k in _IK_ORDERS}
                pairs = {
                    "i52_lower": (bounds.i52_lower, logs[2.5], True),
                    "i12_upper": (bounds.i12_upper, logs[0.5], False),
                    "i32_upper": (bounds.i32_upper, logs[1.5], False),
                    "i12_lower": (bounds.i12_lower, logs[0.5], True),
                }
                for name, (bound, log_val, is_lower) in pairs.items():
                    if bound is None:
                        continue
                    value = math.exp(log_val)
                    lhs, rhs = (bound, value) if is_lower else (value, bound)
                    rows.extend(_rows(f"ik:{name}", tau, [y], [lhs], [rhs]))
            continue
        rows.extend(_rows(suite, tau, grid, lhs, rhs))
    return rows

