"""Seeded Monte Carlo studies of risk, posterior spread and contraction.

Randomness is organized as counter-based streams derived from one master
seed, so replication ``r`` sees the same numbers however the work is
scheduled:

* ``(0,)`` or ``(0, n)`` generates the sparse problem,
* ``(1, r)`` draws the observation noise of replication ``r``,
* ``(2, r)`` drives the posterior draws of replication ``r``.

Replications run on a thread pool whose size comes from the
``SHRINKAGE_WORKERS`` environment variable; results are reduced in
replication order, so the worker count never changes an output value.
"""

import logging
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bounds import minimax_rate, thm31_rate, thm32_rate, thm35_rate
from .exceptions import PreconditionError, QuadratureError
from .posterior import PosteriorContext, posterior_mean, posterior_variance, sample_theta_matrix
from .priors import OutsideTheoremRangeWarning
from .quadrature import QuadratureConfig

__all__ = [
    "SignalSpec",
    "SparseMeanProblem",
    "generate_problem",
    "TauRule",
    "select_tau",
    "ReplicationPlan",
    "RiskReport",
    "TotalVarianceReport",
    "ContractionReport",
    "ScalingTable",
    "PowerPRule",
    "stream",
    "worker_count",
    "run_risk",
    "run_total_variance",
    "compare_tau_choices",
    "run_contraction",
    "run_scaling_study",
]

logger = logging.getLogger(__name__)

WORKERS_ENV = "SHRINKAGE_WORKERS"


def stream(master_seed, *key):
    """Independent generator for the stream labelled ``key``."""
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(seq)


def worker_count():
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return max(1, value)


def _map_ordered(fn, count):
    workers = worker_count()
    if workers == 1 or count == 1:
        return [fn(r) for r in range(count)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(count)))


# -- problems ----------------------------------------------------------------


@dataclass(frozen=True)
class SignalSpec:
    """Signal size on the support: ``constant`` A, or ``scaled`` A sqrt(2 ln(n/p))."""

    kind: str
    A: float

    def __post_init__(self):
        if self.kind not in ("constant", "scaled"):
            raise ValueError("signal kind must be 'constant' or 'scaled'")

    @classmethod
    def constant(cls, A):
        return cls("constant", float(A))

    @classmethod
    def scaled(cls, A):
        return cls("scaled", float(A))

    def value(self, n, p):
        if self.kind == "constant":
            return self.A
        if p == 0:
            return 0.0
        return self.A * math.sqrt(2.0 * math.log(n / p))

    def label(self):
        return f"{self.kind}:{self.A:g}"


@dataclass(frozen=True)
class SparseMeanProblem:
    """A mean vector with at most ``p`` nonzero coordinates."""

    n: int
    p: int
    support: tuple
    signals: tuple

    def __post_init__(self):
        if not 0 <= self.p <= self.n:
            raise ValueError("need 0 <= p <= n")
        if len(self.support) != len(self.signals):
            raise ValueError("support and signals differ in length")
        if sum(1 for v in self.signals if v != 0.0) > self.p:
            raise ValueError("more nonzero signals than p")

    @property
    def theta0(self):
        theta = np.zeros(self.n)
        theta[list(self.support)] = self.signals
        return theta

    @property
    def support_mask(self):
        mask = np.zeros(self.n, dtype=bool)
        mask[list(self.support)] = True
        return mask

    @classmethod
    def from_theta(cls, theta):
        theta = np.asarray(theta, dtype=float).reshape(-1)
        support = np.flatnonzero(theta)
        return cls(theta.size, support.size, tuple(int(i) for i in support),
                   tuple(float(v) for v in theta[support]))


def generate_problem(n, p, signal_spec, rng):
    """Uniformly placed support of size p carrying the specified signal."""
    n, p = int(n), int(p)
    if not 0 <= p < n:
        raise ValueError(f"need 0 <= p < n, got p={p}, n={n}")
    support = np.sort(rng.choice(n, size=p, replace=False)) if p else np.array([], dtype=int)
    value = signal_spec.value(n, p)
    return SparseMeanProblem(n, p, tuple(int(i) for i in support), (value,) * p)


# -- tau rules ---------------------------------------------------------------


@dataclass(frozen=True)
class TauRule:
    """How tau is chosen from (n, p, a).

    ``fixed`` uses ``value``; ``power`` uses (p/n)**value with value >= 1;
    ``default_log`` uses (p/n) sqrt(ln(n/p)); ``a_adapted`` raises the
    default_log value to the power 1/(2a).
    """

    variant: str
    value: float = None

    def __post_init__(self):
        if self.variant not in ("fixed", "power", "default_log", "a_adapted"):
            raise ValueError(f"unknown tau rule {self.variant!r}")
        if self.variant == "fixed" and not (self.value is not None and self.value > 0):
            raise ValueError("fixed tau rule needs a positive value")
        if self.variant == "power" and not (self.value is not None and self.value >= 1.0):
            raise ValueError("power tau rule needs an exponent >= 1")

    @classmethod
    def parse(cls, text):
        """Parse ``fixed:R``, ``power:A``, ``default-log`` or ``a-adapted``."""
        name, _, arg = text.partition(":")
        name = name.replace("-", "_")
        if name in ("fixed", "power"):
            if not arg:
                raise ValueError(f"tau rule {name} needs a value")
            return cls(name, float(arg))
        if arg:
            raise ValueError(f"tau rule {name} takes no value")
        return cls(name)

    def label(self):
        name = self.variant.replace("_", "-")
        return f"{name}:{self.value:g}" if self.value is not None else name


def select_tau(rule, n, p, a):
    """Resolve a rule to a tau in (0, 1)."""
    if rule.variant == "fixed":
        tau = rule.value
    else:
        if not 0 < p < n:
            raise PreconditionError(f"tau rule {rule.variant} needs 0 < p < n")
        ratio = p / n
        if rule.variant == "power":
            tau = ratio ** rule.value
        else:
            tau = ratio * math.sqrt(math.log(n / p))
            if rule.variant == "a_adapted":
                tau = tau ** (1.0 / (2.0 * a))
    if not 0.0 < tau < 1.0:
        raise PreconditionError(f"tau = {tau:g} from rule {rule.label()} is outside (0, 1)")
    return tau


@dataclass(frozen=True)
class ReplicationPlan:
    reps: int
    master_seed: int
    posterior_draws: int = 1000

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if self.posterior_draws < 1:
            raise ValueError("posterior_draws must be at least 1")
        if not 0 <= self.master_seed < 2 ** 64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")


def _mean_se(values):
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return float(values.mean()), 0.0
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size))


def _warn_range(prior):
    if not prior.in_theorem_range:
        warnings.warn(
            f"prior {prior.label} has a = {prior.a:g} outside [1/2, 1)",
            OutsideTheoremRangeWarning,
            stacklevel=3,
        )


def _evaluate(ctx, x, r):
    try:
        return posterior_variance(ctx, x)
    except QuadratureError:
        for i, xi in enumerate(x):
            try:
                posterior_variance(ctx, xi)
            except QuadratureError:
                logger.error("replication %d: quadrature failed at coordinate %d (x=%r)", r, i, xi)
                break
        raise


def _safe_ratio(num, rate_fn, *args):
    try:
        rate = rate_fn(*args)
    except (ValueError, PreconditionError):
        return None
    return num / rate if rate > 0 else None


def _lower_rate_applies(prior):
    return prior.a == 0.5 and prior.L.nondecreasing


# -- risk --------------------------------------------------------------------


@dataclass(frozen=True)
class RiskReport:
    """Quadratic risk of the posterior mean and its rate ratios.

    A ratio is None where its rate is undefined (e.g. the minimax rate at
    p = 0, or the lower-rate ratio for a prior without a = 1/2 and a
    nondecreasing L). ``thm35_ratio`` uses the zero-coordinate part of the
    total posterior variance.
    """

    n: int
    p: int
    tau: float
    reps: int
    mc_risk: float
    mc_se: float
    total_post_var: float
    total_post_var_se: float
    nonzero_risk: float
    zero_risk: float
    minimax_ratio: object
    thm31_ratio: object
    thm32_ratio: object
    thm35_ratio: object
    per_replication: dict = field(repr=False)

    JSON_KEYS = ("n", "p", "tau", "mc_risk", "mc_se",
                 "minimax_ratio", "thm31_ratio", "thm32_ratio", "thm35_ratio")

    def to_json_dict(self):
        return {k: getattr(self, k) for k in self.JSON_KEYS if getattr(self, k) is not None}


def run_risk(prior, problem, rule, plan, config=None):
    """Monte Carlo risk sum_i (T_tau(X_i) - theta0_i)^2 over replications."""
    _warn_range(prior)
    n, p = problem.n, problem.p
    tau = select_tau(rule, n, p, prior.a)
    ctx = PosteriorContext(prior, tau, config or QuadratureConfig())
    theta0 = problem.theta0
    mask = problem.support_mask

    def one(r):
        x = theta0 + stream(plan.master_seed, 1, r).standard_normal(n)
        post = _evaluate(ctx, x, r)
        sq = (post.mean - theta0) ** 2
        return (sq.sum(), sq[mask].sum(), sq[~mask].sum(),
                post.value.sum(), post.value[~mask].sum())

    results = np.array(_map_ordered(one, plan.reps)).reshape(plan.reps, 5)
    risk, nonzero, zero, post_var, zero_var = results.T
    mc_risk, mc_se = _mean_se(risk)
    total_var, total_var_se = _mean_se(post_var)
    zero_var_mean = float(zero_var.mean())
    thm35 = (_safe_ratio(zero_var_mean, thm35_rate, n, p, tau)
             if _lower_rate_applies(prior) else None)
    return RiskReport(
        n=n, p=p, tau=tau, reps=plan.reps,
        mc_risk=mc_risk, mc_se=mc_se,
        total_post_var=total_var, total_post_var_se=total_var_se,
        nonzero_risk=float(nonzero.mean()), zero_risk=float(zero.mean()),
        minimax_ratio=_safe_ratio(mc_risk, minimax_rate, n, p),
        thm31_ratio=_safe_ratio(mc_risk, thm31_rate, n, p, tau, prior.a),
        thm32_ratio=_safe_ratio(total_var, thm32_rate, n, p, tau, prior.a),
        thm35_ratio=thm35,
        per_replication={"risk": risk, "nonzero_risk": nonzero, "zero_risk": zero,
                         "total_post_var": post_var},
    )


# -- total posterior variance ------------------------------------------------


@dataclass(frozen=True)
class TotalVarianceReport:
    """Monte Carlo mean of sum_i Var(theta_i | X_i)."""

    n: int
    p: int
    tau: float
    reps: int
    total_post_var: float
    total_post_var_se: float
    zero_post_var: float
    thm32_ratio: object
    thm35_ratio: object
    per_replication: dict = field(repr=False)

    def to_json_dict(self):
        keys = ("n", "p", "tau", "total_post_var", "total_post_var_se",
                "zero_post_var", "thm32_ratio", "thm35_ratio")
        return {k: getattr(self, k) for k in keys if getattr(self, k) is not None}


def run_total_variance(prior, problem, rule, plan, noise=True, config=None):
    """Total posterior variance; with ``noise=False`` X equals theta0."""
    _warn_range(prior)
    n, p = problem.n, problem.p
    tau = select_tau(rule, n, p, prior.a)
    ctx = PosteriorContext(prior, tau, config or QuadratureConfig())
    theta0 = problem.theta0
    mask = problem.support_mask

    def one(r):
        x = theta0 + stream(plan.master_seed, 1, r).standard_normal(n) if noise else theta0
        value = _evaluate(ctx, np.atleast_1d(x), r).value
        return value.sum(), value[~mask].sum()

    results = np.array(_map_ordered(one, plan.reps)).reshape(plan.reps, 2)
    total, zero = results.T
    mean, se = _mean_se(total)
    zero_mean = float(zero.mean())
    return TotalVarianceReport(
        n=n, p=p, tau=tau, reps=plan.reps,
        total_post_var=mean, total_post_var_se=se, zero_post_var=zero_mean,
        thm32_ratio=_safe_ratio(mean, thm32_rate, n, p, tau, prior.a),
        thm35_ratio=(_safe_ratio(zero_mean, thm35_rate, n, p, tau)
                     if _lower_rate_applies(prior) else None),
        per_replication={"total_post_var": total, "zero_post_var": zero},
    )


def compare_tau_choices(prior, problem, plan, config=None):
    """Total posterior variance at tau = p/n against tau = (p/n) sqrt(ln(n/p)).

    Returns both reports, each normalized by the minimax rate, plus the
    observed ratio and the factor sqrt(ln(n/p)) it should track.
    """
    n, p = problem.n, problem.p
    plain = run_total_variance(prior, problem, TauRule("power", 1.0), plan, config=config)
    logged = run_total_variance(prior, problem, TauRule("default_log"), plan, config=config)
    rate = minimax_rate(n, p)
    return {
        "plain": plain,
        "default_log": logged,
        "plain_minimax_ratio": plain.total_post_var / rate,
        "default_log_minimax_ratio": logged.total_post_var / rate,
        "variance_ratio": logged.total_post_var / plain.total_post_var,
        "log_factor": math.sqrt(math.log(n / p)),
    }


# -- contraction -------------------------------------------------------------


@dataclass(frozen=True)
class ContractionReport:
    """Posterior mass outside balls of squared radius M p ln(n/p).

    Arrays are indexed like ``radius_multipliers``.
    """

    n: int
    p: int
    tau: float
    reps: int
    posterior_draws: int
    radius_multipliers: tuple
    prob_theta0: np.ndarray
    prob_theta0_se: np.ndarray
    prob_mean: np.ndarray
    prob_mean_se: np.ndarray
    per_replication: dict = field(repr=False)

    def to_json_dict(self):
        return {
            "n": self.n, "p": self.p, "tau": self.tau, "reps": self.reps,
            "posterior_draws": self.posterior_draws,
            "radius_multipliers": list(self.radius_multipliers),
            "prob_theta0": self.prob_theta0.tolist(),
            "prob_theta0_se": self.prob_theta0_se.tolist(),
            "prob_mean": self.prob_mean.tolist(),
            "prob_mean_se": self.prob_mean_se.tolist(),
        }


def _binomial_se(probs, draws):
    # per-replication binomial variance, averaged over replications
    var = probs * (1.0 - probs) / draws
    return np.sqrt(var.sum(axis=0)) / probs.shape[0]


def run_contraction(prior, problem, rule, plan, radius_multiplier, config=None):
    """Estimate posterior mass outside balls around theta0 and around T_tau(X).

    ``radius_multiplier`` may be a scalar or a sequence; the radius uses
    ln(n/p) and so needs 0 < p < n.
    """
    _warn_range(prior)
    if plan.posterior_draws < 1000:
        raise PreconditionError("contraction studies need at least 1000 posterior draws")
    n, p = problem.n, problem.p
    if not 0 < p < n:
        raise PreconditionError("contraction radius needs 0 < p < n")
    multipliers = tuple(float(m) for m in np.atleast_1d(radius_multiplier))
    if any(m < 0 for m in multipliers):
        raise ValueError("radius multipliers must be nonnegative")
    tau = select_tau(rule, n, p, prior.a)
    ctx = PosteriorContext(prior, tau, config or QuadratureConfig())
    theta0 = problem.theta0
    radii = np.array(multipliers) * p * math.log(n / p)

    def one(r):
        x = theta0 + stream(plan.master_seed, 1, r).standard_normal(n)
        t_hat = posterior_mean(ctx, x)
        draws = sample_theta_matrix(ctx, x, stream(plan.master_seed, 2, r), plan.posterior_draws)
        d0 = ((draws - theta0[:, None]) ** 2).sum(axis=0)
        dt = ((draws - t_hat[:, None]) ** 2).sum(axis=0)
        return ((d0[None, :] > radii[:, None]).mean(axis=1),
                (dt[None, :] > radii[:, None]).mean(axis=1))

    results = _map_ordered(one, plan.reps)
    p0 = np.array([r[0] for r in results])
    pt = np.array([r[1] for r in results])
    return ContractionReport(
        n=n, p=p, tau=tau, reps=plan.reps, posterior_draws=plan.posterior_draws,
        radius_multipliers=multipliers,
        prob_theta0=p0.mean(axis=0), prob_theta0_se=_binomial_se(p0, plan.posterior_draws),
        prob_mean=pt.mean(axis=0), prob_mean_se=_binomial_se(pt, plan.posterior_draws),
        per_replication={"prob_theta0": p0, "prob_mean": pt},
    )


# -- scaling -----------------------------------------------------------------


@dataclass(frozen=True)
class PowerPRule:
    """p = ceil(n ** gamma) with gamma in (0, 1)."""

    gamma: float

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")

    def __call__(self, n):
        return int(math.ceil(n ** self.gamma - 1e-12))


@dataclass(frozen=True)
class ScalingTable:
    rows: tuple
    stability: float

    COLUMNS = ("n", "p", "tau", "mc_risk", "mc_se", "minimax_ratio")

    def to_json_dict(self):
        return {"rows": [dict(zip(self.COLUMNS, row)) for row in self.rows],
                "stability": self.stability}


def run_scaling_study(prior, n_list, p_rule, rule, plan, signal_spec, config=None):
    """Risk at each n with p = p_rule(n); stability is max/min of minimax_ratio.

    The problem at size n is generated from stream ``(0, n)``.
    """
    rows = []
    for n in n_list:
        p = p_rule(n)
        problem = generate_problem(n, p, signal_spec, stream(plan.master_seed, 0, n))
        report = run_risk(prior, problem, rule, plan, config)
        rows.append((n, p, report.tau, report.mc_risk, report.mc_se, report.minimax_ratio))
    ratios = [row[-1] for row in rows]
    return ScalingTable(rows=tuple(rows), stability=max(ratios) / min(ratios))
