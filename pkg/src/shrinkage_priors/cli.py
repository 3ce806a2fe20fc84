"""Command-line entry point.

Grammar::

    shrinkage-priors (priors list | estimate | verify-bounds | risk | contract | scaling) [flags]

Every output starts with a ``#`` line holding the tool version and the fully
resolved configuration (including the seed), so identical arguments give
byte-identical files. Numbers are written with 15 significant digits.
Exit status: 0 on success, 1 when ``verify-bounds`` finds a failing check,
2 on usage or input errors.
"""

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import __version__
from .bounds import SUITES, ConcentrationParams, check_suite
from .exceptions import InputError, PreconditionError
from .experiments import (
    PowerPRule,
    ReplicationPlan,
    SignalSpec,
    TauRule,
    generate_problem,
    run_contraction,
    run_risk,
    run_scaling_study,
    stream,
)
from .posterior import PosteriorContext, posterior_variance
from .priors import parse_prior, registry

TOOL = "shrinkage-priors"

# per-subcommand defaults, applied after the config file is merged
_DEFAULTS = {
    "estimate": {"prior": "horseshoe", "tau": None, "input": "-", "out": "-"},
    "verify-bounds": {"prior": "horseshoe", "suite": None, "tau_grid": "0.1,0.01",
                      "x_grid": "-10:10:0.1", "eta": 5.0 / 6.0, "delta": 0.2, "out": "-"},
    "risk": {"prior": "horseshoe", "n": 400, "p": 8, "signal": "constant:7",
             "tau_rule": "default-log", "reps": 100, "seed": 42, "out": "-", "csv": None},
    "contract": {"prior": "horseshoe", "n": 400, "p": 8, "signal": "constant:7",
                 "tau_rule": "default-log", "reps": 20, "seed": 42, "out": "-", "csv": None,
                 "radius": "10", "draws": 1000},
    "scaling": {"prior": "horseshoe", "n_list": "200,400,800", "gamma": 0.25,
                "signal": "constant:7", "tau_rule": "default-log", "reps": 100, "seed": 42,
                "out": "-", "csv": None},
}


class UsageError(Exception):
    pass


def fmt(value):
    """15-significant-digit text for a number; booleans and None pass through."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if math.isnan(value):
        return "nan"
    text = format(value, ".15g")
    return "0" if text == "-0" else text


def _round_json(obj):
    if isinstance(obj, dict):
        return {k: _round_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_json(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if not math.isfinite(value):
            return None
        return float(format(value, ".15g"))
    return obj


def _header_line(command, config):
    payload = json.dumps({"tool": TOOL, "version": __version__, "command": command,
                          "config": _round_json(config)}, sort_keys=True, separators=(",", ":"))
    return "# " + payload + "\n"


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(text)


def _csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) if not isinstance(v, str) else v for v in row])
    return buf.getvalue()


# -- parsing -----------------------------------------------------------------


def _build_parser():
    parser = argparse.ArgumentParser(
        prog=TOOL,
        description="Posterior functionals, bound checks and simulation studies "
                    "for global-local shrinkage priors.",
    )
    parser.add_argument("--version", action="version", version=f"{TOOL} {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text, argument_default=None)
        p.add_argument("--config", help="JSON file whose keys mirror the flags")
        return p

    pri = sub.add_parser("priors", help="prior registry")
    pri_sub = pri.add_subparsers(dest="action", metavar="ACTION")
    pri_sub.required = True
    lst = pri_sub.add_parser("list", help="list registry priors as CSV")
    lst.add_argument("--config", help="JSON file whose keys mirror the flags")
    lst.add_argument("--out")

    est = add("estimate", "posterior mean and variance for observations")
    est.add_argument("--prior")
    est.add_argument("--tau", type=float)
    est.add_argument("--in", dest="input", help="one observation per line; '-' for stdin")
    est.add_argument("--out")

    ver = add("verify-bounds", "check closed-form bounds against quadrature")
    ver.add_argument("--prior")
    ver.add_argument("--suite", choices=SUITES)
    ver.add_argument("--tau-grid", dest="tau_grid", help="comma-separated tau values")
    ver.add_argument("--x-grid", dest="x_grid", help="lo:hi:step (y values for the ik suite)")
    ver.add_argument("--eta", type=float)
    ver.add_argument("--delta", type=float)
    ver.add_argument("--out")

    for name, text in (("risk", "Monte Carlo risk of the posterior mean"),
                       ("contract", "posterior contraction probabilities"),
                       ("scaling", "minimax-ratio stability across n")):
        p = add(name, text)
        p.add_argument("--prior")
        if name == "scaling":
            p.add_argument("--n-list", dest="n_list", help="comma-separated n values")
            p.add_argument("--gamma", type=float, help="p = ceil(n**gamma)")
        else:
            p.add_argument("--n", type=int)
            p.add_argument("--p", type=int)
        p.add_argument("--signal", help="A, constant:A or scaled:A")
        p.add_argument("--tau-rule", dest="tau_rule",
                       help="fixed:R | power:A | default-log | a-adapted")
        p.add_argument("--reps", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="JSON report; '-' for stdout")
        p.add_argument("--csv", help="per-replication CSV plot data")
        if name == "contract":
            p.add_argument("--radius", help="comma-separated radius multipliers M")
            p.add_argument("--draws", type=int, help="posterior draws per replication")
    return parser


def _resolve(command, args):
    """Merge flags over the config file over the defaults."""
    resolved = dict(_DEFAULTS.get(command, {}))
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as handle:
                from_file = json.load(handle)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file: {exc}") from None
        if not isinstance(from_file, dict):
            raise UsageError("config file must hold a JSON object")
        for key, value in from_file.items():
            key = key.replace("-", "_").lstrip("_")
            if key == "in":
                key = "input"
            if key not in resolved:
                raise UsageError(f"unknown config key {key!r} for {command}")
            resolved[key] = value
    for key in resolved:
        value = getattr(args, key, None)
        if value is not None:
            resolved[key] = value
    return resolved


def _float_list(text, what):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad {what}: {text!r}") from None


def _x_grid(text):
    try:
        lo, hi, step = (float(v) for v in str(text).split(":"))
    except ValueError:
        raise UsageError(f"bad grid {text!r}; expected lo:hi:step") from None
    if step <= 0 or hi < lo:
        raise UsageError(f"bad grid {text!r}; need step > 0 and hi >= lo")
    count = int(math.floor((hi - lo) / step + 1e-9))
    grid = lo + step * np.arange(count + 1)
    return np.round(grid, 12)


def _signal(text):
    text = str(text)
    kind, _, arg = text.partition(":")
    try:
        if not arg:
            return SignalSpec.constant(float(kind))
        return SignalSpec(kind, float(arg))
    except ValueError:
        raise UsageError(f"bad signal {text!r}; expected A, constant:A or scaled:A") from None


def _prior(text):
    try:
        return parse_prior(str(text))
    except (KeyError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _tau_rule(text):
    try:
        return TauRule.parse(str(text))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# -- commands ----------------------------------------------------------------


def _cmd_priors(args):
    config = {"action": "list"}
    rows = []
    for prior in registry():
        L = prior.L
        rows.append((prior.label, prior.a, prior.K, prior.M, L.c0, L.t0,
                     L.nondecreasing, prior.in_theorem_range))
    header = ("name", "a", "K", "M", "c0", "t0", "nondecreasing", "in_theorem_range")
    _write(getattr(args, "out", None), _header_line("priors list", config) + _csv_text(header, rows))
    return 0


def _read_observations(path):
    try:
        if path == "-":
            lines = sys.stdin.read().splitlines()
        else:
            with open(path, encoding="utf-8") as handle:
                lines = handle.read().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read input: {exc}") from None
    values = []
    for number, line in enumerate(lines, 1):
        line = line.strip()
        if not line:
            continue
        try:
            value = float(line)
        except ValueError:
            raise UsageError(f"input line {number}: not a number: {line!r}") from None
        if not math.isfinite(value):
            raise UsageError(f"input line {number}: not finite: {line!r}")
        values.append(value)
    return np.array(values)


def _cmd_estimate(config):
    if config["tau"] is None:
        raise UsageError("estimate needs --tau")
    prior = _prior(config["prior"])
    tau = float(config["tau"])
    if not tau > 0:
        raise UsageError("--tau must be positive")
    x = _read_observations(config["input"])
    rows = []
    if x.size:
        post = posterior_variance(PosteriorContext(prior, tau), x)
        rows = zip(x, np.atleast_1d(post.mean), np.atleast_1d(post.value),
                   np.atleast_1d(post.identity_gap))
    text = _header_line("estimate", config) + _csv_text(
        ("x", "t_tau", "post_var", "identity_gap"), rows)
    _write(config["out"], text)
    return 0


def _cmd_verify(config):
    if config["suite"] is None:
        raise UsageError("verify-bounds needs --suite")
    prior = _prior(config["prior"])
    taus = _float_list(config["tau_grid"], "tau grid")
    grid = _x_grid(config["x_grid"])
    try:
        params = ConcentrationParams(float(config["eta"]), float(config["delta"]))
        rows = check_suite(prior, config["suite"], taus, grid, params)
    except (PreconditionError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    header = ("suite", "tau", "x_or_y", "lhs", "rhs", "margin", "pass")
    _write(config["out"], _header_line("verify-bounds", config) + _csv_text(header, rows))
    return 0 if all(row[-1] for row in rows) else 1


def _plan(config, draws=1000):
    try:
        return ReplicationPlan(int(config["reps"]), int(config["seed"]), int(draws))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _problem(config, prior):
    try:
        return generate_problem(int(config["n"]), int(config["p"]), _signal(config["signal"]),
                                stream(int(config["seed"]), 0))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _emit_json(config, command, report_dict):
    doc = {"header": {"tool": TOOL, "version": __version__, "command": command,
                      "config": config, "seed": config["seed"]},
           "report": report_dict}
    _write(config["out"], json.dumps(_round_json(doc), indent=2, sort_keys=False) + "\n")


def _emit_csv(config, command, per_rep):
    if not config.get("csv"):
        return
    keys = list(per_rep)
    rows = [(r, *(per_rep[k][r] for k in keys)) for r in range(len(per_rep[keys[0]]))]
    _write(config["csv"], _header_line(command, config) + _csv_text(("replication", *keys), rows))


def _cmd_risk(config):
    prior = _prior(config["prior"])
    problem = _problem(config, prior)
    report = run_risk(prior, problem, _tau_rule(config["tau_rule"]), _plan(config))
    _emit_json(config, "risk", report.to_json_dict())
    _emit_csv(config, "risk", report.per_replication)
    return 0


def _cmd_contract(config):
    prior = _prior(config["prior"])
    problem = _problem(config, prior)
    radii = _float_list(config["radius"], "radius list")
    report = run_contraction(prior, problem, _tau_rule(config["tau_rule"]),
                             _plan(config, config["draws"]), radii)
    _emit_json(config, "contract", report.to_json_dict())
    per_rep = {}
    for i, m in enumerate(report.radius_multipliers):
        per_rep[f"prob_theta0_M{fmt(m)}"] = report.per_replication["prob_theta0"][:, i]
        per_rep[f"prob_mean_M{fmt(m)}"] = report.per_replication["prob_mean"][:, i]
    _emit_csv(config, "contract", per_rep)
    return 0


def _cmd_scaling(config):
    prior = _prior(config["prior"])
    try:
        n_list = [int(v) for v in _float_list(config["n_list"], "n list")]
        p_rule = PowerPRule(float(config["gamma"]))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    table = run_scaling_study(prior, n_list, p_rule, _tau_rule(config["tau_rule"]),
                              _plan(config), _signal(config["signal"]))
    _emit_json(config, "scaling", table.to_json_dict())
    if config.get("csv"):
        _write(config["csv"], _header_line("scaling", config)
               + _csv_text(table.COLUMNS, table.rows))
    return 0


_COMMANDS = {
    "estimate": _cmd_estimate,
    "verify-bounds": _cmd_verify,
    "risk": _cmd_risk,
    "contract": _cmd_contract,
    "scaling": _cmd_scaling,
}


_VALUE_FLAGS = ("--x-grid", "--tau-grid", "--signal", "--radius", "--tau")


def _join_negative_values(argv):
    # argparse takes "-10:10:0.1" for an option; bind it to its flag explicitly
    out = []
    tokens = iter(argv)
    for token in tokens:
        if token in _VALUE_FLAGS:
            value = next(tokens, None)
            if value is not None and value.startswith("-") and not value.startswith("--"):
                out.append(f"{token}={value}")
                continue
            out.append(token)
            if value is not None:
                out.append(value)
            continue
        out.append(token)
    return out


def main(argv=None):
    """Run the tool and return its exit status."""
    parser = _build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(_join_negative_values(argv))
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "priors":
            return _cmd_priors(args)
        config = _resolve(args.command, args)
        return _COMMANDS[args.command](config)
    except (UsageError, InputError, PreconditionError) as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"{TOOL}: error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
