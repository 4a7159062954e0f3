"""Command line front end: config parsing, experiment drivers, CSV and plot-script output.

Config files are line oriented::

    experiment = ogd
    geometry = exponential
    T = 1000, 10000
    seed = 0-15

    [adversary]
    kind = linear
    grad_bound = 1.0

Keys before the first ``[section]`` belong to ``[run]``.
"""
import argparse
import hashlib
import json
import os
import re
import sys
from dataclasses import dataclass, field

import numpy as np

from .adversaries import CurlCycleAdversary, LinearHiddenSequence, QuadraticHiddenSequence
from .domains import Ball, Box
from .errors import ConfigError, OhcoError, OutputError
from .geometry import GALLERY_NAMES, MetricField, box_grid, compatibility_check, gallery_pair
from .lab import (assumption_constants, audit_geometry, coupling_experiment, fit_rate,
                  hidden_set, lower_bound_experiment, run_bandit_batch,
                  run_cells, run_full_information_batch)
from .learners import StepSizePlan, plan_stepsize_theorem1, plan_stepsize_theorem4

EXPERIMENTS = ("ogd", "bandit", "coupling", "lowerbound", "compat", "sweep")
THEORY_EXPONENT = {"ogd": 0.5, "bandit": 0.75, "lowerbound": 1.0}
REQUIRED = object()

# section -> key -> (type, default)
SCHEMA = {
    "run": {
        "experiment": ("str", REQUIRED),
        "geometry": ("str", None),
        "d": ("int", 2),
        "T": ("ints", None),
        "seed": ("ints", [0]),
        "step": ("str", None),
        "eta": ("float", None),
        "delta": ("float", None),
        "sweep": ("str", None),
        "x1": ("floats", None),
        "trace": ("bool", True),
    },
    "domain": {
        "shape": ("str", None),
        "lo": ("floats", None),
        "hi": ("floats", None),
        "center": ("floats", None),
        "radius": ("float", None),
    },
    "adversary": {
        "kind": ("str", None),
        "grad_bound": ("float", 1.0),
        "H": ("float", None),
        "mu_max": ("float", 0.1),
        "linear_radius": ("float", 0.5),
        "drift": ("floats", None),
        "rectangle": ("floats", [1.0, 1.0, 0.2, 0.2]),
        "u": ("floats", [0.0, float(np.pi / 6)]),
        "buffer": ("float", 0.05),
        "gamma": ("float", 0.06),
        "eta": ("float", 0.002),
    },
    "coupling": {
        "eta": ("floats", [0.1, 0.05, 0.02, 0.01]),
        "n_states": ("int", 100),
        "grad_mode": ("str", "exact"),
        "grad_scale": ("float", 1.0),
    },
    "compat": {
        "grid": ("int", 9),
        "fd_step": ("float", 1e-4),
        "tol": ("float", 1e-5),
    },
    "tolerance": {
        "comparator_rtol": ("float", 1e-3),
    },
}

CHOICES = {
    ("run", "experiment"): EXPERIMENTS,
    ("run", "geometry"): GALLERY_NAMES,
    ("run", "step"): ("theorem1", "theorem4", "manual"),
    ("run", "sweep"): ("ogd", "bandit", "lowerbound"),
    ("domain", "shape"): ("box", "ball"),
    ("adversary", "kind"): ("linear", "quadratic"),
    ("coupling", "grad_mode"): ("exact", "surrogate"),
}


def _parse_int(s):
    v = float(s.strip())
    if not v.is_integer():
        raise ValueError("not an integer")
    return int(v)


def _parse_ints(s):
    """Comma list of integers; ``a-b`` expands to the inclusive range."""
    out = []
    for part in s.split(","):
        part = part.strip()
        m = re.fullmatch(r"(\d+)-(\d+)", part)
        if m:
            a, b = int(m.group(1)), int(m.group(2))
            if b < a:
                raise ValueError("empty range")
            out.extend(range(a, b + 1))
        else:
            out.append(_parse_int(part))
    return out


def _parse_bool(s):
    v = s.strip().lower()
    if v in ("true", "yes", "1", "on"):
        return True
    if v in ("false", "no", "0", "off"):
        return False
    raise ValueError("expected true or false")


CONVERTERS = {
    "str": str.strip,
    "int": _parse_int,
    "ints": _parse_ints,
    "float": float,
    "floats": lambda s: [float(v) for v in s.split(",")],
    "bool": _parse_bool,
}


@dataclass
class RunConfig:
    """Validated, fully defaulted configuration."""

    experiment: str
    geometry: str
    d: int
    horizons: list
    seeds: list
    step: str
    eta: float
    delta: float
    sweep_kind: str
    x1: list
    write_traces: bool
    domain: dict
    adversary: dict
    coupling: dict
    compat: dict
    tolerances: dict
    output_dir: str = None
    values: dict = field(default_factory=dict, repr=False)

    @property
    def hash(self):
        """sha256 of the canonical (sorted, defaulted) key/value set."""
        blob = json.dumps(self.values, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def with_overrides(self, seeds=None, horizons=None):
        values = {s: dict(kv) for s, kv in self.values.items()}
        if seeds is not None:
            values["run"]["seed"] = list(seeds)
        if horizons is not None:
            values["run"]["T"] = list(horizons)
        cfg = _build(values)
        cfg.output_dir = self.output_dir
        return cfg


def _tokenize(text):
    """Yield ``(lineno, section, key, raw)``; syntax problems go to the error list."""
    errors, items = [], []
    section = "run"
    for n, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s.startswith(("#", ";")):
            continue
        if s.startswith("["):
            if not s.endswith("]"):
                errors.append(f"line {n}: malformed section header {s!r}")
                continue
            section = s[1:-1].strip()
            if section not in SCHEMA:
                errors.append(f"line {n}: unknown section [{section}]")
            continue
        if "=" not in s:
            errors.append(f"line {n}: expected key = value, got {s!r}")
            continue
        key, raw = (p.strip() for p in s.split("=", 1))
        items.append((n, section, key, raw))
    return items, errors


def parse_config(text, experiment=None):
    """Parse config text into a :class:`RunConfig`; all problems are reported together.

    ``experiment`` supplies a default kind (used by the dedicated subcommands).
    """
    items, errors = _tokenize(text)
    values = {s: {} for s in SCHEMA}
    seen = {}
    for n, section, key, raw in items:
        if section not in SCHEMA:
            continue
        spec = SCHEMA[section].get(key)
        if spec is None:
            where = "" if section == "run" else f" in [{section}]"
            errors.append(f"line {n}: unknown key {key!r}{where}")
            continue
        if (section, key) in seen:
            errors.append(f"line {n}: duplicate key {key!r} (first set at line {seen[section, key]})")
            continue
        seen[section, key] = n
        kind = spec[0]
        try:
            val = CONVERTERS[kind](raw)
        except (ValueError, TypeError):
            errors.append(f"line {n}: {key!r} expects {kind}, got {raw!r}")
            continue
        choices = CHOICES.get((section, key))
        if choices is not None and val not in choices:
            errors.append(f"line {n}: {key!r} must be one of {', '.join(choices)}, got {val!r}")
            continue
        values[section][key] = val
    if experiment is not None:
        given = values["run"].get("experiment")
        if given is not None and given != experiment:
            errors.append(f"line {seen['run', 'experiment']}: experiment {given!r} conflicts with "
                          f"subcommand {experiment!r}")
        values["run"].setdefault("experiment", experiment)
    for section, keys in SCHEMA.items():
        for key, (_, default) in keys.items():
            if key in values[section]:
                continue
            if default is REQUIRED:
                errors.append(f"missing required key {key!r}")
            else:
                values[section][key] = default
    if not errors:
        errors.extend(_semantic_errors(values, seen))
    if errors:
        raise ConfigError(errors)
    return _build(values)


def _semantic_errors(values, seen):
    run = values["run"]
    exp = run["experiment"]
    errs = []
    at = lambda s, k: f"line {seen[s, k]}: " if (s, k) in seen else ""
    kind = run["sweep"] if exp == "sweep" else exp
    if exp == "sweep" and kind is None:
        errs.append("missing required key 'sweep' for experiment sweep")
    if kind in ("ogd", "bandit", "coupling", "compat") and run["geometry"] is None:
        errs.append(f"missing required key 'geometry' for experiment {exp}")
    if kind in ("ogd", "bandit", "lowerbound") and run["T"] is None:
        errs.append(f"missing required key 'T' for experiment {exp}")
    if run["T"] is not None and min(run["T"]) < 0:
        errs.append(f"{at('run', 'T')}horizons must be nonnegative")
    if run["step"] == "manual" and run["eta"] is None:
        errs.append(f"{at('run', 'step')}manual step size needs 'eta'")
    if kind == "bandit" and run["step"] == "manual" and run["delta"] is None:
        errs.append(f"{at('run', 'step')}manual bandit step needs 'delta'")
    dom = values["domain"]
    if dom["shape"] == "box" and (dom["lo"] is None or dom["hi"] is None):
        errs.append(f"{at('domain', 'shape')}box domain needs 'lo' and 'hi'")
    if dom["shape"] == "ball" and (dom["center"] is None or dom["radius"] is None):
        errs.append(f"{at('domain', 'shape')}ball domain needs 'center' and 'radius'")
    return errs


def _build(values):
    run = values["run"]
    exp = run["experiment"]
    kind = run["sweep"] if exp == "sweep" else exp
    step = run["step"] or {"ogd": "theorem1", "bandit": "theorem4"}.get(kind, "manual")
    adv = dict(values["adversary"])
    adv["kind"] = adv["kind"] or ("quadratic" if kind == "bandit" else "linear")
    values = {s: dict(kv) for s, kv in values.items()}
    values["run"]["step"] = step
    values["adversary"]["kind"] = adv["kind"]
    return RunConfig(
        experiment=exp, geometry=run["geometry"] or ("log_spiral" if kind == "lowerbound" else None),
        d=run["d"], horizons=run["T"], seeds=run["seed"], step=step, eta=run["eta"],
        delta=run["delta"], sweep_kind=run["sweep"], x1=run["x1"], write_traces=run["trace"],
        domain=values["domain"], adversary=adv, coupling=values["coupling"], compat=values["compat"],
        tolerances=values["tolerance"], values=values)


def load_config(path, experiment=None):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise OutputError(f"cannot read config {path}: {exc.strerror}") from exc
    return parse_config(text, experiment)


# --------------------------------------------------------------------------
# CSV output

def _fmt(v):
    return format(float(v), ".12g")


def _header_value(v):
    if isinstance(v, (np.ndarray, list, tuple)):
        return "[" + ", ".join(_fmt(a) for a in np.ravel(v)) + "]"
    if isinstance(v, (float, np.floating)):
        return _fmt(v)
    return str(v)


def _write(path, text):
    try:
        d = os.path.dirname(path)
        if d:
            os.makedirs(d, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror}") from exc
    return path


def emit_trace_csv(trace, path, header=None):
    """Write one trace: ``#`` header lines, then ``t, x_1..x_d, loss, cum_loss, cum_regret``."""
    meta = dict(trace.header)
    meta.update(header or {})
    lines = [f"# {k}: {_header_value(v)}" for k, v in meta.items()]
    lines.append(f"# comparator: {_header_value(trace.comparator)}")
    lines.append(f"# comparator_value: {_fmt(trace.comparator_value)}")
    d = trace.iterates.shape[1] if trace.iterates.ndim == 2 else 0
    lines.append(",".join(["t"] + [f"x_{i + 1}" for i in range(d)] + ["loss", "cum_loss", "cum_regret"]))
    if trace.T:
        cl, cr = trace.cum_loss, trace.cumulative_regret
        for t in range(trace.T):
            row = [str(t + 1)] + [_fmt(a) for a in trace.iterates[t]]
            row += [_fmt(trace.losses[t]), _fmt(cl[t]), _fmt(cr[t])]
            lines.append(",".join(row))
    return _write(path, "\n".join(lines) + "\n")


def read_trace_csv(path):
    """Read a trace file back as ``(header dict, data array)``."""
    header, rows = {}, []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                k, _, v = line[1:].strip().partition(": ")
                header[k] = v
            elif line.startswith("t,"):
                header["_columns"] = line.split(",")
            elif line:
                rows.append([float(v) for v in line.split(",")])
    ncol = len(header.get("_columns", []))
    return header, np.array(rows, dtype=float).reshape(-1, ncol)


@dataclass
class SummaryEntry:
    """Seed-averaged regrets of one experiment over its horizons, with an optional fit."""

    experiment: str
    horizons: list
    means: list
    ses: list
    fit: object = None


def emit_summary_and_plots(entries, path):
    """Write the summary CSV at ``path`` and a gnuplot script next to it. Returns both paths."""
    entries = list(entries)
    if not entries:
        raise ConfigError("summary needs at least one entry")
    lines = ["experiment,T,mean_regret,se_regret,slope,slope_ci_lo,slope_ci_hi,theory_exponent"]
    blocks = []
    row = 0
    for e in entries:
        if e.fit is not None:
            slope = e.fit.slope
            lo, hi = e.fit.slope_ci()
        else:
            slope = lo = hi = float("nan")
        p = THEORY_EXPONENT[e.experiment]
        start = row
        for T, m, s in zip(e.horizons, e.means, e.ses):
            lines.append(",".join([e.experiment, str(int(T)), _fmt(m), _fmt(s), _fmt(slope),
                                   _fmt(lo), _fmt(hi), _fmt(p)]))
            row += 1
        blocks.append((e, start, row - 1, p))
    _write(path, "\n".join(lines) + "\n")
    script = os.path.splitext(path)[0] + ".gp"
    _write(script, _gnuplot(os.path.basename(path), blocks))
    return path, script


def _gnuplot(csv_name, blocks):
    out = [
        "# log-log regret against horizon with theoretical reference slopes",
        "set datafile separator ','",
        "set logscale xy",
        "set xlabel 'T'",
        "set ylabel 'regret'",
        "set key left top",
        "set terminal pngcairo size 800,600",
        f"set output '{os.path.splitext(csv_name)[0]}.png'",
    ]
    plots = []
    for k, (e, a, b, p) in enumerate(blocks):
        good = [(T, m) for T, m in zip(e.horizons, e.means) if m > 0]
        if good:
            logc = np.mean([np.log(m) - p * np.log(T) for T, m in good])
            out.append(f"c{k} = {_fmt(np.exp(logc))}")
            out.append(f"p{k} = {_fmt(p)}")
        plots.append(f"'{csv_name}' skip 1 every ::{a}::{b} using 2:3:4 with yerrorlines "
                     f"title '{e.experiment}'")
        if good:
            plots.append(f"c{k}*x**p{k} with lines dashtype 2 title '{e.experiment} T^{{{_fmt(p)}}}'")
    out.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------
# experiment setup

def _pair(cfg):
    opts = {}
    d = cfg.d if cfg.geometry in ("identity", "quadratic", "exponential") else None
    return gallery_pair(cfg.geometry, d=d, **opts)


def _domain(cfg, q):
    dom = cfg.domain
    if dom["shape"] == "ball":
        return Ball(dom["center"], dom["radius"])
    if dom["shape"] == "box":
        return Box(dom["lo"], dom["hi"])
    return Box(*q.x_box)


def _sequences(cfg, q, Y, seeds):
    a = cfg.adversary
    if Y is None:
        raise ConfigError(f"geometry {cfg.geometry!r} has no box or ball hidden image on this domain")
    if a["kind"] == "linear":
        return [LinearHiddenSequence(Y, q, s, a["grad_bound"]) for s in seeds]
    drift = None if a["drift"] is None else np.asarray(a["drift"])
    kw = {"mu_max": a["mu_max"]} if a["H"] is None else {"H": a["H"]}
    return [QuadraticHiddenSequence(Y, q, s, linear_radius=a["linear_radius"], drift=drift, **kw)
            for s in seeds]


def _plan(cfg, kind, q, R, X, seq, T):
    if cfg.step == "manual":
        return StepSizePlan(cfg.eta, cfg.delta or 0.0, "manual")
    if R is None:
        raise ConfigError(f"geometry {cfg.geometry!r} has no compatible regularizer; "
                          "theory step sizes are undefined (use step = manual)")
    consts = assumption_constants(audit_geometry(q, R, X), seq.constants(), q.d)
    if cfg.step == "theorem1":
        return plan_stepsize_theorem1(consts, T)
    return plan_stepsize_theorem4(consts, T)


def _run_kind(cfg, kind, T, seeds, record):
    q, R = _pair(cfg)
    X = _domain(cfg, q)
    Y = hidden_set(q, X)
    seqs = _sequences(cfg, q, Y, seeds)
    plan = _plan(cfg, kind, q, R, X, seqs[0], T)
    x1 = None if cfg.x1 is None else np.asarray(cfg.x1)
    if kind == "ogd":
        return run_full_information_batch(q, X, seqs, T, plan, x1=x1, Y=Y, record=record)
    return run_bandit_batch(q, X, seqs, T, plan, x1=x1, Y=Y, record=record)


def _adversary(cfg):
    a = cfg.adversary
    eta = cfg.eta if cfg.eta is not None else a["eta"]
    return CurlCycleAdversary(eta, rectangle=tuple(a["rectangle"]), u=tuple(a["u"]),
                              buffer=a["buffer"], gamma=a["gamma"])


def _trace_name(kind, T, seed):
    return f"trace_{kind}_T{T}_seed{seed}.csv"


def _fit_or_none(horizons, means):
    try:
        return fit_rate(horizons, means)
    except OhcoError:
        return None


# --------------------------------------------------------------------------
# subcommands

def cmd_run(cfg, out):
    """Full-information or bandit runs: one trace per (T, seed) and a summary."""
    kind = cfg.experiment
    if kind not in ("ogd", "bandit"):
        return {"lowerbound": cmd_lowerbound, "coupling": cmd_coupling,
                "compat": cmd_compat, "sweep": cmd_sweep}[kind](cfg, out)
    means, ses, written = [], [], []
    for T in cfg.horizons:
        batch = _run_kind(cfg, kind, T, cfg.seeds, record=cfg.write_traces and T > 0)
        means.append(batch.mean)
        ses.append(batch.se)
        if batch.traces:
            for tr in batch.traces:
                p = os.path.join(out, _trace_name(kind, T, tr.header["seed"]))
                written.append(emit_trace_csv(tr, p, {"config_hash": cfg.hash}))
    entry = SummaryEntry(kind, cfg.horizons, means, ses, _fit_or_none(cfg.horizons, means))
    written.extend(emit_summary_and_plots([entry], os.path.join(out, "summary.csv")))
    return written


def cmd_sweep(cfg, out):
    """Seed-averaged regret over the horizon list; cells may run on ``OHCO_THREADS`` threads."""
    kind = cfg.sweep_kind or cfg.experiment
    if kind == "lowerbound":
        res = lower_bound_experiment(_adversary(cfg), max(cfg.horizons))
        means = [res.regret_at(T) for T in cfg.horizons]
        ses = [0.0] * len(means)
    else:
        batches = run_cells(lambda T: _run_kind(cfg, kind, T, cfg.seeds, record=False), cfg.horizons)
        means = [b.mean for b in batches]
        ses = [b.se for b in batches]
    entry = SummaryEntry(kind, cfg.horizons, means, ses, _fit_or_none(cfg.horizons, means))
    return list(emit_summary_and_plots([entry], os.path.join(out, "summary.csv")))


def cmd_lowerbound(cfg, out):
    adv = _adversary(cfg)
    T = max(cfg.horizons)
    res = lower_bound_experiment(adv, T)
    written = [emit_trace_csv(res.trace, os.path.join(out, f"trace_lowerbound_T{T}.csv"),
                              {"config_hash": cfg.hash})]
    lines = [f"# config_hash: {cfg.hash}", f"# predicted_cycle_regret: {_fmt(res.predicted_cycle)}",
             "cycle,regret"]
    lines += [f"{k + 1},{_fmt(v)}" for k, v in enumerate(res.cycle_sums)]
    written.append(_write(os.path.join(out, "cycles.csv"), "\n".join(lines) + "\n"))
    means = [res.regret_at(t) for t in cfg.horizons]
    entry = SummaryEntry("lowerbound", cfg.horizons, means, [0.0] * len(means),
                         _fit_or_none(cfg.horizons, means))
    written.extend(emit_summary_and_plots([entry], os.path.join(out, "summary.csv")))
    return written


def cmd_coupling(cfg, out):
    q, R = _pair(cfg)
    if R is None:
        raise ConfigError(f"geometry {cfg.geometry!r} has no regularizer to couple with")
    X = _domain(cfg, q)
    Y = hidden_set(q, X)
    if Y is None:
        raise ConfigError(f"geometry {cfg.geometry!r} has no box or ball hidden image on this domain")
    c = cfg.coupling
    res = coupling_experiment(q, R, X, Y, c["eta"], n_states=c["n_states"], seed=cfg.seeds[0],
                              grad_mode=c["grad_mode"], grad_scale=c["grad_scale"],
                              compat_tol=cfg.compat["tol"])
    lines = [f"# config_hash: {cfg.hash}", f"# mode: {res.mode}", f"# G: {_fmt(res.G)}",
             f"# G_F: {_fmt(res.G_F)}", f"# slope: {_fmt(res.slope)}", "eta,max_error,bound"]
    lines += [",".join(_fmt(v) for v in r) for r in res.rows()]
    return [_write(os.path.join(out, "coupling.csv"), "\n".join(lines) + "\n")]


def compat_grid(q, n):
    """Hidden-space grid: an ``n``-per-axis grid of the (slightly padded) decision box, mapped by ``q``."""
    lo, hi = (np.asarray(v, dtype=float) for v in q.x_box)
    pad = 0.02 * (hi - lo)
    return q(box_grid(lo + pad, hi - pad, n))


def cmd_compat(cfg, out):
    q, _ = _pair(cfg)
    c = cfg.compat
    rep = compatibility_check(MetricField.from_reparameterization(q), compat_grid(q, c["grid"]),
                              fd_step=c["fd_step"], tol=c["tol"])
    d = q.d
    lines = [f"# config_hash: {cfg.hash}", f"# geometry: {cfg.geometry}",
             f"# compatible: {str(rep.compatible).lower()}",
             f"# max_violation: {_fmt(rep.max_violation)}",
             ",".join([f"z_{i + 1}" for i in range(d)] + ["i", "j", "k", "violation"])]
    for r in rep.rows():
        lines.append(",".join([_fmt(v) for v in r[:d]] + [str(v) for v in r[d:d + 3]] + [_fmt(r[-1])]))
    path = _write(os.path.join(out, "compat.csv"), "\n".join(lines) + "\n")
    verdict = "compatible" if rep.compatible else "incompatible"
    print(f"{cfg.geometry}: {verdict} (max violation {rep.max_violation:.3g})")
    return [path]


COMMANDS = {"run": (cmd_run, None), "sweep": (cmd_sweep, "sweep"), "lowerbound": (cmd_lowerbound, "lowerbound"),
            "coupling": (cmd_coupling, "coupling"), "compat": (cmd_compat, "compat")}


def build_parser():
    p = argparse.ArgumentParser(prog="ohco", description="Hidden-convex online learning experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="key=value config file")
        s.add_argument("--out", required=True, help="output directory")
        s.add_argument("--seed", help="override seeds, e.g. 0 or 0-15")
        s.add_argument("--T", dest="T", help="override horizons, e.g. 1000,10000")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    fn, default_kind = COMMANDS[args.command]
    try:
        cfg = load_config(args.config, default_kind)
        errs = []
        seeds = horizons = None
        if args.seed is not None:
            try:
                seeds = _parse_ints(args.seed)
            except ValueError:
                errs.append(f"--seed: cannot parse {args.seed!r}")
        if args.T is not None:
            try:
                horizons = _parse_ints(args.T)
            except ValueError:
                errs.append(f"--T: cannot parse {args.T!r}")
        if errs:
            raise ConfigError(errs)
        cfg = cfg.with_overrides(seeds, horizons)
        cfg.output_dir = args.out
        for path in fn(cfg, args.out):
            print(path)
    except OhcoError as exc:
        for line in getattr(exc, "errors", None) or [str(exc)]:
            print(f"ohco: {type(exc).__name__}: {line}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"ohco: {exc}", file=sys.stderr)
        return OutputError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
