"""pulsefront command line.

Every subcommand reads an INI config with sections [medium], [grid], [sim]
and [analysis] and writes into an output directory.  Each run directory holds
the fully resolved config (``resolved_config.txt``), a ``manifest.json`` and
the data files below.  Column order in the CSV files is fixed:

    spectrum.csv   lambda, k, speed
    roots.csv      c, index, lambda, kind
    positions.csv  t, x_front
    profile.csv    s, xi, phi, phi_s
    logslope.csv   s, lambda
    envelope.csv   t, width, residual, tau_hat   (residual, tau_hat blank at t = 0)
    summary.csv    run, key, value               (written by ``report``)

An optional [sweep] section maps ``section.key`` to a comma separated list of
values; the cartesian product runs into ``sweep_000``, ``sweep_001``, ... and
``--jobs`` (or PULSEFRONT_JOBS) sets the number of worker processes.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import datetime as dt
import hashlib
import itertools
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import classify, fit_tail, log_slope, verify_pushed_asymptotics
from .envelopes import (
    build_lower_ladder,
    build_stability_envelope,
    build_upper_ladder,
    check_envelope,
    check_ladder,
    check_sandwich,
    align_profiles,
    spectral_data,
)
from .errors import (
    ConfigError,
    InputError,
    NoPlateau,
    NoShiftConvergence,
    NumericalError,
    SandwichBreach,
    SignViolation,
    TailUnderflow,
    VerificationError,
    VerificationFailed,
)
from .frontsim import InitialDatum, SimConfig, relax_to_front
from .medium import FAMILIES, MediumSpec, holder_constants, make_medium
from .spectral import compute_c0, dispersion_roots, k_of_lambda, kernel_residual, stability_exponents

SUBCOMMANDS = ("spectrum", "roots", "simulate", "decay", "stability", "certify", "report")

CSV_COLUMNS = {
    "spectrum.csv": ("lambda", "k", "speed"),
    "roots.csv": ("c", "index", "lambda", "kind"),
    "positions.csv": ("t", "x_front"),
    "profile.csv": ("s", "xi", "phi", "phi_s"),
    "logslope.csv": ("s", "lambda"),
    "envelope.csv": ("t", "width", "residual", "tau_hat"),
    "summary.csv": ("run", "key", "value"),
}

# (type, default); an empty default means "not set"
SCHEMA = {
    "medium": {
        "family": (str, "kpp_logistic"),
        "L": (float, "1"),
        "resolution": (int, "64"),
        "interp": (str, "trig"),
        "q": (float, "0"),
        "a_mean": (float, "1"),
        "a_amp": (float, "0"),
        "a_hr": (float, ""),
        "a0": (float, ""),
        "a1": (float, ""),
    },
    "grid": {
        "n_cell": (int, "64"),
        "h": (float, "1/64"),
        "lambda_hi": (float, "4"),
        "n_lambda": (int, "64"),
    },
    "sim": {
        "width": (float, "60"),
        "T": (float, "100"),
        "dt": (float, ""),
        "scheme": (str, "imex"),
        "datum": (str, "heaviside"),
        "x0": (float, "0"),
        "rate": (float, "1"),
        "transient": (float, "0.3"),
        "periods": (int, "2"),
        "level": (float, "0.5"),
        "drift_tol": (float, "1e-4"),
        "periodicity_tol": (float, "1e-4"),
    },
    "analysis": {
        "c": (float, ""),
        "c_star": (float, ""),
        "threshold": (float, "0.005"),
        "tol": (float, "0.02"),
        "n_max": (int, "5"),
        "check_h": (float, "1/512"),
        "span": (float, "8"),
        "alpha": (float, "1"),
        "gamma": (float, ""),
        "datum_rate": (float, "1"),
        "shift_tol": (float, "0.02"),
        "sandwich_tol": (float, "1e-8"),
    },
}

_FAMILY_KEYS = {
    "kpp_logistic": (),
    "hadeler_rothe": ("a_hr",),
    "periodic_hadeler_rothe": ("a0", "a1"),
}


class UsageError(InputError):
    pass


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------


def _line_of(text: str, section: str, key: str | None = None) -> int | None:
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if key is None and current == section:
                return lineno
        elif current == section and key is not None:
            name = line.split("=", 1)[0].split(":", 1)[0].strip()
            if name == key:
                return lineno
    return None


def _convert(kind, value: str):
    if kind is int:
        return int(value)
    if kind is float:
        return float(Fraction(value)) if "/" in value else float(value)
    return value


@dataclasses.dataclass
class RunConfig:
    values: dict
    sweep: dict
    source: str = ""

    def get(self, section: str, key: str):
        raw = self.values[section][key]
        if raw == "":
            return None
        return _convert(SCHEMA[section][key][0], raw)

    def text(self) -> str:
        out = []
        for section in SCHEMA:
            out.append(f"[{section}]")
            out.extend(f"{key} = {self.values[section][key]}" for key in SCHEMA[section])
            out.append("")
        if self.sweep:
            out.append("[sweep]")
            out.extend(f"{key} = {', '.join(vals)}" for key, vals in self.sweep.items())
            out.append("")
        return "\n".join(out)

    def digest(self) -> str:
        return hashlib.sha256(self.text().encode()).hexdigest()

    def override(self, assignments: dict) -> "RunConfig":
        values = {s: dict(v) for s, v in self.values.items()}
        for dotted, value in assignments.items():
            section, key = dotted.split(".", 1)
            values[section][key] = value
        return RunConfig(values=values, sweep={}, source=self.source)


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.MissingSectionHeaderError as err:
        raise ConfigError("missing section header", line=err.lineno) from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as err:
        raise ConfigError(str(err).split(":")[-1].strip(), line=err.lineno) from None
    except configparser.ParsingError as err:
        lineno = err.errors[0][0] if err.errors else None
        raise ConfigError("malformed line", line=lineno) from None

    values = {section: {key: default for key, (_, default) in keys.items()} for section, keys in SCHEMA.items()}
    sweep = {}
    for section in parser.sections():
        if section == "sweep":
            for key, raw in parser[section].items():
                sec, _, name = key.partition(".")
                if sec not in SCHEMA or name not in SCHEMA[sec]:
                    raise ConfigError(f"unknown sweep target {key!r}", field=key, line=_line_of(text, section, key))
                entries = [v.strip() for v in raw.split(",") if v.strip()]
                if not entries:
                    raise ConfigError("empty sweep list", field=key, line=_line_of(text, section, key))
                sweep[key] = entries
            continue
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]", field=section, line=_line_of(text, section))
        for key, raw in parser[section].items():
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r}", field=f"{section}.{key}", line=_line_of(text, section, key))
            values[section][key] = raw.strip()

    cfg = RunConfig(values=values, sweep=sweep, source=source)
    for entry in [{}] + [{k: v} for k, vs in sweep.items() for v in vs]:
        _validate(cfg.override(entry), text)
    return cfg


def _validate(cfg: RunConfig, text: str) -> None:
    for section, keys in SCHEMA.items():
        for key in keys:
            try:
                cfg.get(section, key)
            except (ValueError, ZeroDivisionError):
                raise ConfigError(
                    f"cannot read {cfg.values[section][key]!r} as {keys[key][0].__name__}",
                    field=f"{section}.{key}",
                    line=_line_of(text, section, key),
                ) from None
    family = cfg.get("medium", "family")
    if family not in _FAMILY_KEYS:
        hint = " (custom media are Python-only)" if family in FAMILIES else ""
        raise ConfigError(f"unknown family {family!r}{hint}", field="medium.family", line=_line_of(text, "medium", "family"))
    for key in ("a_hr", "a0", "a1"):
        given = cfg.get("medium", key) is not None
        if given != (key in _FAMILY_KEYS[family]):
            what = "requires" if not given else "does not take"
            raise ConfigError(f"{family} {what} {key}", field=f"medium.{key}", line=_line_of(text, "medium", key) or _line_of(text, "medium"))
    if cfg.get("sim", "datum") not in ("heaviside", "exponential"):
        raise ConfigError("datum must be heaviside or exponential", field="sim.datum", line=_line_of(text, "sim", "datum"))


def load_config(path: str | None) -> RunConfig:
    if path is None:
        return parse_config("", source="<defaults>")
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config: {err.strerror}", field=str(path)) from None
    return parse_config(text, source=str(path))


def build_medium(cfg: RunConfig):
    family = cfg.get("medium", "family")
    params = {k: cfg.get("medium", k) for k in ("q", "a_mean", "a_amp") + _FAMILY_KEYS[family]}
    spec = MediumSpec(
        family=family,
        params=params,
        L=cfg.get("medium", "L"),
        resolution=cfg.get("medium", "resolution"),
        interp=cfg.get("medium", "interp"),
    )
    return make_medium(spec)


def sim_config(cfg: RunConfig) -> SimConfig:
    g = lambda k: cfg.get("sim", k)
    return SimConfig(
        h=cfg.get("grid", "h"),
        width=g("width"),
        T=g("T"),
        dt=g("dt"),
        scheme=g("scheme"),
        level=g("level"),
        transient=g("transient"),
        periods=g("periods"),
        drift_tol=g("drift_tol"),
        periodicity_tol=g("periodicity_tol"),
    )


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def _plain(obj):
    """JSON-ready copy: arrays to lists, non-finite floats to None."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


class RunDir:
    def __init__(self, path: Path, cfg: RunConfig | None, subcommand: str):
        self.path = Path(path)
        self.cfg = cfg
        self.subcommand = subcommand
        self.started = _now()
        self.outputs: list[str] = []
        self.inputs: list[str] = []
        try:
            self.path.mkdir(parents=True, exist_ok=True)
        except OSError as err:
            raise UsageError(f"cannot create output directory {path}: {err.strerror}") from None
        if cfg is not None:
            self.write_text("resolved_config.txt", cfg.text())

    def write_text(self, name: str, text: str) -> None:
        (self.path / name).write_text(text)
        if name not in self.outputs:
            self.outputs.append(name)

    def write_json(self, name: str, payload: dict) -> None:
        self.write_text(name, json.dumps(_plain(payload), indent=2, sort_keys=True) + "\n")

    def write_csv(self, name: str, rows) -> None:
        target = self.path / name
        with target.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS[name])
            for row in rows:
                writer.writerow([_cell(v) for v in row])
        if name not in self.outputs:
            self.outputs.append(name)

    def finish(self, status: str) -> None:
        inventory = []
        for name in sorted(self.outputs):
            data = (self.path / name).read_bytes()
            inventory.append({"name": name, "sha256": hashlib.sha256(data).hexdigest(), "bytes": len(data)})
        manifest = {
            "subcommand": self.subcommand,
            "tool_version": __version__,
            "config_hash": self.cfg.digest() if self.cfg is not None else None,
            "config_source": self.cfg.source if self.cfg is not None else None,
            "status": status,
            "started": self.started,
            "finished": _now(),
            "inputs": self.inputs,
            "outputs": inventory,
        }
        (self.path / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _now() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")


# ---------------------------------------------------------------------------
# workflows
# ---------------------------------------------------------------------------


def _datum(cfg: RunConfig, kind: str | None = None, rate: float | None = None) -> InitialDatum:
    return InitialDatum(
        kind=kind or cfg.get("sim", "datum"),
        x0=cfg.get("sim", "x0"),
        rate=rate if rate is not None else cfg.get("sim", "rate"),
    )


def _profile_rows(profile):
    xi = profile.xi
    for i, s in enumerate(profile.s_grid):
        for j, x in enumerate(xi):
            yield s, x, profile.phi[i, j], profile.phi_s[i, j]


def _simulate(run: RunDir, medium, cfg: RunConfig):
    profile, est = relax_to_front(medium, _datum(cfg), sim_config(cfg))
    run.write_csv("positions.csv", est.samples.tolist())
    run.write_csv("profile.csv", _profile_rows(profile))
    run.write_json(
        "simulation.json",
        {
            "c_hat": est.c_hat,
            "stderr": est.stderr,
            "fit_window": est.window,
            "drift": est.drift,
            "extrema": est.extrema,
            "periodicity_defect": profile.periodicity_defect,
            "s_half": profile.s_half,
            "h": profile.h,
            "columns": profile.m,
            "rows": profile.s_grid.size,
        },
    )
    return profile, est


def cmd_spectrum(run: RunDir, cfg: RunConfig, args) -> None:
    medium = build_medium(cfg)
    n = cfg.get("grid", "n_cell")
    hi, count = cfg.get("grid", "lambda_hi"), cfg.get("grid", "n_lambda")
    rows = []
    for lam in np.linspace(hi / count, hi, count):
        k = k_of_lambda(medium, n, lam).k
        rows.append((float(lam), k, -k / lam))
    run.write_csv("spectrum.csv", rows)
    speed = compute_c0(medium, n)
    exps = stability_exponents(medium, n)
    run.write_json(
        "speed.json",
        {
            "c0": speed.c0,
            "lambda_at_c0": speed.lambda_at_c0,
            "mu0": exps.mu0,
            "mu1": exps.mu1,
            "concavity_certificate": speed.concavity_certificate,
        },
    )


def cmd_roots(run: RunDir, cfg: RunConfig, args) -> None:
    medium = build_medium(cfg)
    c = args.c if args.c is not None else cfg.get("analysis", "c")
    if c is None:
        raise ConfigError("roots needs a speed: pass --c or set it in [analysis]", field="analysis.c")
    rs = dispersion_roots(medium, cfg.get("grid", "n_cell"), c)
    if rs.tangent:
        kinds = ["tangent"]
    else:
        kinds = ["smaller", "larger"][: len(rs.roots)]
    run.write_csv("roots.csv", [(c, i, lam, kind) for i, (lam, kind) in enumerate(zip(rs.roots, kinds))])


def cmd_simulate(run: RunDir, cfg: RunConfig, args) -> None:
    _simulate(run, build_medium(cfg), cfg)


def cmd_decay(run: RunDir, cfg: RunConfig, args) -> None:
    medium = build_medium(cfg)
    n = cfg.get("grid", "n_cell")
    profile, est = _simulate(run, medium, cfg)
    speed = compute_c0(medium, n)
    rootset = dispersion_roots(medium, n, est.c_hat)
    lams = rootset.roots or (speed.lambda_at_c0,)
    candidates = [k_of_lambda(medium, n, lam) for lam in lams]
    notes = []
    fit = None
    try:
        fit = fit_tail(profile, candidates)
    except (NoPlateau, TailUnderflow) as err:
        notes.append(f"no tail fit: {err}")
    verdict = classify(est.c_hat, speed.c0, fit, rootset, cfg.get("analysis", "threshold"))
    try:
        s_mid, slope = log_slope(profile)
        run.write_csv("logslope.csv", zip(s_mid.tolist(), slope.tolist()))
    except TailUnderflow as err:
        run.write_csv("logslope.csv", [])
        notes.append(f"log slope: {err}")

    r = 0.5 * (lams[0] + lams[-1]) if len(lams) == 2 else 0.5 * lams[0]
    kr = kernel_residual(profile, medium, r)
    payload = {
        "verdict": verdict.verdict,
        "c_hat": est.c_hat,
        "c0": speed.c0,
        "margin": verdict.margin,
        "decay_matches": verdict.decay_matches,
        "roots": list(rootset.roots),
        "fit": fit,
        "kernel_residual": kr,
        "notes": list(verdict.notes) + notes,
    }
    failure = None
    if verdict.verdict == "pushed":
        try:
            payload["asymptotics"] = verify_pushed_asymptotics(profile, fit, candidates[0], candidates[-1], cfg.get("analysis", "tol"))
        except VerificationFailed as err:
            payload["asymptotics"] = err.report
            failure = err
    run.write_json("decay.json", payload)
    if failure is not None:
        raise failure


def cmd_certify(run: RunDir, cfg: RunConfig, args) -> None:
    medium = build_medium(cfg)
    n = cfg.get("grid", "n_cell")
    c_star = cfg.get("analysis", "c_star")
    profile = None
    if c_star is None:
        profile, est = _simulate(run, medium, cfg)
        c_star = est.c_hat
    spectra = spectral_data(medium, n, c_star)
    holder = holder_constants(medium, gamma=cfg.get("analysis", "gamma"), alpha=cfg.get("analysis", "alpha"))
    n_max = cfg.get("analysis", "n_max")
    upper = build_upper_ladder(spectra, holder, n_max=n_max)
    lower = build_lower_ladder(spectra, holder, n_max=n_max)
    h, span = cfg.get("analysis", "check_h"), cfg.get("analysis", "span")
    payload = {"c_star": c_star, "holder": holder, "ladders": {}, "certificates": {}}
    failure = None
    for ladder in (upper, lower):
        payload["ladders"][ladder.kind] = {
            "sigma0": ladder.sigma0,
            "sigma": ladder.sigma,
            "B_n": ladder.B_n,
            "theta": ladder.theta,
            "B_limit": ladder.B_limit,
            "r": ladder.r,
            "lambda_star": ladder.lam_star,
            "lambda_plus": ladder.lam_plus,
            "conditions": ladder.conditions,
        }
        try:
            cert = check_ladder(ladder, medium, h=h, span=span)
        except SignViolation as err:
            cert, failure = err.report, failure or err
        if cert is not None:
            payload["certificates"][ladder.kind] = cert.as_dict()
    if profile is not None:
        try:
            payload["sandwich"] = check_sandwich(profile, upper, lower, span=span)
        except VerificationError as err:
            payload["sandwich"] = {"error": str(err)}
            failure = failure or err
    run.write_json("certificate.json", payload)
    if failure is not None:
        raise failure


def cmd_stability(run: RunDir, cfg: RunConfig, args) -> None:
    medium = build_medium(cfg)
    n = cfg.get("grid", "n_cell")
    ref, est = _simulate(run, medium, cfg)
    spectra = spectral_data(medium, n, est.c_hat)
    rate = cfg.get("analysis", "datum_rate")
    env = build_stability_envelope(ref, spectra, datum_rate=rate)
    T = cfg.get("sim", "T")
    times = [0.0] + [2.0**j for j in range(0, int(math.floor(math.log2(T))) + 1)]
    prof, est2 = relax_to_front(medium, _datum(cfg, "exponential", rate), sim_config(cfg), record_times=times)
    tol = cfg.get("analysis", "sandwich_tol")
    env_rep, shift = check_envelope(env, est2.trajectory, tol=tol, shift_tol=cfg.get("analysis", "shift_tol"), strict=False)

    history = {round(t, 9): (res, tau) for t, tau, res in shift.residual_history}
    rows = []
    for t, width in env_rep.width:
        res, tau = history.get(round(t, 9), (None, None))
        rows.append((t, width, res, tau))
    run.write_csv("envelope.csv", rows)
    sigma_hat, distance = align_profiles(ref, prof)
    run.write_json(
        "stability.json",
        {
            "envelope": {
                k: getattr(env, k)
                for k in ("lam", "eta", "rho_amp", "omega", "s_star", "s0", "s1", "s2", "k_floor", "M", "gamma", "mu1", "frame_shift", "lambda_interval")
            },
            "sigma0": env_rep.sigma0,
            "min_lower_gap": env_rep.min_lower_gap,
            "min_upper_gap": env_rep.min_upper_gap,
            "ordered": env_rep.ordered,
            "tau_hat": shift.tau_hat,
            "converged": shift.converged,
            "dyadic": shift.dyadic,
            "c_hat": [est.c_hat, est2.c_hat],
            "alignment": {"sigma_hat": sigma_hat, "distance": distance},
        },
    )
    worst = min(env_rep.min_lower_gap, env_rep.min_upper_gap)
    if worst < -tol:
        raise SandwichBreach(f"envelope breached by {-worst:.3e}", t=float("nan"), x=float("nan"))
    if not shift.converged:
        raise NoShiftConvergence("tau_hat did not settle between the last dyadic times", report=shift)


REPORT_JSON = ("speed.json", "simulation.json", "decay.json", "certificate.json", "stability.json")


def _flatten(prefix: str, obj, out: list) -> None:
    if isinstance(obj, dict):
        for k in sorted(obj):
            _flatten(f"{prefix}.{k}" if prefix else k, obj[k], out)
    elif isinstance(obj, (int, float, str, bool)) or obj is None:
        out.append((prefix, obj))


def cmd_report(run: RunDir, cfg, args) -> None:
    sources = [Path(p) for p in (args.sources or [run.path])]
    dirs = []
    for src in sources:
        dirs.extend(sorted(p.parent for p in src.glob("**/manifest.json") if p.parent != run.path or src == run.path))
    runs = {}
    for d in sorted(set(dirs)):
        manifest = json.loads((d / "manifest.json").read_text())
        if manifest.get("subcommand") == "report":
            continue
        entry = {"subcommand": manifest.get("subcommand"), "config_hash": manifest.get("config_hash")}
        for name in REPORT_JSON:
            if (d / name).exists():
                entry[name[:-5]] = json.loads((d / name).read_text())
                run.inputs.append(str(d / name))
        entry["csv"] = sorted(p.name for p in d.glob("*.csv") if p.name in CSV_COLUMNS)
        runs[str(d)] = entry
    if not runs:
        raise UsageError("report found no prior run directories (no manifest.json)")
    run.write_json("report.json", {"runs": runs})
    rows = []
    for name, entry in runs.items():
        flat = []
        _flatten("", {k: v for k, v in entry.items() if k != "csv"}, flat)
        rows.extend((name, k, v) for k, v in flat)
    run.write_csv("summary.csv", rows)


COMMANDS = {
    "spectrum": cmd_spectrum,
    "roots": cmd_roots,
    "simulate": cmd_simulate,
    "decay": cmd_decay,
    "stability": cmd_stability,
    "certify": cmd_certify,
    "report": cmd_report,
}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pulsefront", description="Pulsating fronts in periodic media.")
    parser.add_argument("--version", action="version", version=f"pulsefront {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("-o", "--out", default="run", help="output directory (default: ./run)")
        if name == "report":
            p.add_argument("sources", nargs="*", help="run directories to aggregate (default: the output directory)")
            continue
        p.add_argument("-c", "--config", help="INI config file; omitted keys take their defaults")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for [sweep] entries")
        if name == "roots":
            p.add_argument("--c", type=float, help="speed c (overrides [analysis] c)")
    return parser


def _run_one(subcommand: str, cfg: RunConfig | None, out: Path, args) -> tuple[int, str]:
    run = RunDir(out, cfg, subcommand)
    try:
        COMMANDS[subcommand](run, cfg, args)
    except InputError as err:
        run.finish("input error")
        return 1, f"{type(err).__name__}: {err}"
    except (VerificationError, NumericalError) as err:
        run.finish("verification failed" if isinstance(err, VerificationError) else "numerical failure")
        return 2, f"{type(err).__name__}: {err}"
    run.finish("ok")
    return 0, ""


def _sweep_worker(task):
    subcommand, cfg, out, args = task
    return _run_one(subcommand, cfg, out, args)


def run(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = None if args.subcommand == "report" else load_config(args.config)
    except InputError as err:
        print(f"pulsefront: {err}", file=sys.stderr)
        return 1
    out = Path(args.out)

    if cfg is None or not cfg.sweep:
        code, msg = _run_one(args.subcommand, cfg, out, args)
        if msg:
            print(f"pulsefront {args.subcommand}: {msg}", file=sys.stderr)
        return code

    jobs = int(os.environ.get("PULSEFRONT_JOBS", args.jobs))
    keys = list(cfg.sweep)
    tasks = []
    for i, combo in enumerate(itertools.product(*(cfg.sweep[k] for k in keys))):
        tasks.append((args.subcommand, cfg.override(dict(zip(keys, combo))), out / f"sweep_{i:03d}", args))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_worker, tasks))
    else:
        results = [_sweep_worker(t) for t in tasks]
    top = RunDir(out, cfg, args.subcommand)
    top.inputs = [str(t[2]) for t in tasks]
    top.write_json(
        "sweep.json",
        {"entries": [{"dir": t[2].name, "overrides": dict(zip(keys, combo)), "exit_code": code, "message": msg}
                     for t, combo, (code, msg) in zip(tasks, itertools.product(*(cfg.sweep[k] for k in keys)), results)]},
    )
    worst = max(code for code, _ in results)
    top.finish("ok" if worst == 0 else "failures")
    for t, (code, msg) in zip(tasks, results):
        if msg:
            print(f"pulsefront {args.subcommand} [{t[2].name}]: {msg}", file=sys.stderr)
    return worst


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
