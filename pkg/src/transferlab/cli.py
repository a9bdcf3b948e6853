"""Config-driven experiment runner.

Usage::

    transferlab <subcommand> --config <path> [--out <dir>] [--seed <u64>] [overrides]
    transferlab summary <manifest>

Exit status is 0 on success, 2 when a run hits an assumption violation (a
parameter outside the range where the estimates apply) and 1 on any other
error, including malformed configuration.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass, field, fields
from datetime import datetime, timezone
from fractions import Fraction
from typing import Any

import numpy as np

from . import __version__
from .branch_maps import DivergentSumError, InvalidSystemError, system_from_config, validate_system
from .dolgopyat._io import SCHEMA_VERSION, atomic_write, csv_text, file_stem, json_text, jsonable
from .dolgopyat.calculus import ETA_MIN
from .dolgopyat.context import OutOfScopeError
from .function_space import build_grid, default_grid_size
from .spectral import leading_eigendata, subdominant_gap
from .transfer_operator import truncation_policy

SUBCOMMANDS = ("validate", "spectrum", "uni", "decay", "l2", "resolvent", "federer", "correlate")
RANDOMIZED = ("decay", "resolvent", "correlate")
EXIT_OK, EXIT_ERROR, EXIT_ASSUMPTION = 0, 1, 2
U64 = 2**64


class ConfigError(ValueError):
    """Malformed configuration; ``problems`` lists one diagnostic per field."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------- config


@dataclass(frozen=True)
class ExperimentConfig:
    system: Any = "gauss"
    N: int | None = None
    M: int | None = None
    tolerance: float = 1e-8
    sigma: tuple = (0.0,)
    t: tuple = (50.0,)
    n: tuple = (10,)
    n_max: int = 40
    m_max: int = 8
    eta: float = 0.9
    delta: float | None = None
    Delta: float | None = None
    alpha: float = 0.9
    sample_count: int = 32
    seed: int | None = None
    candidates: str = "default"
    observable: str = "exp"
    cone: bool = False
    times: tuple = tuple(0.5 * k for k in range(17))
    out: str = "runs"

    def to_dict(self) -> dict:
        d = {}
        for f in fields(self):
            v = getattr(self, f.name)
            d[f.name] = list(v) if isinstance(v, tuple) else v
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def digest(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


_FIELD_NAMES = tuple(f.name for f in fields(ExperimentConfig))


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return (isinstance(v, (int, float)) and not isinstance(v, bool)) and math.isfinite(v)


def _check(d: dict) -> list[str]:
    p = []

    def need(name, ok, what):
        if name in d and not ok(d[name]):
            p.append(f"field '{name}': expected {what}, got {d[name]!r}")

    sysv = d.get("system")
    if "system" in d and not isinstance(sysv, (str, dict)):
        p.append(f"field 'system': expected a builtin name or a definition object, got {sysv!r}")
    need("N", lambda v: v is None or (_is_int(v) and v >= 8), "null or an integer >= 8")
    need("M", lambda v: v is None or (_is_int(v) and v >= 1), "null or a positive integer")
    need("tolerance", lambda v: _is_num(v) and 0 < v < 1, "a number in (0, 1)")
    need("sigma", lambda v: isinstance(v, list) and v and all(_is_num(x) for x in v), "a nonempty list of numbers")
    need("t", lambda v: isinstance(v, list) and v and all(_is_num(x) for x in v), "a nonempty list of numbers")
    need("n", lambda v: isinstance(v, list) and v and all(_is_int(x) and x >= 1 for x in v), "a nonempty list of integers >= 1")
    need("n_max", lambda v: _is_int(v) and 0 <= v <= 500, "an integer in [0, 500]")
    need("m_max", lambda v: _is_int(v) and 0 <= v <= 200, "an integer in [0, 200]")
    need("eta", lambda v: _is_num(v) and ETA_MIN <= v < 1, f"a number in [{ETA_MIN:.6f}, 1)")
    need("delta", lambda v: v is None or (_is_num(v) and v > 0), "null or a positive number")
    need("Delta", lambda v: v is None or (_is_num(v) and v > 0), "null or a positive number")
    need("alpha", lambda v: _is_num(v) and 0 < v < 1, "a number in (0, 1)")
    need("sample_count", lambda v: _is_int(v) and 1 <= v <= 10**8, "an integer in [1, 1e8]")
    need("seed", lambda v: v is None or (_is_int(v) and 0 <= v < U64), "null or an unsigned 64-bit integer")
    need("candidates", lambda v: v in ("default", "broad"), "'default' or 'broad'")
    need("observable", lambda v: v in ("exp", "one"), "'exp' or 'one'")
    need("cone", lambda v: isinstance(v, bool), "true or false")
    need("times", lambda v: isinstance(v, list) and v and all(_is_num(x) and x >= 0 for x in v), "a nonempty list of nonnegative numbers")
    need("out", lambda v: isinstance(v, str) and v != "", "a nonempty path string")
    return p


def config_from_dict(d: dict) -> ExperimentConfig:
    if not isinstance(d, dict):
        raise ConfigError([f"top level: expected a JSON object, got {type(d).__name__}"])
    problems = [f"field '{k}': unknown key" for k in d if k not in _FIELD_NAMES]
    problems += _check(d)
    if problems:
        raise ConfigError(problems)
    kw = {}
    for k, v in d.items():
        if k in ("sigma", "t", "times"):
            v = tuple(float(x) for x in v)
        elif k == "n":
            v = tuple(v)
        elif k in ("tolerance", "eta", "alpha") or (k in ("delta", "Delta") and v is not None):
            v = float(v)
        kw[k] = v
    return ExperimentConfig(**kw)


def parse_config(text: str) -> ExperimentConfig:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"line {exc.lineno} column {exc.colno}: {exc.msg}"]) from None
    return config_from_dict(d)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError([f"cannot read config {path}: {exc.strerror}"]) from None
    return parse_config(text)


def _coerce(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _override_value(name: str, text: str):
    if name in ("sigma", "t", "n", "times"):
        if text.strip().startswith("["):
            return _coerce(text)
        return [_coerce(x) for x in text.split(",") if x.strip()]
    if name in ("system", "candidates", "observable", "out"):
        return _coerce(text) if text.strip().startswith("{") else text
    return _coerce(text)


def apply_overrides(cfg: ExperimentConfig, overrides: dict) -> ExperimentConfig:
    d = cfg.to_dict()
    for k, v in overrides.items():
        d[k] = _override_value(k, v) if isinstance(v, str) else v
    return config_from_dict(d)


# ---------------------------------------------------------------- runs


@dataclass
class Experiment:
    name: str
    params: dict
    metrics: dict
    outputs: dict
    status: str

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "params": self.params,
            "metrics": self.metrics,
            "outputs": self.outputs,
            "status": self.status,
        }


@dataclass
class Run:
    cfg: ExperimentConfig
    out: str
    experiments: list = field(default_factory=list)

    def path(self, name: str) -> str:
        # stems are sanitised, so joined paths stay inside the output directory
        p = os.path.join(self.out, name)
        if os.path.dirname(os.path.abspath(p)) != os.path.abspath(self.out):
            raise ValueError(f"refusing to write outside {self.out}: {name}")
        return p

    def save_report(self, report, name, params, metrics, ok) -> None:
        stem = report.stem()
        report.to_csv(self.path(stem + ".csv"))
        report.to_json(self.path(stem + ".json"))
        self.add(name, params, metrics, {"json": stem + ".json", "csv": stem + ".csv"}, ok)

    def save_payload(self, stem, payload, header, rows, name, params, metrics, ok) -> None:
        atomic_write(self.path(stem + ".csv"), csv_text(header, rows))
        body = {"schema_version": SCHEMA_VERSION, "kind": name}
        body.update(payload)
        atomic_write(self.path(stem + ".json"), json_text(body))
        self.add(name, params, metrics, {"json": stem + ".json", "csv": stem + ".csv"}, ok)

    def add(self, name, params, metrics, outputs, ok) -> None:
        self.experiments.append(
            Experiment(name, jsonable(params), jsonable(metrics), outputs, "pass" if ok else "fail")
        )


def _system(cfg):
    return system_from_config(cfg.system)


def _grid_for(cfg, t=None):
    if cfg.N is not None:
        return build_grid(cfg.N)
    return build_grid(64 if t is None else default_grid_size(t))


def _spec(system, cfg, sigma, grid):
    trunc = truncation_policy(system, sigma, grid, tolerance=cfg.tolerance, M=cfg.M)
    return leading_eigendata(system, sigma, grid, trunc)


def run_validate(run: Run) -> int:
    system = _system(run.cfg)
    rep = validate_system(system)
    d = rep.to_dict()
    rows = [[k, v] for k, v in sorted(rep.checks.items())]
    stem = file_stem("validate", system.name)
    run.save_payload(stem, d, ("check", "passed"), rows, "validate", {"system": system.name},
                     {"ok": rep.ok, "rho_hat": rep.rho_hat, "Kbar_hat": rep.Kbar_hat}, rep.ok)
    return EXIT_OK if rep.ok else EXIT_ASSUMPTION


def run_spectrum(run: Run) -> int:
    cfg = run.cfg
    system = _system(cfg)
    grid = _grid_for(cfg)
    for sigma in cfg.sigma:
        trunc = truncation_policy(system, sigma, grid, tolerance=cfg.tolerance, M=cfg.M)
        spec = leading_eigendata(system, sigma, grid, trunc)
        gap = subdominant_gap(system, sigma, grid, trunc, spec=spec)
        spec = spec.with_gap(gap)
        d = spec.to_dict()
        rows = zip(grid.nodes, np.real(spec.eigenfunction.values), spec.mu.weights)
        stem = file_stem("spectrum", system.name, sigma, n=grid.N)
        ok = bool(spec.lam > 0 and math.isfinite(spec.lam))
        run.save_payload(stem, d, ("x", "eigenfunction", "mu"), rows, "spectrum",
                         {"system": system.name, "sigma": sigma, "N": grid.N},
                         {"lambda": spec.lam, "gap": spec.gap}, ok)
    return EXIT_OK


def run_uni(run: Run) -> int:
    from .dolgopyat.uni import uni_certificate

    cfg = run.cfg
    system = _system(cfg)
    for n in cfg.n:
        cert = uni_certificate(system, n, None if cfg.candidates == "default" else cfg.candidates)
        run.save_report(cert, "uni", {"system": system.name, "n": n, "candidates": cfg.candidates},
                        {"D": cert.D, "sup_psi": cert.sup_psi}, cert.certified and cert.sup_within_bound)
    return EXIT_OK


def run_decay(run: Run) -> int:
    from .dolgopyat.decay import norm_decay, threshold_certificate, uniform_refit

    cfg = run.cfg
    system = _system(cfg)
    cert = threshold_certificate(system)
    for sigma in cfg.sigma:
        per_sigma = []
        for t in cfg.t:
            grid = _grid_for(cfg, t)
            spec = _spec(system, cfg, sigma, grid)
            rep = norm_decay(system, sigma, t, range(cfg.n_max + 1), cfg.sample_count, cfg.seed,
                             grid=grid, spec=spec, cert=cert)
            per_sigma.append(rep)
        uni_fits = uniform_refit(per_sigma)
        for rep in per_sigma:
            uf = uni_fits[rep.t]
            ok = rep.gamma < 1.0 and rep.fit.A is not None and rep.consistent
            run.save_report(rep, "decay", {"system": system.name, "sigma": rep.sigma, "t": rep.t, "N": rep.N},
                            {"gamma": rep.gamma, "A": rep.A, "residual": rep.fit.residual,
                             "uniform_A": uf.A, "uniform_gamma": uf.gamma, "uniform_start": uf.n_start}, ok)
    return EXIT_OK


def run_l2(run: Run) -> int:
    from .dolgopyat.contraction import l2_contraction

    cfg = run.cfg
    system = _system(cfg)
    for sigma in cfg.sigma:
        for t in cfg.t:
            grid = _grid_for(cfg, t)
            spec = _spec(system, cfg, sigma, grid)
            spec0 = spec if sigma == 0.0 else _spec(system, cfg, 0.0, grid)
            if cfg.observable == "exp":
                f = lambda x, t=t: np.exp(1j * t * x)  # noqa: E731
            else:
                f = lambda x: np.ones_like(x, dtype=complex)  # noqa: E731
            for n in cfg.n:
                rep = l2_contraction(system, sigma, t, n, cfg.m_max, f, grid, spec, spec0, cone=cfg.cone,
                                     eta=cfg.eta, delta=cfg.delta, Delta=cfg.Delta)
                ok = rep.contracting and (not cfg.cone or (rep.cone_monotone and not rep.cone_failures))
                run.save_report(rep, "l2", {"system": system.name, "sigma": sigma, "t": t, "n": n, "N": grid.N},
                                {"beta": rep.beta}, ok)
    return EXIT_OK


def run_resolvent(run: Run) -> int:
    from .dolgopyat.decay import resolvent_bound

    cfg = run.cfg
    system = _system(cfg)
    rule = (lambda t: cfg.N) if cfg.N is not None else default_grid_size
    for sigma in cfg.sigma:
        rep = resolvent_bound(system, sigma, cfg.t, cfg.alpha, cfg.sample_count, cfg.seed, grid_rule=rule)
        run.save_report(rep, "resolvent", {"system": system.name, "sigma": sigma, "t": list(cfg.t), "alpha": cfg.alpha},
                        {"exponent": rep.exponent}, rep.passed)
    return EXIT_OK


def run_federer(run: Run) -> int:
    from .dolgopyat.federer import federer_crosscheck, federer_table

    cfg = run.cfg
    for sigma in cfg.sigma:
        table = federer_table(Fraction(sigma).limit_denominator(10**12), max(cfg.n_max, 3))
        checks = federer_crosscheck(table, n_max=min(8, len(table.rows)), grid=_grid_for(cfg))
        err = max(max(c.left_error, c.right_error) for c in checks)
        exact = all(r.log2_ratio == table.sigma * (r.n - 2) for r in table.rows)
        run.save_report(table, "federer", {"system": "doubling", "sigma": str(table.sigma), "n_max": len(table.rows)},
                        {"max_abs_log2_ratio": str(table.max_abs_log2_ratio), "grid_error": err},
                        exact and err <= 1e-8)
    return EXIT_OK


def run_correlate(run: Run) -> int:
    from .dolgopyat.semiflow import bump_observable, semiflow_correlation

    cfg = run.cfg
    system = _system(cfg)
    F = bump_observable()
    spec = _spec(system, cfg, 0.0, _grid_for(cfg))
    rep = semiflow_correlation(system, F, F, cfg.times, cfg.sample_count, cfg.seed, spec=spec)
    run.save_report(rep, "correlate", {"system": system.name, "sample_count": cfg.sample_count},
                    {"rate": rep.rate, "rate_ci95": list(rep.rate_ci)}, rep.rate_positive)
    return EXIT_OK


RUNNERS = {
    "validate": run_validate,
    "spectrum": run_spectrum,
    "uni": run_uni,
    "decay": run_decay,
    "l2": run_l2,
    "resolvent": run_resolvent,
    "federer": run_federer,
    "correlate": run_correlate,
}


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_manifest(run: Run, subcommand: str, started: str, status: str, message: str = "") -> str:
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "subcommand": subcommand,
        "config_hash": run.cfg.digest(),
        "config": run.cfg.to_dict(),
        "code_version": __version__,
        "started": started,
        "finished": _now(),
        "status": status,
        "message": message,
        "experiments": [e.to_dict() for e in run.experiments],
    }
    path = os.path.join(run.out, "manifest.json")
    atomic_write(path, json_text(jsonable(manifest)))
    return path


def run(subcommand: str, cfg: ExperimentConfig, stream=None) -> int:
    """Execute one pipeline, persist its reports and the manifest, return the exit code."""
    err = sys.stderr if stream is None else stream
    if subcommand not in RUNNERS:
        print(f"error: unknown subcommand {subcommand!r}", file=err)
        return EXIT_ERROR
    if subcommand in RANDOMIZED and cfg.seed is None:
        print(f"error: field 'seed': required for '{subcommand}' (set it in the config or pass --seed)", file=err)
        return EXIT_ERROR
    os.makedirs(cfg.out, exist_ok=True)
    r = Run(cfg, cfg.out)
    started = _now()
    try:
        code = RUNNERS[subcommand](r)
    except (OutOfScopeError, DivergentSumError) as exc:
        write_manifest(r, subcommand, started, "assumption_violation", str(exc))
        print(f"assumption violated: {exc}", file=err)
        return EXIT_ASSUMPTION
    except (InvalidSystemError, ValueError) as exc:
        write_manifest(r, subcommand, started, "error", str(exc))
        print(f"error: {exc}", file=err)
        return EXIT_ERROR
    status = "ok" if code == EXIT_OK else "assumption_violation"
    write_manifest(r, subcommand, started, status)
    return code


# ---------------------------------------------------------------- summary


def _headline(kind: str, payload: dict) -> str:
    if kind == "spectrum":
        gap = payload.get("gap")
        g = "nan" if gap is None else f"{gap:.6f}"
        return f"lambda={payload['lambda']:.9f} gap={g}"
    if kind == "uni":
        return f"D={payload['D']!r} sup_psi={payload['sup_psi']!r}"
    if kind == "decay":
        return f"gamma={payload['gamma']:.6f} A={payload['A']}"
    if kind == "l2":
        return f"beta={payload['beta']:.6g}"
    if kind == "resolvent":
        return f"exponent={payload['exponent']:.6f}"
    if kind == "federer":
        rows = payload["rows"]
        return f"max|log2 ratio|={max(abs(Fraction(r['log2_ratio'])) for r in rows)}"
    if kind == "correlate":
        return f"rate={payload['rate']}"
    if kind == "validate":
        return f"ok={payload['ok']}"
    return ""


def report_summary(manifest_path, stream=None) -> int:
    """Print one line per experiment recorded in a manifest."""
    out = sys.stdout if stream is None else stream
    try:
        with open(manifest_path) as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read manifest {manifest_path}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    base = os.path.dirname(os.path.abspath(manifest_path))
    exps = manifest.get("experiments", [])
    lines = []
    for e in exps:
        outputs = e.get("outputs", {})
        for rel in outputs.values():
            if not os.path.isfile(os.path.join(base, rel)):
                print(f"error: missing output {rel} referenced by {manifest_path}", file=sys.stderr)
                return EXIT_ERROR
        payload = {}
        if "json" in outputs:
            with open(os.path.join(base, outputs["json"])) as fh:
                payload = json.load(fh)
        params = " ".join(f"{k}={v}" for k, v in e.get("params", {}).items())
        lines.append(f"{e['name']:<10} {params} {_headline(e['name'], payload)} [{e['status']}]")
    count = len(exps)
    print(f"{count} experiment{'s' if count != 1 else ''}", file=out)
    for line in lines:
        print(line, file=out)
    return EXIT_OK


# ---------------------------------------------------------------- argv


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="transferlab", description="Run transfer-operator experiments from a JSON config.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="subcommand", parser_class=_Parser)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True)
        sp.add_argument("--out")
        sp.add_argument("--seed")
        for fname in _FIELD_NAMES:
            if fname in ("out", "seed"):
                continue
            sp.add_argument("--" + fname.replace("_", "-"), dest="ov_" + fname, metavar="VALUE")
    sm = sub.add_parser("summary")
    sm.add_argument("manifest", nargs="?")
    sm.add_argument("--manifest", dest="manifest_opt")
    return p


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if args.subcommand is None:
        print("error: a subcommand is required", file=sys.stderr)
        return EXIT_ERROR
    if args.subcommand == "summary":
        path = args.manifest or args.manifest_opt
        if path is None:
            print("error: summary needs a manifest path", file=sys.stderr)
            return EXIT_ERROR
        return report_summary(path)
    overrides = {k[3:]: v for k, v in vars(args).items() if k.startswith("ov_") and v is not None}
    if args.out is not None:
        overrides["out"] = args.out
    if args.seed is not None:
        overrides["seed"] = args.seed
    try:
        cfg = apply_overrides(load_config(args.config), overrides)
    except ConfigError as exc:
        print(f"config error in {args.config}:", file=sys.stderr)
        for line in exc.problems:
            print(f"  {line}", file=sys.stderr)
        return EXIT_ERROR
    return run(args.subcommand, cfg)


if __name__ == "__main__":
    sys.exit(main())
