"""Command-line front end.

Every subcommand reads one JSON run configuration; a few scalars can be
overridden by flags. Exit codes: 0 ok, 1 audit failure, 2 configuration
error, 3 resolution error, 4 optimizer non-convergence.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, fields
from dataclasses import field as dc_field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .convergence_lab import (
    artifact_stem,
    audit_bounds,
    check_eps_list,
    estimate_anisotropy,
    estimate_dzyalo,
    fit_rate,
    quadrature_noise,
    recovery_check,
    sweep,
    write_summary_json,
    write_sweep_csv,
)
from .errors import (
    ConfigError,
    ConvergenceFailure,
    FitDegenerateError,
    HypothesisViolation,
    InputError,
    ResolutionError,
)
from .grid import DiscreteField, build_field, domain_from_spec, load_field_text, save_field_text
from .kernels import AuditTolerances, KernelPair, audit_hypotheses, pair_from_spec
from .local_energy import bulk_dmi_energy, dirichlet_energy, dmi_energy, write_local_csv
from .nonlocal_energy import DEFAULT_FLOOR_FACTOR, total_energy, write_breakdowns_csv
from .relaxer import LocalSelector, NonlocalSelector, RelaxConfig, minimize, write_trace_csv

EXIT_OK = 0
EXIT_AUDIT = 1
EXIT_CONFIG = 2
EXIT_RESOLUTION = 3
EXIT_NONCONVERGED = 4

DEFAULT_EPS = (0.16, 0.08, 0.04)

PRESETS = {
    "helix": {"family": "helix", "k": 2.0 * math.pi},
    "linear": {"family": "linear", "A": np.eye(3).tolist()},
    "skyrmion": {"family": "skyrmion_bubble", "radius": 0.25, "chirality": 1, "sphere": True},
    "constant": {"family": "constant", "c": [0.0, 0.0, 1.0]},
}

AUDIT_TOLERANCE_KEYS = {f.name for f in fields(AuditTolerances)}
TOLERANCE_KEYS = AUDIT_TOLERANCE_KEYS | {"recovery", "delta_sq", "floor_factor", "max_variation", "max_growth"}
AUDIT_KEYS = {"deltas", "cones", "apertures"}
LIMIT_KEYS = {"A", "D"}
RELAX_KEYS = {"selector", "A", "D", "well", "well_axis", "eps", "max_iter", "initial_step",
              "factor", "armijo", "tol"}


@dataclass
class RunConfig:
    kernel: dict[str, Any] = dc_field(default_factory=dict)
    domain: dict[str, Any] = dc_field(default_factory=dict)
    field: dict[str, Any] = dc_field(default_factory=lambda: dict(PRESETS["helix"]))
    eps: list[float] | None = None
    audit: dict[str, Any] = dc_field(default_factory=dict)
    limits: dict[str, Any] = dc_field(default_factory=dict)
    relax: dict[str, Any] = dc_field(default_factory=dict)
    output_dir: str = "."
    threads: int | None = None
    tolerances: dict[str, Any] = dc_field(default_factory=dict)
    base_dir: Path = dc_field(default=Path("."), repr=False)

    @classmethod
    def from_dict(cls, data: Any, base_dir: Path = Path(".")) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        allowed = {f.name for f in fields(cls)} - {"base_dir"}
        unknown = sorted(set(data) - allowed)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {unknown}")
        cfg = cls(**data, base_dir=base_dir)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: malformed JSON ({exc})") from exc
        return cls.from_dict(data, base_dir=path.resolve().parent)

    def validate(self) -> None:
        for name, allowed in (("audit", AUDIT_KEYS), ("limits", LIMIT_KEYS),
                              ("relax", RELAX_KEYS), ("tolerances", TOLERANCE_KEYS)):
            block = getattr(self, name)
            if not isinstance(block, dict):
                raise ConfigError(f"'{name}' must be an object")
            unknown = sorted(set(block) - allowed)
            if unknown:
                raise ConfigError(f"unknown keys in '{name}': {unknown}")
        for name in ("kernel", "domain", "field"):
            if not isinstance(getattr(self, name), dict):
                raise ConfigError(f"'{name}' must be an object")
        if self.eps is not None:
            if not isinstance(self.eps, list) or not all(isinstance(e, (int, float)) for e in self.eps):
                raise ConfigError("'eps' must be a list of numbers")
        if self.threads is not None and (not isinstance(self.threads, int) or self.threads < 1):
            raise ConfigError("'threads' must be a positive integer")

    def to_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name != "base_dir"}

    # builders

    def tolerance(self, key: str, default: float) -> float:
        return float(self.tolerances.get(key, default))

    @property
    def floor_factor(self) -> float:
        return self.tolerance("floor_factor", DEFAULT_FLOOR_FACTOR)

    def audit_tolerances(self) -> AuditTolerances:
        picked = {k: float(v) for k, v in self.tolerances.items() if k in AUDIT_TOLERANCE_KEYS}
        return AuditTolerances(**picked)

    def eps_list(self) -> list[float]:
        eps = list(DEFAULT_EPS) if self.eps is None else [float(e) for e in self.eps]
        if not eps:
            raise ConfigError("eps list is empty")
        return eps

    def pair(self) -> KernelPair:
        return pair_from_spec(self.kernel, self.base_dir)

    def build_field(self) -> tuple[DiscreteField, str]:
        spec = dict(self.field)
        if "file" in spec:
            path = Path(spec.pop("file"))
            if spec:
                raise ConfigError(f"unknown keys next to 'file': {sorted(spec)}")
            if not path.is_absolute():
                path = self.base_dir / path
            dom = domain_from_spec(self.domain) if self.domain else None
            return load_field_text(path, dom), path.stem
        dom = domain_from_spec(self.domain)
        return build_field(dom, spec), str(spec.get("family", "field"))


def _matrix(value, default: np.ndarray) -> np.ndarray:
    if value is None:
        return default
    if isinstance(value, (int, float)):
        return float(value) * np.eye(3)
    arr = np.asarray(value, dtype=float)
    if arr.shape == (3,):
        return np.diag(arr)
    if arr.shape != (3, 3):
        raise ConfigError("matrices must be a scalar, a 3-vector (diagonal) or a 3x3 list")
    return arr


def _limit_objects(cfg: RunConfig, pair: KernelPair, eps: list[float]):
    """``A`` and ``D`` for the local limit: from the config, else estimated from the kernel."""
    a_cfg = cfg.limits.get("A")
    d_cfg = cfg.limits.get("D")
    A = _matrix(a_cfg, None) if a_cfg is not None else estimate_anisotropy(pair, eps[-1]).matrix
    if d_cfg is not None:
        D = _matrix(d_cfg, None)
    else:
        d_eps = eps if len(eps) >= 2 else [eps[0], eps[0] / 2.0]
        D = estimate_dzyalo(pair, sorted(d_eps, reverse=True)).matrix
    return np.asarray(A), np.asarray(D)


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    if not out.is_absolute():
        out = Path.cwd() / out
    out.mkdir(parents=True, exist_ok=True)
    return out


def _tolerance_block(cfg: RunConfig) -> dict[str, float]:
    tol = vars(cfg.audit_tolerances()).copy()
    tol.update({
        "recovery": cfg.tolerance("recovery", 0.07),
        "delta_sq": cfg.tolerance("delta_sq", 0.5),
        "floor_factor": cfg.floor_factor,
        "max_variation": cfg.tolerance("max_variation", 0.5),
        "max_growth": cfg.tolerance("max_growth", 10.0),
    })
    return tol


# subcommands


def cmd_check(cfg: RunConfig, args) -> int:
    pair = cfg.pair()
    eps = sorted(cfg.eps_list(), reverse=True)
    audit = dict(cfg.audit)
    kwargs = {}
    if "deltas" in audit:
        kwargs["deltas"] = [float(d) for d in audit["deltas"]]
    if "cones" in audit:
        kwargs["cone_dirs"] = [[float(c) for c in v] for v in audit["cones"]]
    if "apertures" in audit:
        kwargs["apertures"] = [float(a) for a in audit["apertures"]]
    report = audit_hypotheses(pair, eps, tol=cfg.audit_tolerances(), **kwargs)
    out = _out_dir(cfg) / f"hypotheses__{artifact_stem('kernel', pair.name)}.json"
    payload = report.to_dict()
    payload["tolerances"] = vars(cfg.audit_tolerances())
    write_summary_json(payload, out)
    for name, res in report.results.items():
        print(f"{name}: {'pass' if res.passed else 'FAIL'}  {res.detail}")
    if report.all_passed:
        return EXIT_OK
    print(f"failed hypotheses: {', '.join(report.failed)}", file=sys.stderr)
    return EXIT_AUDIT


def cmd_sweep(cfg: RunConfig, args) -> int:
    pair = cfg.pair()
    m, field_id = cfg.build_field()
    eps = check_eps_list(cfg.eps_list(), m.domain, pair, cfg.floor_factor)
    A, D = _limit_objects(cfg, pair, eps)
    sw = sweep(pair, m, eps, A, D, field_id=field_id, floor_factor=cfg.floor_factor)
    rec = recovery_check(pair, m, eps, A, D, tolerance=cfg.tolerance("recovery", 0.07), sw=sw)
    bounds = audit_bounds(pair, m, eps, sw=sw, delta_sq=cfg.tolerance("delta_sq", 0.5))
    bounds.max_variation = cfg.tolerance("max_variation", 0.5)
    bounds.max_growth = cfg.tolerance("max_growth", 10.0)
    noise = 0.0
    if "family" in cfg.field:
        noise = quadrature_noise(m.domain, cfg.field, A, D)
    if len(sw.rows) >= 3:
        for comp in ("f", "h", "e"):
            try:
                fit_rate(sw, comp, noise_floor=noise)
            except FitDegenerateError:
                pass
    stem = artifact_stem(field_id, pair.name)
    out = _out_dir(cfg)
    write_sweep_csv(sw, out / f"sweep__{stem}.csv", include_timing=args.timing)
    summary = sw.summary()
    summary.update({
        "A": np.asarray(A).tolist(), "D": np.asarray(D).tolist(), "quadrature_noise": noise,
        "recovery": rec.to_dict(), "bounds": bounds.to_dict(),
        "audits": {"recovery": rec.passed, "uniform_bound": bounds.uniform_ok,
                   "coercivity": bounds.coercivity_ok, "cross_bound": bounds.cross_ok},
        "tolerances": _tolerance_block(cfg),
    })
    write_summary_json(summary, out / f"sweep__{stem}.json")
    for r in sw.rows:
        print(f"eps={r.eps:g}  F={r.f_eps:.10g}  H={r.h_eps:.10g}  E={r.e_eps:.10g}  cross={r.cross_term:.6g}")
    print(f"limits: F={sw.f_limit:.10g}  H={sw.h_limit:.10g}  E={sw.e_limit:.10g}")
    ok = rec.passed and bounds.all_passed
    print("audits:", json.dumps(summary["audits"]))
    return EXIT_OK if ok else EXIT_AUDIT


def _relax_selector(cfg: RunConfig):
    rc = cfg.relax
    kind = rc.get("selector", "local")
    if kind == "local":
        A = _matrix(rc.get("A"), np.eye(3) / 3.0)
        D = _matrix(rc.get("D"), np.zeros((3, 3)))
        axis = tuple(float(v) for v in rc.get("well_axis", (0.0, 0.0, 1.0)))
        return LocalSelector(A, D, float(rc.get("well", 0.0)), axis)
    if kind == "nonlocal":
        eps = float(rc.get("eps", cfg.eps_list()[-1]))
        return NonlocalSelector(cfg.pair(), eps, cfg.floor_factor)
    raise ConfigError(f"relax.selector must be 'local' or 'nonlocal', got {kind!r}")


def cmd_relax(cfg: RunConfig, args) -> int:
    rc = cfg.relax
    seed, field_id = cfg.build_field()
    selector = _relax_selector(cfg)
    config = RelaxConfig(
        selector, seed,
        max_iter=int(rc.get("max_iter", 200)),
        initial_step=float(rc.get("initial_step", 1.0)),
        factor=float(rc.get("factor", 0.5)),
        armijo=float(rc.get("armijo", 1e-4)),
        tol=float(rc.get("tol", 1e-6)),
    )
    if isinstance(selector, NonlocalSelector):
        selector.plan(seed)
    trace = minimize(config)
    stem = artifact_stem(field_id, selector.name)
    out = _out_dir(cfg)
    write_trace_csv(trace, out / f"relax__{stem}.csv")
    save_field_text(trace.final, out / f"relax__{stem}.field.txt")
    last = trace.rows[-1]
    print(f"{trace.reason} after {last.iteration} iterations: energy={last.energy:.10g} grad_norm={last.grad_norm:.3e}")
    return EXIT_OK if trace.converged else EXIT_NONCONVERGED


def cmd_dzyalo(cfg: RunConfig, args) -> int:
    pair = cfg.pair()
    eps = sorted(cfg.eps_list(), reverse=True)
    try:
        D = estimate_dzyalo(pair, eps)
    except ConvergenceFailure as exc:
        print(str(exc), file=sys.stderr)
        write_summary_json({"converged": False, **exc.report}, _out_dir(cfg) / f"dzyalo__{artifact_stem('kernel', pair.name)}.json")
        return EXIT_AUDIT
    payload = {"kernel": pair.name, "eps": eps, "D": D.to_list(), "converged": True}
    write_summary_json(payload, _out_dir(cfg) / f"dzyalo__{artifact_stem('kernel', pair.name)}.json")
    print(json.dumps(D.to_list()))
    return EXIT_OK


def cmd_anisotropy(cfg: RunConfig, args) -> int:
    pair = cfg.pair()
    eps = cfg.eps_list()
    mats = {repr(e): estimate_anisotropy(pair, e).to_list() for e in eps}
    write_summary_json({"kernel": pair.name, "A": mats},
                       _out_dir(cfg) / f"anisotropy__{artifact_stem('kernel', pair.name)}.json")
    print(json.dumps(mats))
    return EXIT_OK


def cmd_energy(cfg: RunConfig, args) -> int:
    pair = cfg.pair()
    m, field_id = cfg.build_field()
    eps = cfg.eps_list()
    rows = [total_energy(pair, e, m, floor_factor=cfg.floor_factor) for e in eps]
    A, D = _limit_objects(cfg, pair, sorted(eps, reverse=True))
    stem = artifact_stem(field_id, pair.name)
    out = _out_dir(cfg)
    write_breakdowns_csv(rows, out / f"energy__{stem}.csv", include_timing=args.timing)
    gamma = float(np.trace(D) / 3.0)
    write_local_csv([
        ("dirichlet", dirichlet_energy(m, A), {"A": np.asarray(A).tolist()}),
        ("dmi", dmi_energy(m, D), {"D": np.asarray(D).tolist()}),
        ("bulk_dmi", bulk_dmi_energy(m, gamma), {"gamma": gamma}),
        ("limit", dirichlet_energy(m, A) + dmi_energy(m, D),
         {"A": np.asarray(A).tolist(), "D": np.asarray(D).tolist()}),
    ], out / f"local__{stem}.csv")
    for r in rows:
        print(f"eps={r.eps:g}  F={r.f_eps:.10g}  H={r.h_eps:.10g}  E={r.e_eps:.10g}  cross={r.cross_term:.6g}")
    return EXIT_OK


COMMANDS = {
    "check": cmd_check, "sweep": cmd_sweep, "relax": cmd_relax,
    "dzyalo": cmd_dzyalo, "anisotropy": cmd_anisotropy, "energy": cmd_energy,
}


def _parse_eps(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad eps list {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON run configuration")
    common.add_argument("--out", help="output directory (overrides output_dir)")
    common.add_argument("--threads", type=int, help="worker threads for the pair loops")
    common.add_argument("--eps", type=_parse_eps, help="comma-separated eps values")
    common.add_argument("--preset", choices=sorted(PRESETS), help="replace the field spec")
    common.add_argument("--timing", action="store_true", help="write wall times into CSV output")
    parser = argparse.ArgumentParser(prog="nlexchange", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if args.out:
        cfg.output_dir = args.out
    if args.threads is not None:
        cfg.threads = args.threads
    if args.eps is not None:
        cfg.eps = args.eps
    if args.preset:
        cfg.field = dict(PRESETS[args.preset])
    cfg.validate()
    return cfg


def _set_threads(n: int | None) -> None:
    if n is None:
        return
    import numba

    if n > numba.config.NUMBA_NUM_THREADS:
        raise ConfigError(f"threads must be <= {numba.config.NUMBA_NUM_THREADS} on this machine")
    numba.set_num_threads(n)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = _apply_overrides(RunConfig.from_file(args.config), args)
        _set_threads(cfg.threads)
        return COMMANDS[args.command](cfg, args)
    except ResolutionError as exc:
        print(f"resolution error: {exc}", file=sys.stderr)
        return EXIT_RESOLUTION
    except (HypothesisViolation, ConvergenceFailure) as exc:
        print(f"audit failure: {exc}", file=sys.stderr)
        return EXIT_AUDIT
    except (ConfigError, InputError, TypeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
