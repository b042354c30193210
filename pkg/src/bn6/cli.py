"""Batch front-end: one subcommand per operation, reproducible artifacts.

Every run resolves a flat configuration (defaults, then `key = value`
lines from --config, then command-line flags), executes one operation,
and writes CSV/JSON files into the output directory.  The resolved
configuration and the package version are embedded in every artifact;
no timestamps or machine identifiers, so identical configuration gives
byte-identical output.

Exit codes: 0 success, 2 solver failure, 3 configuration error.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, fields, replace

import numpy as np

from .auxiliary import (
    DEFAULT_L_MAX,
    build_profiles,
    essential_nondegeneracy,
)
from .bubbles import constants
from .continuation import extract_limit, trace_branch
from .errors import BN6Error, ConfigError
from .reduction import (
    DEFAULT_S,
    AnsatzSpec,
    BubbleParams,
    assemble_ansatz,
    case1_parameters,
    expansion_check,
    residual_norm,
)
from .serialize import (
    branch_point_dict,
    branch_rows,
    csv_text,
    expansion_rows,
    json_text,
    radial_fn_rows,
    rows_as_json,
    write_atomic,
)
from .shooting import find_lambda0, solve_bvp

COMMANDS = ("ground-state", "branch", "lambda0", "aux-solve", "nondeg",
            "ansatz-check", "expansion-check", "limits", "constants")

PROFILE_HEADER = "r,value,derivative"
BRANCH_HEADER = "amplitude,lambda,residual"
EXPANSION_HEADER = "eps,mu_bar,J_quad,c0_quad,E_pred,residual_L32"
ANSATZ_HEADER = "eps,mu_bar,residual_L32"


@dataclass(frozen=True)
class RunConfig:
    """Resolved run parameters; every field has a documented default.

    dimension        space dimension N (default 6)
    grid_n           grid cells; None defers to each solver's own default
    lam              fixed lambda for ground-state (no default: required
                     there), optional center value lam for constants
    m                nodal region count (default 1)
    a_start, a_end   amplitude window for branch/limits; a_end None means
                     the dimension default of trace_branch
    eps_grid         "start:ratio:count" magnitudes; None means the
                     expansion module default
    s                inner-region exponent of the ansatz (default 0.75)
    lmax             angular sectors scanned by nondeg (default 24)
    ode_tol,
    root_tol         provenance records of the integrator/root tolerances;
                     the solvers pin these internally for reproducibility
    fit_min_points   tail length used by limits (default 8)
    out              output directory (default $BN6_OUT, else ".")
    format           "csv" or "json"; table artifacts with a pinned CSV
                     header are always written as CSV, and "json" adds a
                     row-objects twin
    """

    dimension: int = 6
    grid_n: int | None = None
    lam: float | None = None
    m: int = 1
    a_start: float = 1.0
    a_end: float | None = None
    eps_grid: str | None = None
    s: float = DEFAULT_S
    lmax: int = DEFAULT_L_MAX
    ode_tol: float = 1e-10
    root_tol: float = 1e-13
    fit_min_points: int = 8
    out: str | None = None
    format: str = "csv"

    def resolved_out(self) -> str:
        if self.out is not None:
            return self.out
        return os.environ.get("BN6_OUT", ".")

    def as_provenance(self, command: str) -> dict:
        doc = {"command": command}
        for f in fields(self):
            value = getattr(self, f.name)
            doc[f.name] = value if value is not None else "default"
        doc["out"] = self.resolved_out()
        return doc


_FIELD_TYPES = {
    "dimension": int, "grid_n": int, "lam": float, "m": int,
    "a_start": float, "a_end": float, "eps_grid": str, "s": float,
    "lmax": int, "ode_tol": float, "root_tol": float,
    "fit_min_points": int, "out": str, "format": str,
}
_KEY_ALIASES = {"n": "dimension", "lambda": "lam"}


def _coerce(key: str, raw: str):
    key = _KEY_ALIASES.get(key, key)
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    try:
        value = _FIELD_TYPES[key](raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc
    if key == "format" and value not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {value!r}")
    return key, value


def parse_config_file(path: str) -> dict:
    """Flat `key = value` lines; blank lines and # comments ignored."""
    try:
        with open(path) as handle:
            lines = handle.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    out = {}
    for lineno, line in enumerate(lines, start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, raw = (part.strip() for part in body.split("=", 1))
        key, value = _coerce(key.replace("-", "_").lower(), raw)
        out[key] = value
    return out


def parse_eps_grid(spec: str | None):
    """Magnitude schedule "start:ratio:count" -> tuple of floats."""
    if spec is None:
        return None
    parts = spec.split(":")
    if len(parts) != 3:
        raise ConfigError(f"eps grid must be start:ratio:count, got {spec!r}")
    try:
        start, ratio, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise ConfigError(f"bad eps grid {spec!r}") from exc
    if start <= 0.0 or ratio <= 0.0 or count < 1:
        raise ConfigError(f"eps grid needs start>0, ratio>0, count>=1, "
                          f"got {spec!r}")
    return tuple(start * ratio ** k for k in range(count))


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage errors as ConfigError (exit 3)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser() -> _Parser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH")
    common.add_argument("--N", type=int, dest="dimension")
    common.add_argument("--lambda", type=float, dest="lam")
    common.add_argument("--m", type=int)
    common.add_argument("--grid-n", type=int, dest="grid_n")
    common.add_argument("--out", metavar="DIR")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--eps-grid", metavar="START:RATIO:COUNT",
                        dest="eps_grid")
    common.add_argument("--s", type=float)
    common.add_argument("--lmax", type=int)
    parser = _Parser(prog="bn6", description=__doc__.split("\n", 1)[0])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if args.config is not None:
        cfg = replace(cfg, **parse_config_file(args.config))
    overrides = {}
    for f in fields(RunConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            overrides[f.name] = value
    if overrides:
        cfg = replace(cfg, **overrides)
    return cfg


def _write_table(cfg: RunConfig, prov: dict, stem: str, header: str,
                 rows, pinned_csv: bool = True) -> None:
    """CSV (always, when the header is a pinned interface) and, under
    --format json, a row-objects twin."""
    out = cfg.resolved_out()
    if pinned_csv or cfg.format == "csv":
        write_atomic(os.path.join(out, stem + ".csv"),
                     csv_text(header, rows, prov))
    if cfg.format == "json":
        write_atomic(os.path.join(out, stem + ".rows.json"),
                     json_text({"rows": rows_as_json(header, rows)}, prov))


def _require_lambda(cfg: RunConfig) -> float:
    if cfg.lam is None:
        raise ConfigError("this command requires --lambda")
    return cfg.lam


def _profiles(cfg: RunConfig):
    cert = find_lambda0(cfg.dimension)
    return build_profiles(cfg.dimension, cert,
                          **({} if cfg.grid_n is None
                             else {"grid_n": cfg.grid_n}))


def cmd_constants(cfg: RunConfig, prov: dict) -> None:
    if cfg.lam is not None:
        u_center = 0.5 * cfg.lam
    else:
        u_center = 0.5 * find_lambda0(cfg.dimension).lam0
    registry = constants(u_center)
    write_atomic(os.path.join(cfg.resolved_out(), "constants.json"),
                 json_text(registry.as_dict(), prov))


def cmd_ground_state(cfg: RunConfig, prov: dict) -> None:
    lam = _require_lambda(cfg)
    point = solve_bvp(cfg.dimension, lam, cfg.m,
                      **({} if cfg.grid_n is None
                         else {"grid_n": cfg.grid_n}))
    out = cfg.resolved_out()
    write_atomic(os.path.join(out, "ground_state.json"),
                 json_text(branch_point_dict(point), prov))
    _write_table(cfg, prov, "ground_state_profile", PROFILE_HEADER,
                 radial_fn_rows(point.profile))


def cmd_lambda0(cfg: RunConfig, prov: dict) -> None:
    cert = find_lambda0(cfg.dimension,
                        **({} if cfg.grid_n is None
                           else {"grid_n": cfg.grid_n}))
    payload = {
        "dimension": cert.dimension,
        "lambda0": cert.lam0,
        "amplitude": cert.amplitude,
        "gap": cert.gap,
        "gap_alt": cert.gap_alt,
        "bracket": list(cert.bracket),
        "bisection_width": cert.bisection_width,
        "branch_point": branch_point_dict(cert.branch),
    }
    out = cfg.resolved_out()
    write_atomic(os.path.join(out, "lambda0.json"), json_text(payload, prov))
    _write_table(cfg, prov, "lambda0_profile", PROFILE_HEADER,
                 radial_fn_rows(cert.branch.profile))


def _trace(cfg: RunConfig):
    return trace_branch(cfg.dimension, cfg.m, a_start=cfg.a_start,
                        a_end=cfg.a_end)


def cmd_branch(cfg: RunConfig, prov: dict) -> None:
    branch = _trace(cfg)
    stem = f"branch_N{cfg.dimension}_m{cfg.m}"
    _write_table(cfg, prov, stem, BRANCH_HEADER, branch_rows(branch))
    payload = {
        "points": [branch_point_dict(p) for p in branch.points],
        "diagnostics": [list(d) for d in branch.diagnostics],
    }
    write_atomic(os.path.join(cfg.resolved_out(), stem + ".json"),
                 json_text(payload, prov))


def cmd_limits(cfg: RunConfig, prov: dict) -> None:
    branch = _trace(cfg)
    estimate = extract_limit(branch, tail_length=cfg.fit_min_points)
    stem = f"limits_N{cfg.dimension}_m{cfg.m}"
    _write_table(cfg, prov, stem + "_branch", BRANCH_HEADER,
                 branch_rows(branch))
    write_atomic(os.path.join(cfg.resolved_out(), stem + ".json"),
                 json_text(estimate.as_dict(), prov))


def cmd_aux_solve(cfg: RunConfig, prov: dict) -> None:
    profiles = _profiles(cfg)
    out = cfg.resolved_out()
    for name, fn in (("u0", profiles.u0), ("v", profiles.v),
                     ("w", profiles.w)):
        _write_table(cfg, prov, f"aux_{name}", PROFILE_HEADER,
                     radial_fn_rows(fn))
    payload = {
        "dimension": profiles.dimension,
        "lambda0": profiles.lam0,
        "amplitude": profiles.amplitude,
        "v0": profiles.v0,
        "w0": profiles.w0,
    }
    write_atomic(os.path.join(out, "aux.json"), json_text(payload, prov))


def cmd_nondeg(cfg: RunConfig, prov: dict) -> None:
    profiles = _profiles(cfg)
    report = essential_nondegeneracy(profiles, l_max=cfg.lmax)
    out = cfg.resolved_out()
    write_atomic(os.path.join(out, "nondeg.json"),
                 json_text(report.as_dict(), prov))
    _write_table(cfg, prov, "nondeg_v", PROFILE_HEADER,
                 radial_fn_rows(profiles.v))
    _write_table(cfg, prov, "nondeg_w", PROFILE_HEADER,
                 radial_fn_rows(profiles.w))


def cmd_ansatz_check(cfg: RunConfig, prov: dict) -> None:
    profiles = _profiles(cfg)
    sign, tau = case1_parameters(profiles)
    magnitudes = parse_eps_grid(cfg.eps_grid)
    if magnitudes is None:
        magnitudes = tuple(np.geomspace(0.02, 0.25, 8))
    rows = []
    for mag in magnitudes:
        eps = sign * mag
        spec = AnsatzSpec(profiles, eps,
                          (BubbleParams(tau * mag, beta=-1),), s=cfg.s)
        rows.append((eps, spec.mu_bar,
                     residual_norm(assemble_ansatz(spec), spec.lam)))
    _write_table(cfg, prov, "ansatz_check", ANSATZ_HEADER, rows,
                 pinned_csv=False)
    mu = np.array([row[1] for row in rows])
    res = np.array([row[2] for row in rows])
    exponent = float(np.polyfit(np.log(mu), np.log(res), 1)[0])
    payload = {"tau_star": tau, "eps_sign": sign,
               "residual_exponent": exponent,
               "rows": rows_as_json(ANSATZ_HEADER, rows)}
    write_atomic(os.path.join(cfg.resolved_out(), "ansatz_check.json"),
                 json_text(payload, prov))


def cmd_expansion_check(cfg: RunConfig, prov: dict) -> None:
    profiles = _profiles(cfg)
    magnitudes = parse_eps_grid(cfg.eps_grid)
    report = expansion_check(profiles,
                             **({} if magnitudes is None
                                else {"eps_magnitudes": magnitudes}))
    _write_table(cfg, prov, "expansion_check", EXPANSION_HEADER,
                 expansion_rows(report))
    summary = {k: v for k, v in report.as_dict().items() if k != "rows"}
    write_atomic(os.path.join(cfg.resolved_out(), "expansion_fit.json"),
                 json_text(summary, prov))


_DISPATCH = {
    "constants": cmd_constants,
    "ground-state": cmd_ground_state,
    "lambda0": cmd_lambda0,
    "branch": cmd_branch,
    "limits": cmd_limits,
    "aux-solve": cmd_aux_solve,
    "nondeg": cmd_nondeg,
    "ansatz-check": cmd_ansatz_check,
    "expansion-check": cmd_expansion_check,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            raise ConfigError("a command is required")
        cfg = resolve_config(args)
        prov = cfg.as_provenance(args.command)
        _DISPATCH[args.command](cfg, prov)
    except ConfigError as exc:
        print(f"bn6: config error: {exc}", file=sys.stderr)
        return 3
    except BN6Error as exc:
        print(f"bn6: solver failure: {exc.__class__.__name__}: {exc}",
              file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
