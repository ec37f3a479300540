"""Command-line front end.

Subcommands: ``dispersion``, ``critical``, ``solve``, ``trace``, ``verify``.
Every output file carries the resolved run configuration, and all floats are
written with ``%.17g``. Exit status is 0 on success, 2 for invalid input and
3 for numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bifurcation import BranchPoint, find_bifurcation, trace_branch, verify
from .dispersion import eigenvalue_table
from .errors import ContractError, DomainError, NumericalError
from .geometry import DomainSpec, Perturbation
from .grid import GridConfig
from .solver import boundary_flux, solve_dirichlet

__all__ = ["RunConfig", "dumps", "main", "parse_args", "run"]

SUBCOMMANDS = ("dispersion", "critical", "solve", "trace", "verify")
EXIT_OK, EXIT_DOMAIN, EXIT_NUMERICAL = 0, 2, 3

log = logging.getLogger("exceptional_domains")


@dataclass
class RunConfig:
    subcommand: str
    n: int = 4
    t_period: float | None = None
    phi_coeffs: list = field(default_factory=list)
    grid: dict = field(default_factory=lambda: GridConfig().to_dict())
    s_max: float = 0.02
    steps: int = 10
    kmax: int = 20
    output_path: str | None = None
    branch_path: str | None = None
    seed: int | None = None

    def validate(self):
        if self.subcommand not in SUBCOMMANDS:
            raise DomainError(f"subcommand: unknown value {self.subcommand!r}")
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 4:
            raise DomainError(f"n: dimension must be an integer >= 4, got {self.n!r}")
        if self.t_period is not None and not (self.t_period > 0 and math.isfinite(self.t_period)):
            raise DomainError(f"t_period: must be positive, got {self.t_period!r}")
        if self.subcommand in ("dispersion", "solve") and self.t_period is None:
            raise DomainError("t_period: required for this subcommand (--T)")
        try:
            GridConfig(**self.grid)
        except TypeError as exc:
            raise DomainError(f"grid: {exc}") from None
        if self.kmax < 1:
            raise DomainError("kmax: must be >= 1")
        if self.steps < 1:
            raise DomainError("steps: must be >= 1")
        if not (self.s_max != 0 and math.isfinite(self.s_max)):
            raise DomainError("s_max: must be finite and nonzero")
        if self.output_path is not None:
            parent = Path(self.output_path).resolve().parent
            if not parent.is_dir() or not os.access(parent, os.W_OK):
                raise DomainError(f"output_path: directory {str(parent)!r} is not writable")
        return self

    @property
    def grid_config(self) -> GridConfig:
        return GridConfig(**self.grid)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["version"] = __version__
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise DomainError(f"config: unknown field(s) {sorted(extra)}")
        if "subcommand" not in d:
            raise DomainError("subcommand: missing from config")
        return cls(**d)


# --------------------------------------------------------------------------
# serialization


def _fmt(x):
    if isinstance(x, bool) or x is None:
        return json.dumps(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "NaN"
        if math.isinf(x):
            return "Infinity" if x > 0 else "-Infinity"
        return f"{x:.17g}"
    if isinstance(x, str):
        return json.dumps(x)
    if isinstance(x, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_fmt(v)}" for k, v in x.items()) + "}"
    if isinstance(x, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_fmt(v) for v in x) + "]"
    raise TypeError(f"cannot serialize {type(x).__name__}")


def dumps(obj) -> str:
    """JSON text with every float written as ``%.17g`` and stable key order."""
    return _fmt(obj) + "\n"


def _atomic_write(path: str, text: str):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.resolve().parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_with_header(config: RunConfig, meta: dict, body: str) -> str:
    header = {"config": config.to_dict(), **meta}
    return "# " + dumps(header).strip() + "\n" + body


# --------------------------------------------------------------------------
# subcommands


def _spec(cfg: RunConfig, t_period=None) -> DomainSpec:
    T = cfg.t_period if t_period is None else t_period
    return DomainSpec(cfg.n, T, Perturbation(tuple(cfg.phi_coeffs) or (0.0,)))


def _run_dispersion(cfg):
    table = eigenvalue_table(cfg.n, cfg.t_period, cfg.kmax)
    if cfg.output_path:
        _atomic_write(cfg.output_path, _csv_with_header(cfg, {}, table.to_csv()))
    lam1 = table.lambda_k[1]
    imin = int(np.argmin(np.abs(table.lambda_k)))
    return f"n={cfg.n} T={cfg.t_period:.10g} kmax={cfg.kmax} lambda_1={lam1:.10g} min|lambda_k| at k={imin}"


def _run_critical(cfg):
    cert = find_bifurcation(cfg.n)
    cp = cert.critical
    if cfg.output_path:
        out = {
            "config": cfg.to_dict(),
            "n": cp.n,
            "rho_star": cp.rho_star,
            "T_star": cp.t_star,
            "lambda1_slope": cp.lambda1_slope,
            "lambda_residual": cp.lambda_residual,
            "min_abs_other": cert.min_abs_other,
        }
        _atomic_write(cfg.output_path, dumps(out))
    return f"rho_star={cp.rho_star:.10f} T_star={cp.t_star:.10f}"


def _run_solve(cfg):
    spec = _spec(cfg)
    res = solve_dirichlet(spec, cfg.grid_config)
    flux = boundary_flux(spec, res)
    f_inf = float(np.max(np.abs(flux.f_values)))
    if cfg.output_path:
        meta = {
            "result": res.to_dict(),
            "flux": {"tau": flux.tau_nodes, "flux": flux.flux_values, "F": flux.f_values},
        }
        _atomic_write(cfg.output_path, _csv_with_header(cfg, meta, res.field.to_csv()))
    lo, hi = res.interior_range
    return f"F_inf={f_inf:.6e} linear_residual={res.linear_residual:.3e} u_range=[{lo:.6g}, {hi:.6g}]"


def _run_trace(cfg):
    branch = trace_branch(cfg.n, cfg.s_max, cfg.steps, cfg.grid_config)
    if cfg.output_path:
        out = {"config": cfg.to_dict(), **branch.to_dict()}
        _atomic_write(cfg.output_path, dumps(out))
    last = branch[-1]
    status = "aborted" if branch.aborted else "ok"
    summary = (
        f"points={len(branch)} s_last={last.s:.6g} T_last={last.t_period:.10f} "
        f"max_newton_residual={max(p.newton_residual for p in branch):.3e} status={status}"
    )
    if branch.aborted:
        raise NumericalError(f"branch aborted: {branch.message}; " + summary)
    return summary


def _load_branch(path, n):
    data = json.loads(Path(path).read_text())
    if "points" not in data or not data["points"]:
        raise DomainError(f"branch_path: {path!r} holds no branch points")
    p = data["points"][-1]
    for key in ("s", "T", "v_coeffs", "newton_residual"):
        if key not in p:
            raise DomainError(f"branch_path: point is missing field {key!r}")
    grid = GridConfig(**data["grid"]) if "grid" in data else GridConfig()
    return BranchPoint(float(p["s"]), float(p["T"]), tuple(p["v_coeffs"]), float(p["newton_residual"])), grid, data


def _run_verify(cfg):
    if cfg.branch_path:
        point, grid, data = _load_branch(cfg.branch_path, cfg.n)
        branch_dict = {k: v for k, v in data.items() if k != "config"}
    else:
        branch = trace_branch(cfg.n, cfg.s_max, cfg.steps, cfg.grid_config)
        if branch.aborted:
            raise NumericalError(f"branch aborted: {branch.message}")
        point, grid, branch_dict = branch[-1], cfg.grid_config, branch.to_dict()
    report = verify(point, grid, n=cfg.n)
    if cfg.output_path:
        out = {"config": cfg.to_dict(), **branch_dict, "verification": report.to_dict()}
        _atomic_write(cfg.output_path, dumps(out))
    return (
        f"s={point.s:.6g} overdet_residual={report.overdet_residual:.3e} "
        f"u_range=[{report.u_min:.6g}, {report.u_max:.6g}] decay_slope={report.decay_slope:.6f} "
        f"orthogonality={report.orthogonality:.3e}"
    )


_DISPATCH = {
    "dispersion": _run_dispersion,
    "critical": _run_critical,
    "solve": _run_solve,
    "trace": _run_trace,
    "verify": _run_verify,
}


def run(config: RunConfig, stream=None) -> int:
    """Execute ``config``; print a one-line summary; return the exit status."""
    stream = stream or sys.stdout
    try:
        config.validate()
        if config.seed is not None:
            np.random.seed(config.seed)
        line = _DISPATCH[config.subcommand](config)
    except (DomainError, ContractError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(line, file=stream)
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing


def _build_parser():
    p = argparse.ArgumentParser(prog="exceptional-domains", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON file with RunConfig fields")
        sp.add_argument("--dim", type=int, dest="n", help="ambient dimension n >= 4")
        sp.add_argument("-o", "--output", dest="output_path")
        sp.add_argument("--seed", type=int)
        sp.add_argument("-v", "--verbose", action="store_true")
        if name in ("dispersion", "solve"):
            sp.add_argument("--T", type=float, dest="t_period", help="period T")
        if name == "dispersion":
            sp.add_argument("--kmax", type=int)
        if name == "solve":
            sp.add_argument("--phi", type=float, nargs="+", dest="phi_coeffs", help="cosine coefficients c_0 c_1 ...")
        if name in ("solve", "trace", "verify"):
            sp.add_argument("--r-max", type=float, dest="r_max")
            sp.add_argument("--n-r", type=int, dest="n_r")
            sp.add_argument("--m-tau", type=int, dest="m_tau")
        if name in ("trace", "verify"):
            sp.add_argument("--smax", type=float, dest="s_max")
            sp.add_argument("--steps", type=int)
        if name == "verify":
            sp.add_argument("--branch", dest="branch_path", help="branch JSON written by trace")
    return p


def parse_args(argv=None) -> tuple[RunConfig, bool]:
    """Resolve command-line flags (over an optional ``--config`` file) into a RunConfig."""
    ns = _build_parser().parse_args(argv)
    base = {"subcommand": ns.subcommand}
    if ns.config:
        try:
            loaded = json.loads(Path(ns.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise DomainError(f"config: cannot read {ns.config!r}: {exc}") from None
        loaded.pop("version", None)
        if loaded.get("subcommand", ns.subcommand) != ns.subcommand:
            raise DomainError(f"subcommand: config file says {loaded['subcommand']!r}")
        base.update(loaded)
    grid = dict(base.get("grid") or GridConfig().to_dict())
    for key in ("r_max", "n_r", "m_tau"):
        val = getattr(ns, key, None)
        if val is not None:
            grid[key] = val
    base["grid"] = grid
    for key in ("n", "t_period", "phi_coeffs", "kmax", "s_max", "steps", "output_path", "seed", "branch_path"):
        val = getattr(ns, key, None)
        if val is not None:
            base[key] = val
    cfg = RunConfig.from_dict(base)
    return cfg, bool(ns.verbose)


def main(argv=None) -> int:
    try:
        cfg, verbose = parse_args(argv)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except TypeError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
