"""Command-line driver: solve, study, and diagnose runs.

Usage:
    hdgflow solve  [--config FILE] [--k INT] [--nu REAL] [--mesh SPEC]
                   [--case NAME] [--tol REAL] [--max-iter INT]
                   [--mode monolithic|condensed] [--out DIR]
    hdgflow study  [same flags] [--levels INT]
    hdgflow diagnose [same flags]

Mesh specs: "tri:<n>", "quad:<n>", "hexdom:<n>", or "file:<path>".  The
config file is plain "key = value" text (same keys as the flags, with
underscores); command-line flags override file values.  Exit codes: 0 ok,
2 configuration error, 3 mesh error, 4 solver error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .basis import SpaceSet, projection_eoc_diagnostic
from .cases import manufactured_case
from .convergence import check_rates, monitor_band, run_convergence_study
from .forms import DiscreteConvection
from .mesh import MeshError, build_family, generate_structured, read_mesh_file
from .solver import SolverError, check_state, picard_solve
from .vtkio import export_vtk

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MESH = 3
EXIT_SOLVER = 4


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    mesh: str = "quad:8"
    k: int = 1
    nu: float = 1.0
    case: str = "bubble"
    tol: float = 1e-10
    max_iter: int = 50
    mode: str = "condensed"
    levels: int = 4
    out: str = "out"

    def validate(self):
        if self.command not in ("solve", "study", "diagnose"):
            raise ConfigError(f"command: unknown command {self.command!r}")
        if not (0 <= self.k <= 4):
            raise ConfigError(f"k: must be in [0, 4], got {self.k}")
        if self.nu <= 0:
            raise ConfigError(f"nu: must be positive, got {self.nu}")
        if self.tol <= 0:
            raise ConfigError(f"tol: must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ConfigError(f"max_iter: must be >= 1, got {self.max_iter}")
        if self.mode not in ("monolithic", "condensed"):
            raise ConfigError(f"mode: must be monolithic or condensed, got {self.mode!r}")
        if not (2 <= self.levels <= 6):
            raise ConfigError(f"levels: must be in [2, 6], got {self.levels}")
        if self.case not in ("bubble", "gyre"):
            raise ConfigError(f"case: unknown case {self.case!r}")
        kind = self.mesh.split(":", 1)[0]
        if kind not in ("tri", "quad", "hexdom", "file"):
            raise ConfigError(f"mesh: unknown mesh spec {self.mesh!r}")


_CONFIG_TYPES = {"k": int, "max_iter": int, "levels": int,
                 "nu": float, "tol": float,
                 "mesh": str, "case": str, "mode": str, "out": str}


def parse_config_file(path: str) -> dict:
    values = {}
    try:
        text = Path(path).read_text(encoding="ascii")
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config {path}:{lineno}: expected 'key = value'")
        key, val = (part.strip() for part in line.split("=", 1))
        if key not in _CONFIG_TYPES:
            raise ConfigError(f"config {path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _CONFIG_TYPES[key](val)
        except ValueError as exc:
            raise ConfigError(f"config {path}:{lineno}: {key}: {exc}") from exc
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hdgflow", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("solve", "study", "diagnose"):
        p = sub.add_parser(name)
        p.add_argument("--config", default=None)
        p.add_argument("--k", type=int, default=None)
        p.add_argument("--nu", type=float, default=None)
        p.add_argument("--mesh", default=None)
        p.add_argument("--case", default=None)
        p.add_argument("--tol", type=float, default=None)
        p.add_argument("--max-iter", dest="max_iter", type=int, default=None)
        p.add_argument("--mode", choices=("monolithic", "condensed"), default=None)
        p.add_argument("--levels", type=int, default=None)
        p.add_argument("--out", default=None)
    return parser


def resolve_config(args) -> RunConfig:
    values = {}
    if args.config is not None:
        values.update(parse_config_file(args.config))
    for key in _CONFIG_TYPES:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    cfg = RunConfig(command=args.command, **values)
    cfg.validate()
    return cfg


def make_mesh(cfg: RunConfig):
    kind, _, arg = cfg.mesh.partition(":")
    if kind == "file":
        if not arg:
            raise MeshError("mesh: file spec needs a path, e.g. file:mesh.txt")
        if not Path(arg).exists():
            raise MeshError(f"mesh: file not found: {arg}")
        return read_mesh_file(arg)
    try:
        n = int(arg) if arg else 8
    except ValueError as exc:
        raise ConfigError(f"mesh: bad resolution in {cfg.mesh!r}") from exc
    if n < 1:
        raise ConfigError("mesh: resolution must be >= 1")
    return generate_structured(kind, n)


def make_family(cfg: RunConfig):
    kind, _, arg = cfg.mesh.partition(":")
    if kind == "file":
        raise ConfigError("study: mesh files cannot be refined; use a generator spec")
    try:
        n0 = int(arg) if arg else 4
    except ValueError as exc:
        raise ConfigError(f"mesh: bad resolution in {cfg.mesh!r}") from exc
    if n0 < 1:
        raise ConfigError("mesh: resolution must be >= 1")
    return build_family(kind, cfg.levels, n0)


def _invariant_lines(inv: dict) -> list[str]:
    return [
        f"pressure_mean = {inv['pressure_mean']:.3e}  "
        f"[{'pass' if abs(inv['pressure_mean']) <= 1e-10 else 'FAIL'}]",
        f"max_trace_flux = {inv['max_trace_flux']:.3e}  "
        f"[{'pass' if inv['max_trace_flux'] <= 1e-10 else 'FAIL'}]",
        f"residual_rel = {inv['residual_rel']:.3e}  "
        f"[{'pass' if inv['residual_rel'] <= 1e-9 else 'FAIL'}]",
    ]


def run_solve(cfg: RunConfig) -> int:
    mesh = make_mesh(cfg)
    case = manufactured_case(cfg.case, nu=cfg.nu)
    space = SpaceSet(mesh, cfg.k)
    state, trace = picard_solve(space, cfg.nu, case.f, tol=cfg.tol,
                                max_iter=cfg.max_iter, mode=cfg.mode)
    conv = DiscreteConvection(space, state.u, state.uhat)
    inv = check_state(space, cfg.nu, conv, case.f, state)

    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    export_vtk(state, mesh, outdir / "solution.vtk")
    lines = [
        f"command = solve  case = {cfg.case}  mesh = {cfg.mesh}  k = {cfg.k}  "
        f"nu = {cfg.nu:.17g}  mode = {cfg.mode}",
        f"cells = {mesh.n_cells}  faces = {mesh.n_faces}  max_h = {mesh.max_h:.17g}",
        f"picard_iterations = {trace.iterations}  converged = {trace.converged}",
        "increments = " + " ".join(f"{v:.6e}" for v in trace.increments),
        "contraction_ratios = " + " ".join(f"{v:.6e}" for v in trace.ratios),
        "stability_monitor = " + " ".join(f"{v:.6e}" for v in trace.monitors),
    ] + _invariant_lines(inv)
    (outdir / "summary.txt").write_text("\n".join(lines) + "\n", encoding="ascii")
    print("\n".join(lines))
    return EXIT_OK


def run_study(cfg: RunConfig) -> int:
    family = make_family(cfg)
    case = manufactured_case(cfg.case, nu=cfg.nu)
    report = run_convergence_study(family, case, cfg.k, tol=cfg.tol,
                                   max_iter=cfg.max_iter, mode=cfg.mode)
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "report.csv").write_text(report.to_csv(), encoding="ascii")

    lines = [
        f"command = study  case = {cfg.case}  mesh = {cfg.mesh}  k = {cfg.k}  "
        f"levels = {cfg.levels}  nu = {cfg.nu:.17g}  mode = {cfg.mode}",
    ]
    for name, measured, floor, passed in check_rates(report):
        shown = "exact" if measured is None else f"{measured:.3f}"
        lines.append(f"rate {name}: final EOC = {shown} (floor {floor:.2f})  "
                     f"[{'pass' if passed else 'FAIL'}]")
    band = monitor_band(report.monitors)
    lines.append(f"stability_monitor band (max/min) = {band:.3f}  "
                 f"[{'pass' if band <= 2.0 else 'FAIL'}]")
    rband = monitor_band(report.ratio_diagnostic)
    lines.append(f"gradient_ratio band (max/min) = {rband:.3f}  "
                 f"[{'pass' if rband <= 2.0 else 'FAIL'}]")
    for j, inv in enumerate(report.invariants):
        lines.append(f"level {j}: " + "; ".join(_invariant_lines(inv)))
    (outdir / "summary.txt").write_text("\n".join(lines) + "\n", encoding="ascii")
    print("\n".join(lines))
    return EXIT_OK


def run_diagnose(cfg: RunConfig) -> int:
    mesh = make_mesh(cfg)
    lines = [
        f"command = diagnose  mesh = {cfg.mesh}  k = {cfg.k}",
        f"cells = {mesh.n_cells}  faces = {mesh.n_faces}  "
        f"boundary_faces = {len(mesh.boundary_faces)}",
        f"max_h = {mesh.max_h:.17g}  total_area = {mesh.total_area():.17g}",
        f"shape_regularity (min fan-triangle quality): min = "
        f"{mesh.shape_regularity().min():.4f}",
    ]
    kind = cfg.mesh.split(":", 1)[0]
    if kind != "file":
        family = build_family(kind, 3, max(1, int(cfg.mesh.partition(':')[2] or 4) // 2))
        diag = projection_eoc_diagnostic(
            family, cfg.k,
            scalar_field=lambda p: np.sin(np.pi * p[:, 0]) * np.sin(np.pi * p[:, 1]),
            vector_field=lambda p: np.column_stack(
                [np.sin(np.pi * p[:, 0]), np.cos(np.pi * p[:, 1])]))
        lines.append("projection EOC (cell L2): "
                     + " ".join(f"{v:.3f}" for v in diag["cell_l2_eoc"]))
        lines.append("projection EOC (face L2, h^1/2-weighted): "
                     + " ".join(f"{v:.3f}" for v in diag["face_l2_weighted_eoc"]))
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "summary.txt").write_text("\n".join(lines) + "\n", encoding="ascii")
    print("\n".join(lines))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else 0
    try:
        cfg = resolve_config(args)
        if cfg.command == "solve":
            return run_solve(cfg)
        if cfg.command == "study":
            return run_study(cfg)
        return run_diagnose(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MeshError as exc:
        print(f"mesh error: {exc}", file=sys.stderr)
        return EXIT_MESH
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
