"""Command-line front end: config parsing, experiment orchestration, exports.

Subcommands: solve, eigen, topology, carleman, matrix, render.  The
``matrix`` subcommand runs the four-cell experiment
{straight, curved} x {zero gap, prescribed gap} and tabulates eigenvalue,
homology projection, island counts and symmetry residuals per cell, with
one SVG per cell.  Exit codes: 0 full success, 1 config error, 2 partial
cell failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import carleman as carl
from .eigen import smallest_dirichlet_eigenvalue
from .equilibrium import (
    AffineVorticity,
    ConstantVorticity,
    ExponentialVorticity,
    continuation_sweep,
    solve_equilibrium,
)
from .geometry import BoundaryProfile, build_grid
from .homology import harmonic_generator, homology_projection
from .render import render_contours
from .topology import classify_flow

FLAT_LAMBDA1 = float(np.pi**2 / 4.0)  # straight-channel reference for admissibility


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """Serializable experiment description; round-trips losslessly via JSON."""

    profile_cos: list = field(default_factory=lambda: [[1, 1.0]])
    profile_sin: list = field(default_factory=list)
    eps: float = 0.05
    eps_list: list = field(default_factory=lambda: [0.0, 0.05, 0.1, 0.2])
    eps_nontrivial: float = 0.004
    vorticity: dict = field(default_factory=lambda: {"kind": "constant", "value": 1.0})
    vorticity_nontrivial: dict = field(default_factory=lambda: {"kind": "constant", "value": -1.0})
    gap: float = 0.0
    gap_nontrivial: float = 2.02
    nx: int = 128
    ny: int = 65
    tol: float = 1e-10
    homology_rel_tol: float = 1e-6
    n_centerline: int = 32
    seed_grid: list = field(default_factory=lambda: [12, 9])
    carleman_nx: int = 64
    carleman_ny: int = 33
    carleman_steepness: float = 2.0
    carleman_strengths: list = field(default_factory=lambda: [4.0, 8.0, 16.0, 32.0])
    carleman_cutoff: float = 0.25
    admissibility: str = "warn"
    out_dir: str = "out"
    seed: int = 0
    workers: int = 1

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)

    def to_file(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def validate(self):
        for name in ("tol", "homology_rel_tol", "carleman_cutoff"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.ny % 2 == 0:
            raise ConfigError("ny must be odd")
        if self.admissibility not in ("warn", "error"):
            raise ConfigError("admissibility must be 'warn' or 'error'")
        shape = self.profile_shape()
        for e in list(self.eps_list) + [self.eps, self.eps_nontrivial]:
            if shape.scaled(e).max_abs() >= 1.0:
                raise ConfigError(f"eps={e} violates |h| < 1 for the configured profile")
        for spec in (self.vorticity, self.vorticity_nontrivial):
            prof = parse_vorticity(spec)
            if isinstance(prof, AffineVorticity) and not prof.arnold_admissible(FLAT_LAMBDA1):
                msg = (f"affine slope {prof.slope} is outside the stable ranges "
                       f"(-lambda1, 0) and (0, inf) for the straight channel")
                if self.admissibility == "error":
                    raise ConfigError(msg)
                print(f"warning: {msg}", file=sys.stderr)

    def profile_shape(self) -> BoundaryProfile:
        try:
            return BoundaryProfile.from_pairs(self.profile_cos, self.profile_sin)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad profile spec: {exc}") from exc


def parse_vorticity(spec: dict):
    try:
        kind = spec["kind"]
        if kind == "constant":
            return ConstantVorticity(float(spec.get("value", 1.0)))
        if kind == "affine":
            return AffineVorticity(float(spec["slope"]), float(spec.get("offset", 0.0)))
        if kind == "exponential":
            return ExponentialVorticity(float(spec.get("scale", 1.0)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad vorticity spec {spec!r}: {exc}") from exc
    raise ConfigError(f"unknown vorticity kind {spec.get('kind')!r}")


# -- tables -------------------------------------------------------------------


def _cell_text(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def export_table(rows, path, columns, preamble=()):
    """Delimited text: optional '#' preamble lines, a header row, then rows.

    Floats are written with repr (shortest round-trip decimal), so output is
    full precision and locale independent.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in preamble:
            fh.write(f"# {line}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            if isinstance(row, dict):
                fh.write(",".join(_cell_text(row[c]) for c in columns) + "\n")
            else:
                fh.write(",".join(_cell_text(v) for v in row) + "\n")
    return path


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    """Record of one orchestrated run: config, per-cell rows, file checksums."""

    config: dict
    cells: list
    outputs: dict
    timings: dict

    @property
    def failed_cells(self) -> list:
        return [c["cell"] for c in self.cells if c.get("status") != "ok"]

    def write(self, path):
        payload = {
            "config": self.config,
            "cells": self.cells,
            "outputs": self.outputs,
            "timings": self.timings,
        }
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


# -- shared pipeline pieces ----------------------------------------------------


def _solve_cell(config: ExperimentConfig, eps: float, gap: float, vorticity):
    shape = config.profile_shape()
    if eps == 0.0:
        grid = build_grid(BoundaryProfile.flat(), config.nx, config.ny)
        return solve_equilibrium(grid, vorticity, gap, tol=config.tol)
    steps = sorted({0.0, eps / 2.0, eps})
    return continuation_sweep(shape, steps, vorticity, gap,
                              nx=config.nx, ny=config.ny, tol=config.tol)[-1]


def _solution_rows(solution, projection):
    g = solution.grid
    X, Y = g.meshes()
    u1, u2 = solution.u
    rows = []
    for i in range(g.nx):
        for j in range(g.ny):
            rows.append((X[i, j], Y[i, j], solution.psi.values[i, j],
                         u1.values[i, j], u2.values[i, j], solution.omega.values[i, j]))
    return rows


def _orbit_rows(report):
    rows = []
    for orb in report.island_orbits:
        rows.append((orb.seed[0], orb.seed[1], orb.closed, orb.x_winding,
                     orb.contractible, orb.status, orb.level_drift))
    for (pt, speed, cls) in report.centerline_test:
        rows.append((pt[0], pt[1], cls in ("contractible", "wrapping"),
                     0 if cls != "wrapping" else 1, cls == "contractible", cls, speed))
    return rows


def run_theorem1_matrix(config: ExperimentConfig, out_dir=None, workers=None) -> RunManifest:
    """The four-cell experiment {h'=0, h'!=0} x {gap=0, gap!=0}.

    Each cell solves, classifies topology, projects onto the harmonic
    generator, renders an SVG and exports its node table.  A failing cell is
    recorded in the manifest without aborting the others.
    """
    out = Path(out_dir if out_dir is not None else config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    workers = workers if workers is not None else config.workers

    v_triv = parse_vorticity(config.vorticity)
    v_nontriv = parse_vorticity(config.vorticity_nontrivial)
    cells = [
        ("flat_trivial", 0.0, 0.0, v_triv),
        ("curved_trivial", config.eps, 0.0, v_triv),
        ("flat_nontrivial", 0.0, config.gap_nontrivial, v_nontriv),
        ("curved_nontrivial", config.eps_nontrivial, config.gap_nontrivial, v_nontriv),
    ]

    def run_cell(cell):
        name, eps, gap, vort = cell
        t0 = time.perf_counter()
        try:
            solution = _solve_cell(config, eps, gap, vort)
            grid = solution.grid
            eig = smallest_dirichlet_eigenvalue(grid, tol=1e-8)
            gen = harmonic_generator(grid)
            projection = homology_projection(solution.u, gen)
            report = classify_flow(solution, n_centerline=config.n_centerline,
                                   seed_grid=tuple(config.seed_grid))
            svg_path = out / f"{name}.svg"
            render_contours(solution.psi, report.island_orbits, path=svg_path,
                            caption=f"{name}: eps={eps:g} gap={gap:g}")
            table_path = out / f"{name}_solution.csv"
            export_table(
                _solution_rows(solution, projection), table_path,
                columns=("x", "y", "psi", "u1", "u2", "omega"),
                preamble=(f"homology_projection={projection!r}",
                          f"eps={eps!r}", f"gap={gap!r}"),
            )
            row = {
                "cell": name, "eps": eps, "gap": gap,
                "lambda1": eig.lambda1, "projection": projection,
                "islands": report.islands, "wrapping_orbits": report.wrapping_orbits,
                "symmetry_residual": report.symmetry_residual,
                "pde_residual": solution.pde_residual, "status": "ok",
            }
            files = [svg_path, table_path]
        except Exception as exc:  # cell failure must not sink the matrix
            row = {"cell": name, "eps": eps, "gap": gap, "lambda1": float("nan"),
                   "projection": float("nan"), "islands": -1, "wrapping_orbits": -1,
                   "symmetry_residual": float("nan"), "pde_residual": float("nan"),
                   "status": f"failed: {exc}"}
            files = []
        return row, files, time.perf_counter() - t0

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_cell, cells))
    else:
        results = [run_cell(c) for c in cells]

    rows = [r for r, _, _ in results]
    summary = out / "matrix_summary.csv"
    export_table(rows, summary, columns=("cell", "eps", "gap", "lambda1", "projection",
                                         "islands", "wrapping_orbits", "symmetry_residual",
                                         "pde_residual", "status"))
    outputs = {}
    for _, files, _ in results:
        for f in files:
            outputs[str(f.relative_to(out))] = _sha256(f)
    outputs[str(summary.relative_to(out))] = _sha256(summary)
    manifest = RunManifest(
        config=config.to_dict(),
        cells=rows,
        outputs=outputs,
        timings={r["cell"]: t for r, _, t in results},
    )
    manifest.write(out / "manifest.json")
    return manifest


# -- subcommands ----------------------------------------------------------------


def _cmd_solve(config: ExperimentConfig, out: Path) -> int:
    vort = parse_vorticity(config.vorticity)
    solution = _solve_cell(config, config.eps, config.gap, vort)
    gen = harmonic_generator(solution.grid)
    projection = homology_projection(solution.u, gen)
    export_table(_solution_rows(solution, projection), out / "solution.csv",
                 columns=("x", "y", "psi", "u1", "u2", "omega"),
                 preamble=(f"homology_projection={projection!r}",))
    render_contours(solution.psi, (), path=out / "solution.svg",
                    caption=f"eps={config.eps:g} gap={config.gap:g}")
    print(f"solved: eps={config.eps:g} gap={config.gap:g} "
          f"residual={solution.pde_residual:.3e} iterations={solution.newton_iterations} "
          f"projection={projection:.6g}")
    return 0


def _cmd_eigen(config: ExperimentConfig, out: Path) -> int:
    shape = config.profile_shape()
    rows = []
    for eps in config.eps_list:
        grid = build_grid(shape.scaled(eps) if eps else BoundaryProfile.flat(),
                          config.nx, config.ny)
        r = smallest_dirichlet_eigenvalue(grid, tol=config.tol)
        rows.append((eps, r.lambda1, r.residual, r.iterations))
        print(f"eps={eps:g} lambda1={r.lambda1!r} residual={r.residual:.3e} "
              f"iterations={r.iterations}")
    export_table(rows, out / "eigen.csv", columns=("eps", "lambda1", "residual", "iterations"))
    return 0


def _cmd_topology(config: ExperimentConfig, out: Path) -> int:
    vort = parse_vorticity(config.vorticity)
    solution = _solve_cell(config, config.eps, config.gap, vort)
    report = classify_flow(solution, n_centerline=config.n_centerline,
                           seed_grid=tuple(config.seed_grid))
    export_table(_orbit_rows(report), out / "topology_orbits.csv",
                 columns=("seed_x", "seed_y", "closed", "x_winding",
                          "contractible", "status", "detail"))
    lines = [
        f"islands: {report.islands}",
        f"wrapping_orbits: {report.wrapping_orbits}",
        f"symmetry_residual: {report.symmetry_residual!r}",
        f"critical_lines: {len(report.critical_lines)}",
        f"elliptic: {report.elliptic_count}  hyperbolic: {report.hyperbolic_count} "
        f"(index balanced: {report.index_balanced})",
    ]
    for p in report.critical_points:
        lines.append(f"critical_point: kind={p.kind} x={p.position[0]!r} "
                     f"y={p.position[1]!r} psi={p.psi_value!r}")
    text = "\n".join(lines) + "\n"
    (out / "topology_report.txt").write_text(text, encoding="utf-8")
    render_contours(solution.psi, report.island_orbits, path=out / "topology.svg",
                    caption=f"islands={report.islands}")
    print(text, end="")
    return 0


def _cmd_carleman(config: ExperimentConfig, out: Path) -> int:
    grid = carl.upper_half_grid(config.profile_shape().scaled(config.eps),
                                config.carleman_nx, config.carleman_ny)
    weight = carl.CarlemanWeight(grid, steepness=config.carleman_steepness)
    rng = np.random.default_rng(config.seed)
    w = carl.random_bump(rng).sample(grid)
    points = carl.carleman_ratio_sweep(w, weight, config.carleman_strengths)
    decay = dict(carl.unique_continuation_decay(config.carleman_strengths,
                                                config.carleman_cutoff))
    rows = [(p.strength, p.lhs, p.scaled_mass, p.ratio, p.log_lhs,
             float(np.log(p.scaled_mass)) if p.scaled_mass > 0 else float("-inf"),
             decay[p.strength]) for p in points]
    export_table(rows, out / "carleman_sweep.csv",
                 columns=("strength", "lhs", "scaled_mass", "ratio",
                          "log_lhs", "log_scaled_mass", "continuation_decay"))
    check = carl.divergence_identity_residual(w, weight, float(config.carleman_strengths[0]))
    export_table([(check.residual, check.boundary_flux)], out / "carleman_identity.csv",
                 columns=("identity_residual", "boundary_flux"))
    for r in rows:
        print(f"strength={r[0]:g} ratio={r[3]:.6g} decay={r[6]:.3e}")
    print(f"identity residual={check.residual:.3e} wall flux={check.boundary_flux:.3e}")
    return 0


def _cmd_matrix(config: ExperimentConfig, out: Path, workers) -> int:
    manifest = run_theorem1_matrix(config, out_dir=out, workers=workers)
    for row in manifest.cells:
        print(f"{row['cell']}: islands={row['islands']} "
              f"projection={row['projection']:.6g} status={row['status']}")
    return 2 if manifest.failed_cells else 0


def _cmd_render(config: ExperimentConfig, out: Path) -> int:
    vort = parse_vorticity(config.vorticity)
    solution = _solve_cell(config, config.eps, config.gap, vort)
    report = classify_flow(solution, n_centerline=config.n_centerline,
                           seed_grid=tuple(config.seed_grid))
    path = out / "flow.svg"
    render_contours(solution.psi, report.island_orbits, path=path,
                    caption=f"eps={config.eps:g} gap={config.gap:g} islands={report.islands}")
    print(f"wrote {path}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="eulerchannel",
        description="Steady channel equilibria: solvers, topology, diagnostics",
    )
    parser.add_argument("command",
                        choices=["solve", "eigen", "topology", "carleman", "matrix", "render"])
    parser.add_argument("--config", type=str, default=None, help="JSON config path")
    parser.add_argument("--out", type=str, default=None, help="output directory")
    parser.add_argument("--workers", type=int, default=None, help="parallel matrix cells")
    parser.add_argument("--seed", type=int, default=None, help="RNG seed override")
    args = parser.parse_args(argv)

    try:
        config = (ExperimentConfig.from_file(args.config) if args.config
                  else ExperimentConfig())
        if args.seed is not None:
            config = replace(config, seed=args.seed)
        if args.workers is not None:
            config = replace(config, workers=args.workers)
        if args.out is not None:
            config = replace(config, out_dir=args.out)
        config.validate()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.command == "solve":
        return _cmd_solve(config, out)
    if args.command == "eigen":
        return _cmd_eigen(config, out)
    if args.command == "topology":
        return _cmd_topology(config, out)
    if args.command == "carleman":
        return _cmd_carleman(config, out)
    if args.command == "matrix":
        return _cmd_matrix(config, out, config.workers)
    return _cmd_render(config, out)


if __name__ == "__main__":
    sys.exit(main())
