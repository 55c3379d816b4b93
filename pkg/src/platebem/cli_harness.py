"""Convergence studies on uniformly refined meshes and the command-line driver."""

from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .assembly import (
    QuadratureConfig,
    assemble_K,
    assemble_mass_pair,
    assemble_multiplier,
    assemble_V,
    dump_matrix,
)
from .geometry import DomainSpec, build_initial_mesh, refine_uniform
from .kernels import PlateModel
from .manufactured import manufactured_case
from .solver_errors import SaddleSystem, energy_error, solve
from .trace_spaces import (
    DirichletSpace,
    exact_neumann_trace,
    interpolate_Ih,
    neumann_space,
    project_neumann_components,
    project_Pih,
    reference_layout,
)


@dataclass(frozen=True)
class StudyConfig:
    domain: str
    p: int
    levels: int
    nu: float = 0.0
    projection: str = "pih"
    quad: QuadratureConfig = field(default_factory=QuadratureConfig)
    out: Path | None = None
    dump_matrices: bool = False
    scale: float = 0.1

    def __post_init__(self):
        if self.levels < 2:
            raise ValueError("a study needs at least two levels")
        if self.p < 0:
            raise ValueError("degree must be nonnegative")
        if self.projection not in ("pih", "ih"):
            raise ValueError("projection must be 'pih' or 'ih'")
        if self.domain not in ("circle", "square", "pacman"):
            raise ValueError(f"no manufactured solution for domain {self.domain!r}")


@dataclass(frozen=True)
class StudyRow:
    level: int
    dofs: int
    error: float
    rate: float | None


def fitted_slope(dofs: Sequence[float], errs: Sequence[float]) -> float:
    """Least-squares slope of log(err) against log(dofs)."""
    return float(np.polyfit(np.log(dofs), np.log(errs), 1)[0])


def run_study(config: StudyConfig, progress: Callable[[StudyRow], None] | None = None) -> list[StudyRow]:
    model = PlateModel(config.nu)
    case = manufactured_case(config.domain)
    g = case.trace()
    mesh = build_initial_mesh(DomainSpec(config.domain, config.scale))
    rows: list[StudyRow] = []
    for level in range(config.levels):
        if level:
            mesh = refine_uniform(mesh)
        try:
            X = neumann_space(mesh, config.p)
            Y = DirichletSpace(mesh, config.p)
            A = assemble_V(X, model=model, quad=config.quad).entries
            B = assemble_multiplier(X).entries
            K = assemble_K(X, Y, model, config.quad).entries
            M = assemble_mass_pair(X, Y).entries
            g_h = project_Pih(g, Y) if config.projection == "pih" else interpolate_Ih(g, Y)
            rhs = (K + 0.5 * M) @ g_h.values
            sol = solve(SaddleSystem(A, B, rhs, X))
            R = reference_layout(mesh, config.p)
            ref = project_neumann_components(exact_neumann_trace(case, model, mesh), R)
            A_ref = assemble_V(R, model=model, quad=config.quad).entries
            err = energy_error(sol.m_h, ref, A_ref=A_ref)
        except Exception as exc:
            raise RuntimeError(f"level {level}: {exc}") from exc
        if config.dump_matrices and config.out is not None:
            d = Path(config.out) / f"matrices_{config.domain}_p{config.p}_level{level}"
            d.mkdir(parents=True, exist_ok=True)
            for name, mat in (("A", A), ("B", B), ("K", K), ("M", M), ("rhs", rhs[:, None])):
                dump_matrix(mat, d / f"{name}.txt")
        rate = None
        if rows and err > 0 and rows[-1].error > 0:
            rate = math.log(err / rows[-1].error) / math.log(X.dim / rows[-1].dofs)
        row = StudyRow(level, X.dim, err, rate)
        rows.append(row)
        if progress:
            progress(row)
    return rows


def csv_name(domain: str, p: int) -> str:
    return f"geo-{domain}_sol-{manufactured_case(domain).name}_p-{p}_q-{p}.csv"


def emit_csv(rows: Sequence[StudyRow], path: str | Path) -> Path:
    """Write ``dofs,errs`` rows with 17 significant digits."""
    if not rows:
        raise ValueError("no rows to write")
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["dofs", "errs"])
        for r in rows:
            w.writerow([r.dofs, f"{r.error:.17g}"])
    return path


def read_csv(path: str | Path) -> list[tuple[int, float]]:
    with Path(path).open() as fh:
        rd = csv.DictReader(fh)
        return [(int(r["dofs"]), float(r["errs"])) for r in rd]


def expected_slope(p: int) -> float:
    """Predicted energy-error slope against dofs, ``-(p + 3/2)``."""
    return -(p + 1.5)


def emit_gnuplot_annotations(rows: Sequence[StudyRow], p: int, path: str | Path) -> Path:
    """Reference slope triangle below the last two data points, as gnuplot commands."""
    if len(rows) < 2:
        raise ValueError("need two rows for a slope triangle")
    x0, x1 = rows[-2].dofs, rows[-1].dofs
    y0 = rows[-2].error / 3.0
    y1 = y0 * (x1 / x0) ** expected_slope(p)
    lines = [
        "# reference slope triangle",
        f"set arrow from {x0},{y0:.17g} to {x1},{y0:.17g} nohead",
        f"set arrow from {x1},{y0:.17g} to {x1},{y1:.17g} nohead",
        f"set arrow from {x0},{y0:.17g} to {x1},{y1:.17g} nohead",
        f'set label "O(dofs^{{{expected_slope(p):g}}})" at {x1},{y1:.17g} right offset 0,-1',
    ]
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="platebem", description="Clamped-plate BEM convergence study.")
    ap.add_argument("--domain", choices=("circle", "square", "pacman"), required=True)
    ap.add_argument("--p", type=int, default=0, help="polynomial degree (default 0)")
    ap.add_argument("--levels", type=int, default=None, help="refinement levels (default 5)")
    ap.add_argument("--nu", type=float, default=0.0, help="Poisson ratio (default 0)")
    ap.add_argument("--projection", choices=("pih", "ih"), default="pih")
    ap.add_argument("--out", type=Path, default=Path("."), help="output directory")
    ap.add_argument("--quad-order", type=int, default=None, help="Gauss points per element for regular pairs")
    ap.add_argument("--dump-matrices", action="store_true", help="write A, B, K, M and rhs per level")
    ap.add_argument("--annotations", action="store_true", help="also write a gnuplot slope-triangle file")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        quad = QuadratureConfig() if args.quad_order is None else QuadratureConfig(gauss=args.quad_order)
        config = StudyConfig(
            domain=args.domain,
            p=args.p,
            levels=5 if args.levels is None else args.levels,
            nu=args.nu,
            projection=args.projection,
            quad=quad,
            out=args.out,
            dump_matrices=args.dump_matrices,
        )
        PlateModel(config.nu)
    except ValueError as exc:
        print(f"platebem: error: {exc}", file=sys.stderr)
        return 2

    print(f"{'level':>5} {'dofs':>7} {'error':>24} {'rate':>8}")

    def show(row: StudyRow):
        rate = "" if row.rate is None else f"{row.rate:8.3f}"
        print(f"{row.level:5d} {row.dofs:7d} {row.error:24.17g} {rate}", flush=True)

    try:
        rows = run_study(config, progress=show)
        args.out.mkdir(parents=True, exist_ok=True)
        path = emit_csv(rows, args.out / csv_name(config.domain, config.p))
        if args.annotations:
            emit_gnuplot_annotations(rows, config.p, path.with_suffix(".gp"))
    except (RuntimeError, ValueError, OSError) as exc:
        print(f"platebem: error: {exc}", file=sys.stderr)
        return 1
    tail = rows[-4:]
    slope = fitted_slope([r.dofs for r in tail], [r.error for r in tail])
    print(f"slope over last {len(tail)} levels: {slope:.3f} (expected {expected_slope(config.p):g})")
    print(f"wrote {path}")
    return 0
