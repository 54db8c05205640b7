"""Command-line driver: run a configured solve and write reports.

Outputs (under ``--out``) are deterministic for a fixed config; wall
times go to ``timing.log`` only.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import cost_model
from .config import ConfigError, RunConfig, echo_config, parse_config
from .mesh import Mesh2D
from .problems import (
    ProblemSpec,
    build_diffusion_limit_problem,
    build_lattice,
    build_line_source,
    convergence_table,
    scalar_flux,
)
from .solver import GMRESOptions, HybridConfig, MonolithicConfig, primary_discretization, solve_steady
from .time_integration import TimeGrid, run_transient

log = logging.getLogger("hybrid_transport")


def method_from_config(m: dict):
    g = GMRESOptions(**m["gmres"])
    if m["kind"] == "hybrid":
        return HybridConfig(m["n_u"], m["n_c"], m["space_u"], m["space_c"], g)
    return MonolithicConfig(m["n"], m["space"], g)


def problem_from_config(p: dict) -> ProblemSpec:
    name = p["name"]
    if name == "diffusion_limit":
        return build_diffusion_limit_problem(p["epsilon"])
    if name == "line_source":
        return build_line_source(p["beta"])
    if name == "lattice":
        return build_lattice()

    def const(v):
        return lambda x, y: np.full(np.shape(x), v)

    def const_t(v):
        return None if v == 0 else (lambda t, x, y, omega: np.full(np.shape(x), v))

    init = None if p["initial"] == 0 else (lambda x, y, omega: np.full(np.shape(x), p["initial"]))
    return ProblemSpec(
        name="custom",
        bounds=tuple(p["bounds"]),
        sigma_t=const(p["sigma_t"]),
        sigma_a=const(p["sigma_a"]),
        eps=p["epsilon"],
        source=const_t(p["source"]),
        boundary=const_t(p["boundary"]),
        initial=init,
        isotropic_source=True,
        isotropic_initial=True,
        steady=p["steady"],
    )


def write_field_csv(phi: np.ndarray, mesh: Mesh2D, path) -> None:
    """``x,y,phi`` rows at cell centres, x fastest, 17 significant digits."""
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (mesh.nx, mesh.ny):
        raise ValueError(f"field shape {phi.shape} does not match mesh ({mesh.nx}, {mesh.ny})")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("x,y,phi\n")
        for k in range(mesh.ny):
            y = mesh.yc[k]
            for j in range(mesh.nx):
                fh.write(f"{mesh.xc[j]:.17g},{y:.17g},{phi[j, k]:.17g}\n")


def read_field_csv(path, mesh: Mesh2D) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 2].reshape(mesh.ny, mesh.nx).T.copy()


def lineouts(phi: np.ndarray, mesh: Mesh2D, quad):
    """Cell-centre samples along ``y = 0`` and along a first-quadrant ordinate ray from the origin."""
    k0 = int(np.argmin(np.abs(mesh.yc)))
    row = [(mesh.xc[j], mesh.yc[k0], phi[j, k0]) for j in range(mesh.nx)]
    az = np.arctan2(quad.oy, quad.ox)
    first = az[(az > 0) & (az < math.pi / 2)]
    theta = float(first[np.argmin(np.abs(first - math.pi / 4))])
    j0 = int(np.argmin(np.abs(mesh.xc)))
    seen, ray = set(), []
    r_max = math.hypot(mesh.bounds[1], mesh.bounds[3])
    for s in np.arange(0.0, r_max, 0.5 * mesh.h):
        x, y = s * math.cos(theta), s * math.sin(theta)
        j = int(math.floor((x - mesh.bounds[0]) / mesh.dx))
        k = int(math.floor((y - mesh.bounds[2]) / mesh.dy))
        if not (0 <= j < mesh.nx and 0 <= k < mesh.ny):
            break
        if (j, k) not in seen:
            seen.add((j, k))
            ray.append((math.hypot(mesh.xc[j] - mesh.xc[j0], mesh.yc[k] - mesh.yc[k0]), mesh.xc[j], mesh.yc[k], phi[j, k]))
    return row, ray, theta


def _write_rows(path, header, rows):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(header + "\n")
        for r in rows:
            fh.write(",".join(f"{v:.17g}" for v in r) + "\n")


def _solve(cfg: RunConfig, problem: ProblemSpec, method, mesh: Mesh2D):
    if problem.steady:
        sol = solve_steady(problem, mesh, method)
        quad = primary_discretization(method, mesh).quad
        return scalar_flux(sol.f, quad), [sol.gmres.iterations]
    t = cfg.time
    dt = t["dt"] if t["dt"] is not None else t["dt_factor"] * mesh.dx
    grid = TimeGrid(dt, t["t_final"])
    res = run_transient(problem, mesh, method, grid, t["integrator"], t["snapshots"])
    iters = [i for s in res.steps for i in s.gmres_iterations]
    if grid.partial_final_step:
        log.info("final time step shortened to %.17g", grid.step_sizes[-1])
    return res.phi, iters, res.snapshots


def run(cfg: RunConfig, out_dir, reports=None, timing_log=None) -> int:
    """Execute ``cfg`` and write the selected reports into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reports = list(cfg.output["reports"] if reports is None else reports)
    timing = []
    (out / "config.echo.yaml").write_text(echo_config(cfg))

    problem = problem_from_config(cfg.problem)
    method = method_from_config(cfg.method)
    mesh = problem.mesh(cfg.mesh["nx"], cfg.mesh["ny"])
    problem.check_materials(mesh)
    summary = [f"problem: {problem.name}", f"method: {method.label}", f"mesh: {mesh.nx}x{mesh.ny}"]

    t0 = time.perf_counter()
    with cost_model.instrument() as counter:
        solved = _solve(cfg, problem, method, mesh)
    phi, iters = solved[0], solved[1]
    timing.append(f"solve_seconds={time.perf_counter() - t0:.3f}")
    summary.append(f"gmres_solves: {len(iters)}")
    if iters:
        summary.append(f"gmres_iterations: total={sum(iters)} max={max(iters)} mean={sum(iters) / len(iters):.3f}")
    summary.append("flop_units: " + " ".join(f"{k}={counter.units[k]}" for k in cost_model.SUBROUTINES))
    summary.append(f"integral_phi: {float(np.sum(phi) * mesh.cell_area):.17g}")

    if "fields" in reports:
        write_field_csv(phi, mesh, out / "phi.csv")
        if len(solved) > 2:
            for s, snap in sorted(solved[2].items()):
                write_field_csv(snap, mesh, out / f"phi_t{s:.6g}.csv")
    if "lineout" in reports:
        quad = primary_discretization(method, mesh).quad
        row, ray, theta = lineouts(phi, mesh, quad)
        _write_rows(out / "lineout_y0.csv", "x,y,phi", row)
        _write_rows(out / "lineout_ray.csv", "r,x,y,phi", ray)
        summary.append(f"lineout_ray_angle: {theta:.17g}")
    if "table" in reports:
        if cfg.table is None:
            raise ConfigError("table: report requested but no table section given")
        if not problem.steady:
            raise ConfigError("table: convergence tables need a steady problem")
        t1 = time.perf_counter()
        ref = method_from_config(cfg.table["reference"]["method"])
        table = convergence_table(problem, method, cfg.table["cells"], ref, cfg.table["reference"]["cells"])
        (out / "table.csv").write_text(table.format() + "\n")
        timing.append(f"table_seconds={time.perf_counter() - t1:.3f}")
    if "cost" in reports:
        (out / "cost.txt").write_text(_cost_report(method, mesh, counter))

    (out / "summary.txt").write_text("\n".join(summary) + "\n")
    log_path = Path(timing_log) if timing_log is not None else out / "timing.log"
    log_path.write_text("\n".join(timing) + "\n")
    for line in summary:
        print(line)
    return 0


def _cost_report(method, mesh: Mesh2D, counter) -> str:
    if isinstance(method, HybridConfig):
        key = f"{method.space_u}-{method.space_c}"
        kw = {"n_u": method.n_u**2, "n_c": method.n_c**2}
    else:
        key = method.space
        kw = {"n_star": method.n**2}
    lines = [f"method_class: {key}", f"cells: {mesh.n_cells}"]
    if key in cost_model.METHODS:
        lines.append(f"flops_per_cell: {cost_model.flops_per_cell(key, 'Cartesian', 2, **kw)}")
        lines.append(f"dof_per_cell: {cost_model.dof_per_cell(key, 'Cartesian', 2, **kw)}")
        lines.append(f"predicted_memory_mb: {cost_model.predict_memory(key, mesh.n_cells, 2, **kw):.6f}")
    for k in cost_model.SUBROUTINES:
        lines.append(f"measured_{k}_units: {counter.units[k]}")
        lines.append(f"measured_{k}_calls: {counter.calls[k]}")
    return "\n".join(lines) + "\n"


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="hybrid-transport", description=__doc__.splitlines()[0])
    ap.add_argument("--config", required=True, help="YAML run configuration")
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("--report", action="append", choices=("fields", "table", "cost", "lineout"),
                    help="report to emit (repeatable); overrides output.reports")
    ap.add_argument("--threads", type=int, default=None, help="numba worker threads (speed only)")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = parse_config(Path(args.config).read_text())
        if args.threads is not None:
            import numba

            if args.threads < 1:
                raise ConfigError("--threads: must be positive")
            numba.set_num_threads(min(args.threads, numba.config.NUMBA_NUM_THREADS))
        return run(cfg, args.out, args.report)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # solver failures
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
