"""Run configuration: YAML schema, validation and canonical echo.

Schema (all sections optional except ``problem``)::

    problem:
      name: diffusion_limit | line_source | lattice | custom
      epsilon: 1.0          # diffusion_limit
      beta: 0.09            # line_source
      # custom only: bounds, sigma_t, sigma_a, source, boundary, initial, steady
    method:
      kind: hybrid | monolithic
      space_u: FV           # hybrid
      space_c: DG
      n_u: 8
      n_c: 4
      space: DG             # monolithic
      n: 8
      gmres: {tol: 1.0e-8, restart: 30, maxit: 200}
    mesh: {cells: 64}       # or nx/ny
    time:
      integrator: backward_euler | dirk2
      dt_factor: 5.0        # dt = dt_factor * dx, or give dt
      dt: null
      t_final: 1.0
      snapshots: []
    table:
      cells: [16, 32, 64]
      reference: {method: {...}, cells: 128}
    output:
      reports: [fields]     # any of fields, table, cost, lineout
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

import yaml

PROBLEMS = ("diffusion_limit", "line_source", "lattice", "custom")
REPORTS = ("fields", "table", "cost", "lineout")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


def _defaults_method():
    return {
        "kind": "hybrid",
        "space_u": "FV",
        "space_c": "DG",
        "n_u": 8,
        "n_c": 4,
        "space": "DG",
        "n": 8,
        "gmres": {"tol": 1e-8, "restart": 30, "maxit": 200},
    }


_PROBLEM_DEFAULTS = {
    "diffusion_limit": {"epsilon": 1.0},
    "line_source": {"beta": 0.09, "t_final": 1.0, "dt_factor": 5.0},
    "lattice": {"t_final": 2.8, "dt_factor": 10.0},
    "custom": {
        "bounds": [0.0, 1.0, 0.0, 1.0],
        "epsilon": 1.0,
        "sigma_t": 1.0,
        "sigma_a": 0.0,
        "source": 0.0,
        "boundary": 0.0,
        "initial": 0.0,
        "steady": True,
        "t_final": 0.0,
        "dt_factor": 1.0,
    },
}

_PROBLEM_KEYS = {
    "diffusion_limit": {"name", "epsilon"},
    "line_source": {"name", "beta"},
    "lattice": {"name"},
    "custom": {"name", "bounds", "epsilon", "sigma_t", "sigma_a", "source", "boundary", "initial", "steady"},
}


def _check_keys(section: dict, allowed, path: str):
    if not isinstance(section, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(section).__name__}")
    for key in section:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}: unknown key (allowed: {', '.join(sorted(allowed))})")


def _num(value, path, kind=float, positive=False, nonneg=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    if kind is int and int(value) != value:
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    value = kind(value)
    if positive and not value > 0:
        raise ConfigError(f"{path}: must be positive, got {value!r}")
    if nonneg and value < 0:
        raise ConfigError(f"{path}: must be nonnegative, got {value!r}")
    return value


def _order(value, path):
    v = _num(value, path, int, positive=True)
    if v % 2:
        raise ConfigError(f"{path}: quadrature order must be even, got {v}")
    return v


def _space(value, path):
    if value not in ("FV", "DG"):
        raise ConfigError(f"{path}: expected FV or DG, got {value!r}")
    return value


def _method(raw, path):
    raw = {} if raw is None else raw
    _check_keys(raw, set(_defaults_method()), path)
    m = _defaults_method()
    gm = dict(m["gmres"])
    if "gmres" in raw:
        _check_keys(raw["gmres"], set(gm), f"{path}.gmres")
        gm.update(raw["gmres"])
    m.update({k: v for k, v in raw.items() if k != "gmres"})
    if m["kind"] not in ("hybrid", "monolithic"):
        raise ConfigError(f"{path}.kind: expected hybrid or monolithic, got {m['kind']!r}")
    tol = _num(gm["tol"], f"{path}.gmres.tol", positive=True)
    if tol >= 1:
        raise ConfigError(f"{path}.gmres.tol: must be below 1, got {tol}")
    out = {"kind": m["kind"], "gmres": {
        "tol": tol,
        "restart": _num(gm["restart"], f"{path}.gmres.restart", int, positive=True),
        "maxit": _num(gm["maxit"], f"{path}.gmres.maxit", int, positive=True),
    }}
    if m["kind"] == "hybrid":
        out.update(
            space_u=_space(m["space_u"], f"{path}.space_u"),
            space_c=_space(m["space_c"], f"{path}.space_c"),
            n_u=_order(m["n_u"], f"{path}.n_u"),
            n_c=_order(m["n_c"], f"{path}.n_c"),
        )
    else:
        out.update(space=_space(m["space"], f"{path}.space"), n=_order(m["n"], f"{path}.n"))
    return out


def _mesh(raw, path):
    raw = {"cells": 32} if raw is None else raw
    _check_keys(raw, {"cells", "nx", "ny"}, path)
    if "cells" in raw:
        if "nx" in raw or "ny" in raw:
            raise ConfigError(f"{path}: give either cells or nx/ny, not both")
        n = _num(raw["cells"], f"{path}.cells", int, positive=True)
        return {"nx": n, "ny": n}
    if "nx" not in raw or "ny" not in raw:
        raise ConfigError(f"{path}: missing required field nx/ny (or cells)")
    return {"nx": _num(raw["nx"], f"{path}.nx", int, positive=True),
            "ny": _num(raw["ny"], f"{path}.ny", int, positive=True)}


def _problem(raw, path):
    if raw is None:
        raise ConfigError(f"{path}: missing required section")
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a mapping")
    if "name" not in raw:
        raise ConfigError(f"{path}.name: missing required field")
    name = raw["name"]
    if name not in PROBLEMS:
        raise ConfigError(f"{path}.name: expected one of {PROBLEMS}, got {name!r}")
    _check_keys(raw, _PROBLEM_KEYS[name], path)
    out = {"name": name}
    for k in _PROBLEM_KEYS[name] - {"name"}:
        out[k] = raw.get(k, _PROBLEM_DEFAULTS[name][k])
    if "epsilon" in out:
        eps = _num(out["epsilon"], f"{path}.epsilon", positive=True)
        if eps > 1:
            raise ConfigError(f"{path}.epsilon: must lie in (0, 1], got {eps}")
        out["epsilon"] = eps
    if "beta" in out:
        out["beta"] = _num(out["beta"], f"{path}.beta", positive=True)
    if name == "custom":
        b = out["bounds"]
        if not isinstance(b, (list, tuple)) or len(b) != 4:
            raise ConfigError(f"{path}.bounds: expected [x0, x1, y0, y1]")
        out["bounds"] = [_num(v, f"{path}.bounds[{i}]") for i, v in enumerate(b)]
        for k in ("sigma_t", "sigma_a", "source", "boundary", "initial"):
            out[k] = _num(out[k], f"{path}.{k}", nonneg=k in ("sigma_t", "sigma_a"))
        if not isinstance(out["steady"], bool):
            raise ConfigError(f"{path}.steady: expected true or false")
    return out


def _time(raw, path, problem):
    defaults = _PROBLEM_DEFAULTS[problem["name"]]
    raw = {} if raw is None else raw
    _check_keys(raw, {"integrator", "dt_factor", "dt", "t_final", "snapshots"}, path)
    out = {
        "integrator": raw.get("integrator", "backward_euler"),
        "dt_factor": raw.get("dt_factor", defaults.get("dt_factor")),
        "dt": raw.get("dt"),
        "t_final": raw.get("t_final", defaults.get("t_final", 0.0)),
        "snapshots": list(raw.get("snapshots", [])),
    }
    if out["integrator"] not in ("backward_euler", "dirk2"):
        raise ConfigError(f"{path}.integrator: expected backward_euler or dirk2, got {out['integrator']!r}")
    if out["dt"] is not None:
        out["dt"] = _num(out["dt"], f"{path}.dt", positive=True)
        out["dt_factor"] = None
    elif out["dt_factor"] is not None:
        out["dt_factor"] = _num(out["dt_factor"], f"{path}.dt_factor", positive=True)
    out["t_final"] = _num(out["t_final"], f"{path}.t_final", nonneg=True)
    out["snapshots"] = [_num(s, f"{path}.snapshots[{i}]", nonneg=True) for i, s in enumerate(out["snapshots"])]
    return out


def _table(raw, path):
    if raw is None:
        return None
    _check_keys(raw, {"cells", "reference"}, path)
    if "cells" not in raw:
        raise ConfigError(f"{path}.cells: missing required field")
    cells = raw["cells"]
    if not isinstance(cells, list) or not cells:
        raise ConfigError(f"{path}.cells: expected a nonempty list")
    cells = [_num(c, f"{path}.cells[{i}]", int, positive=True) for i, c in enumerate(cells)]
    ref = raw.get("reference")
    if ref is None:
        raise ConfigError(f"{path}.reference: missing required field")
    _check_keys(ref, {"method", "cells"}, f"{path}.reference")
    if "cells" not in ref:
        raise ConfigError(f"{path}.reference.cells: missing required field")
    rc = _num(ref["cells"], f"{path}.reference.cells", int, positive=True)
    for c in cells:
        if rc % c:
            raise ConfigError(f"{path}.reference.cells: {rc} is not a multiple of {c}")
    return {"cells": cells, "reference": {"method": _method(ref.get("method"), f"{path}.reference.method"), "cells": rc}}


def _output(raw, path):
    raw = {} if raw is None else raw
    _check_keys(raw, {"reports"}, path)
    reports = raw.get("reports", ["fields"])
    if not isinstance(reports, list):
        raise ConfigError(f"{path}.reports: expected a list")
    for i, r in enumerate(reports):
        if r not in REPORTS:
            raise ConfigError(f"{path}.reports[{i}]: expected one of {REPORTS}, got {r!r}")
    return {"reports": list(reports)}


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run description (plain nested dicts)."""

    problem: dict
    method: dict
    mesh: dict
    time: dict
    table: dict | None
    output: dict

    def as_dict(self) -> dict:
        return {
            "problem": copy.deepcopy(self.problem),
            "method": copy.deepcopy(self.method),
            "mesh": copy.deepcopy(self.mesh),
            "time": copy.deepcopy(self.time),
            "table": copy.deepcopy(self.table),
            "output": copy.deepcopy(self.output),
        }


SECTIONS = ("problem", "method", "mesh", "time", "table", "output")


def parse_config_dict(data) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config: top level must be a mapping")
    _check_keys(data, set(SECTIONS), "config")
    problem = _problem(data.get("problem"), "problem")
    return RunConfig(
        problem=problem,
        method=_method(data.get("method"), "method"),
        mesh=_mesh(data.get("mesh"), "mesh"),
        time=_time(data.get("time"), "time", problem),
        table=_table(data.get("table"), "table"),
        output=_output(data.get("output"), "output"),
    )


def parse_config(text: str) -> RunConfig:
    """Parse and validate YAML text; errors name the line or field."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}: " if mark is not None else ""
        raise ConfigError(f"{where}invalid YAML ({getattr(exc, 'problem', exc)})") from exc
    return parse_config_dict(data)


def echo_config(cfg: RunConfig) -> str:
    """Canonical YAML of the resolved configuration."""
    return yaml.safe_dump(cfg.as_dict(), sort_keys=True, default_flow_style=False)
