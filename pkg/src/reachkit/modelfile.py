"""Problem descriptions as JSON files.

One format covers the four pipelines: bounded-time reach, invariant-
constrained reach, the one-step polyhedral enclosure, and hybrid
reachability. Sets are written as explicit halfspace rows (``[a1..an, b]``
meaning a.x <= b) or as a box shorthand; dynamics as a matrix or as
expression strings. Loading validates the schema and cross-checks every
dimension before any computation starts; serializing normalizes rows to
unit normals, so load -> save is a fixed point up to row scaling.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelError
from .facelift import LevelSet
from .flow import ExpressionDynamics, LinearDynamics
from .geometry import Face, Halfspace, Polyhedron
from .hybrid import Edge, HybridSystem

__all__ = [
    "ModelFile",
    "load_model",
    "parse_model",
    "model_to_dict",
    "save_model",
    "bundled_model_path",
]

SCHEMA_VERSION = 1
KINDS = ("reach", "reach-inv", "polyapprox", "hybrid")

_TOP_KEYS = {
    "schema",
    "kind",
    "dynamics",
    "initial",
    "invariant",
    "face",
    "locations",
    "edges",
    "init",
    "target",
    "grid",
    "flags",
}
_GRID_KEYS = {"tau", "dt", "cell", "boundary_spacing", "delta", "delta0"}
_FLAG_KEYS = {"under_approximate", "bound_mode", "max_iters", "max_k"}


def _need(cond, msg):
    if not cond:
        raise ModelError(msg)


def _float_list(values, where):
    try:
        out = [float(v) for v in values]
    except (TypeError, ValueError):
        raise ModelError(f"{where}: expected a list of numbers") from None
    return out


def _rows_to_halfspaces(rows, where):
    out = []
    for i, row in enumerate(rows):
        vals = _float_list(row, f"{where} row {i}")
        _need(len(vals) >= 2, f"{where} row {i}: need coefficients plus an offset")
        out.append(Halfspace(np.array(vals[:-1]), vals[-1]))
    return tuple(out)


def _poly_from_spec(spec, where) -> Polyhedron:
    _need(isinstance(spec, dict), f"{where}: expected an object")
    if "box" in spec:
        box = spec["box"]
        _need(
            isinstance(box, list) and len(box) == 2,
            f"{where}: box needs [lo, hi] corner lists",
        )
        lo = _float_list(box[0], f"{where} box lo")
        hi = _float_list(box[1], f"{where} box hi")
        _need(len(lo) == len(hi), f"{where}: box corners disagree on dimension")
        try:
            return Polyhedron.box(lo, hi)
        except Exception as exc:
            raise ModelError(f"{where}: {exc}") from None
    _need("rows" in spec, f"{where}: needs either 'box' or 'rows'")
    ineqs = _rows_to_halfspaces(spec["rows"], where)
    eqs = _rows_to_halfspaces(spec.get("eq_rows", []), f"{where} eq")
    _need(len(ineqs) + len(eqs) > 0, f"{where}: no rows given")
    dims = {h.normal.size for h in ineqs + eqs}
    _need(len(dims) == 1, f"{where}: rows disagree on dimension")
    return Polyhedron(ineqs, eqs)


def _poly_to_spec(P: Polyhedron) -> dict:
    spec = {"rows": [[*h.unit().normal.tolist(), float(h.unit().offset)] for h in P.ineqs]}
    if P.eqs:
        spec["eq_rows"] = [
            [*h.unit().normal.tolist(), float(h.unit().offset)] for h in P.eqs
        ]
    return spec


def _set_from_spec(spec, where):
    _need(isinstance(spec, dict), f"{where}: expected an object")
    if "levelset" in spec:
        _need(
            "lo" in spec and "hi" in spec,
            f"{where}: a level set needs its 'lo'/'hi' sampling box",
        )
        try:
            return LevelSet(
                str(spec["levelset"]),
                _float_list(spec["lo"], f"{where} lo"),
                _float_list(spec["hi"], f"{where} hi"),
            )
        except ModelError:
            raise
        except Exception as exc:
            raise ModelError(f"{where}: {exc}") from None
    return _poly_from_spec(spec, where)


def _set_to_spec(s) -> dict:
    if isinstance(s, LevelSet):
        return {
            "levelset": str(s.func),
            "lo": s.lo.tolist(),
            "hi": s.hi.tolist(),
        }
    return _poly_to_spec(s)


def _dyn_from_spec(spec, where):
    _need(isinstance(spec, dict), f"{where}: expected an object")
    if "matrix" in spec:
        try:
            M = np.array(spec["matrix"], float)
        except (TypeError, ValueError):
            raise ModelError(f"{where}: matrix rows must be numeric") from None
        _need(M.ndim == 2 and M.shape[0] == M.shape[1], f"{where}: matrix must be square")
        return LinearDynamics(M)
    _need("expressions" in spec, f"{where}: needs 'matrix' or 'expressions'")
    exprs = spec["expressions"]
    _need(
        isinstance(exprs, list) and all(isinstance(e, str) for e in exprs),
        f"{where}: expressions must be a list of strings",
    )
    try:
        return ExpressionDynamics.parse(exprs)
    except Exception as exc:
        raise ModelError(f"{where}: {exc}") from None


def _dyn_to_spec(dyn) -> dict:
    if isinstance(dyn, LinearDynamics):
        return {"matrix": dyn.matrix.tolist()}
    return {"expressions": [str(c) for c in dyn.components]}


def _face_from_spec(spec, where) -> Face:
    _need(isinstance(spec, dict), f"{where}: expected an object")
    _need("sides" in spec and "base" in spec, f"{where}: needs 'sides' and 'base' rows")
    sides = _rows_to_halfspaces(spec["sides"], f"{where} sides")
    base_vals = _float_list(spec["base"], f"{where} base")
    _need(len(base_vals) >= 2, f"{where}: base row needs coefficients plus an offset")
    try:
        face = Face(
            np.array([h.normal for h in sides]),
            np.array([h.offset for h in sides]),
            np.array(base_vals[:-1]),
            base_vals[-1],
        )
    except Exception as exc:
        raise ModelError(f"{where}: {exc}") from None
    if face.check_orthonormal(tol=1e-9):
        face = Face(
            face.side_normals, face.side_offsets, face.base_normal, face.base_offset,
            orthonormal=True,
        )
    return face


def _face_to_spec(face: Face) -> dict:
    return {
        "sides": [
            [*face.side_normals[i].tolist(), float(face.side_offsets[i])]
            for i in range(face.side_normals.shape[0])
        ],
        "base": [*face.base_normal.tolist(), float(face.base_offset)],
    }


def _check_keys(data, allowed, where):
    extra = set(data) - allowed
    _need(not extra, f"{where}: unknown keys {sorted(extra)}")


@dataclass
class ModelFile:
    """A parsed problem file; which fields are set depends on the kind."""

    kind: str
    schema: int = SCHEMA_VERSION
    dynamics: object = None
    initial: object = None
    invariant: Polyhedron = None
    face: Face = None
    system: HybridSystem = None
    targets: tuple = ()
    grid: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    path: str = None

    def grid_value(self, key, default=None):
        v = self.grid.get(key)
        return default if v is None else float(v)

    def flag(self, key, default=None):
        v = self.flags.get(key)
        return default if v is None else v


def _dim_of(s):
    return s.dim


def parse_model(data, path=None) -> ModelFile:
    _need(isinstance(data, dict), "model root must be an object")
    _check_keys(data, _TOP_KEYS, "model")
    schema = data.get("schema")
    _need(
        schema == SCHEMA_VERSION,
        f"unsupported schema {schema!r}; this build reads version {SCHEMA_VERSION}",
    )
    kind = data.get("kind")
    _need(kind in KINDS, f"unknown problem kind {kind!r}; expected one of {KINDS}")

    grid = data.get("grid", {})
    _need(isinstance(grid, dict), "grid: expected an object")
    _check_keys(grid, _GRID_KEYS, "grid")
    for key, val in grid.items():
        _need(isinstance(val, (int, float)), f"grid.{key}: expected a number")
    flags = data.get("flags", {})
    _need(isinstance(flags, dict), "flags: expected an object")
    _check_keys(flags, _FLAG_KEYS, "flags")
    if "bound_mode" in flags:
        _need(
            flags["bound_mode"] in ("sampled", "conservative"),
            "flags.bound_mode: expected 'sampled' or 'conservative'",
        )
    for key in ("max_iters", "max_k"):
        if flags.get(key) is not None:
            _need(isinstance(flags[key], int), f"flags.{key}: expected an integer")
    if "under_approximate" in flags:
        _need(
            isinstance(flags["under_approximate"], bool),
            "flags.under_approximate: expected a boolean",
        )

    m = ModelFile(kind=kind, schema=schema, grid=dict(grid), flags=dict(flags), path=path)

    if kind == "hybrid":
        locs = data.get("locations")
        _need(
            isinstance(locs, list) and locs,
            "hybrid model needs a nonempty 'locations' list",
        )
        names, invariants, dynamics = [], {}, {}
        for i, loc in enumerate(locs):
            _need(isinstance(loc, dict), f"locations[{i}]: expected an object")
            _check_keys(loc, {"name", "invariant", "dynamics"}, f"locations[{i}]")
            name = loc.get("name")
            _need(isinstance(name, str) and name, f"locations[{i}]: needs a name")
            _need(name not in invariants, f"duplicate location {name!r}")
            names.append(name)
            invariants[name] = _poly_from_spec(
                loc.get("invariant"), f"locations[{i}].invariant"
            )
            dynamics[name] = _dyn_from_spec(
                loc.get("dynamics"), f"locations[{i}].dynamics"
            )
        edges = []
        for i, spec in enumerate(data.get("edges", [])):
            _need(isinstance(spec, dict), f"edges[{i}]: expected an object")
            _check_keys(
                spec,
                {"from", "to", "event", "guard", "reset_matrix", "reset_offset", "controllable"},
                f"edges[{i}]",
            )
            for key in ("from", "to", "event", "guard"):
                _need(key in spec, f"edges[{i}]: missing {key!r}")
            R = spec.get("reset_matrix")
            c = spec.get("reset_offset")
            try:
                edges.append(
                    Edge(
                        source=str(spec["from"]),
                        guard=_poly_from_spec(spec["guard"], f"edges[{i}].guard"),
                        event=str(spec["event"]),
                        target=str(spec["to"]),
                        reset_matrix=None if R is None else np.array(R, float),
                        reset_offset=None if c is None else np.array(c, float),
                        controllable=bool(spec.get("controllable", False)),
                    )
                )
            except ModelError:
                raise
            except Exception as exc:
                raise ModelError(f"edges[{i}]: {exc}") from None
        init = []
        for i, spec in enumerate(data.get("init", [])):
            _need(isinstance(spec, dict), f"init[{i}]: expected an object")
            _check_keys(spec, {"location", "set"}, f"init[{i}]")
            init.append(
                (str(spec.get("location")), _poly_from_spec(spec.get("set"), f"init[{i}].set"))
            )
        _need(init, "hybrid model needs a nonempty 'init' list")
        try:
            m.system = HybridSystem(tuple(names), invariants, dynamics, tuple(edges), tuple(init))
        except ModelError:
            raise
        targets = []
        for i, spec in enumerate(data.get("target", [])):
            _need(isinstance(spec, dict), f"target[{i}]: expected an object")
            _check_keys(spec, {"location", "set"}, f"target[{i}]")
            q = str(spec.get("location"))
            _need(q in invariants, f"target[{i}] names unknown location {q!r}")
            P = _poly_from_spec(spec.get("set"), f"target[{i}].set")
            _need(P.dim == m.system.dim, f"target[{i}]: wrong dimension")
            targets.append((q, P))
        m.targets = tuple(targets)
        _need(grid.get("dt"), "hybrid model needs grid.dt")
        _need(grid.get("cell"), "hybrid model needs grid.cell")
        return m

    _need("dynamics" in data, f"{kind} model needs a 'dynamics' section")
    m.dynamics = _dyn_from_spec(data["dynamics"], "dynamics")

    if kind == "polyapprox":
        _need(
            isinstance(m.dynamics, LinearDynamics),
            "polyapprox: dynamics must be a matrix",
        )
        _need("face" in data, "polyapprox model needs a 'face' section")
        m.face = _face_from_spec(data["face"], "face")
        _need(
            m.face.dim == m.dynamics.matrix.shape[0],
            "face and matrix disagree on dimension",
        )
        _need(grid.get("delta"), "polyapprox model needs grid.delta")
        return m

    _need("initial" in data, f"{kind} model needs an 'initial' section")
    m.initial = _set_from_spec(data["initial"], "initial")
    dyn_dim = m.dynamics.dim
    _need(_dim_of(m.initial) == dyn_dim, "initial set and dynamics disagree on dimension")

    if "invariant" in data:
        m.invariant = _poly_from_spec(data["invariant"], "invariant")
        _need(m.invariant.dim == dyn_dim, "invariant and dynamics disagree on dimension")

    if kind == "reach":
        _need(grid.get("tau") is not None, "reach model needs grid.tau")
        _need(float(grid["tau"]) >= 0.0, "grid.tau must be nonnegative")
    else:  # reach-inv
        _need(m.invariant is not None, "reach-inv model needs an 'invariant' section")
        _need(grid.get("dt"), "reach-inv model needs grid.dt")
    return m


def bundled_model_path(name: str) -> str:
    """Absolute path of a model shipped inside the package."""
    path = os.path.join(os.path.dirname(__file__), "models", name)
    if not os.path.exists(path):
        raise ModelError(f"no bundled model named {name!r}")
    return path


def load_model(path) -> ModelFile:
    if not os.path.exists(path):
        raise ModelError(f"model file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"model file is not valid JSON: {exc}") from None
    return parse_model(data, path=str(path))


def model_to_dict(m: ModelFile) -> dict:
    out = {"schema": m.schema, "kind": m.kind}
    if m.kind == "hybrid":
        H = m.system
        out["locations"] = [
            {
                "name": q,
                "invariant": _poly_to_spec(H.invariants[q]),
                "dynamics": _dyn_to_spec(H.dynamics[q]),
            }
            for q in H.locations
        ]
        out["edges"] = [
            {
                "from": e.source,
                "to": e.target,
                "event": e.event,
                "guard": _poly_to_spec(e.guard),
                "reset_matrix": e.reset_matrix.tolist(),
                "reset_offset": e.reset_offset.tolist(),
                "controllable": e.controllable,
            }
            for e in H.edges
        ]
        out["init"] = [
            {"location": q, "set": _poly_to_spec(P)} for q, P in H.init
        ]
        if m.targets:
            out["target"] = [
                {"location": q, "set": _poly_to_spec(P)} for q, P in m.targets
            ]
    else:
        out["dynamics"] = _dyn_to_spec(m.dynamics)
        if m.kind == "polyapprox":
            out["face"] = _face_to_spec(m.face)
        else:
            out["initial"] = _set_to_spec(m.initial)
            if m.invariant is not None:
                out["invariant"] = _poly_to_spec(m.invariant)
    if m.grid:
        out["grid"] = dict(m.grid)
    if m.flags:
        out["flags"] = dict(m.flags)
    return out


def save_model(m: ModelFile, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(m), fh, indent=2, sort_keys=True)
        fh.write("\n")
