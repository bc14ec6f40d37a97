"""JSON problem specifications with strict validation.

Configs are plain JSON documents.  Every key is optional and falls back
to a documented default (see the README config reference); unknown keys
are rejected so that typos fail fast, and every validation message
names the offending key path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .forward import Control, ModelParams, TimeGrid, solve_forward
from .functional import CostWeights, DesiredStates
from .grid import Grid, ScalarField, build_grid
from .optimizer import AdmissibleSet, BoxSet, FreeSet, OptimizeOptions

__all__ = ["ConfigError", "ProblemSpec", "parse_config", "load_config"]


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


def _expect_object(node, path):
    if not isinstance(node, dict):
        raise ConfigError(f"{path}: expected an object")
    return node


def _reject_unknown(node: dict, allowed, path):
    for key in node:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}: unknown key" if path else f"{key}: unknown key")


def _get_number(node, key, path, default, *, minimum=None, positive=False,
                integer=False):
    value = node.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}.{key}: expected a number")
    if integer:
        if int(value) != value:
            raise ConfigError(f"{path}.{key}: expected an integer")
        value = int(value)
    else:
        value = float(value)
    if positive and value <= 0:
        raise ConfigError(f"{path}.{key}: must be positive")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{path}.{key}: must be at least {minimum}")
    return value


def _get_rect(node, key, path):
    rect = node.get(key)
    if rect is None:
        return None
    if (not isinstance(rect, list) or len(rect) != 4
            or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in rect)):
        raise ConfigError(f"{path}.{key}: expected [x0, y0, x1, y1]")
    return tuple(float(v) for v in rect)


_FIELD_KINDS = {"constant", "gaussian", "file"}


def _parse_field_spec(node, path, default):
    """Validate a field spec: constant value, gaussian bump, or file."""
    if node is None:
        node = default
    _expect_object(node, path)
    kind = node.get("kind")
    if kind not in _FIELD_KINDS:
        raise ConfigError(f"{path}.kind: expected one of {sorted(_FIELD_KINDS)}")
    if kind == "constant":
        _reject_unknown(node, {"kind", "value"}, path)
        _get_number(node, "value", path, 0.0)
    elif kind == "gaussian":
        _reject_unknown(node, {"kind", "base", "amplitude", "center", "width"}, path)
        _get_number(node, "base", path, 0.0)
        _get_number(node, "amplitude", path, 1.0)
        _get_number(node, "width", path, 0.15, positive=True)
        center = node.get("center", [0.5, 0.5])
        if (not isinstance(center, list) or len(center) != 2
                or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in center)):
            raise ConfigError(f"{path}.center: expected [x, y]")
    else:
        _reject_unknown(node, {"kind", "path"}, path)
        if not isinstance(node.get("path"), str):
            raise ConfigError(f"{path}.path: expected a file path string")
    return dict(node)


def _build_field(spec: dict, grid: Grid, base_dir: Path, path: str) -> ScalarField:
    kind = spec["kind"]
    if kind == "constant":
        return ScalarField(np.full(grid.ncells, float(spec.get("value", 0.0))), grid)
    if kind == "gaussian":
        base = float(spec.get("base", 0.0))
        amp = float(spec.get("amplitude", 1.0))
        width = float(spec.get("width", 0.15))
        cx, cy = (float(v) for v in spec.get("center", [0.5, 0.5]))
        x, y = grid.cell_centers()
        values = base + amp * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * width**2))
        return ScalarField(values, grid)
    file_path = base_dir / spec["path"]
    try:
        values = np.loadtxt(file_path, dtype=float).ravel()
    except OSError as exc:
        raise ConfigError(f"{path}.path: cannot read {file_path}: {exc}") from exc
    if values.size != grid.ncells:
        raise ConfigError(
            f"{path}.path: file holds {values.size} values, grid has {grid.ncells} cells"
        )
    return ScalarField(values, grid)


_DEFAULT_U0 = {"kind": "gaussian", "base": 0.2, "amplitude": 1.0,
               "center": [0.4, 0.5], "width": 0.15}
_DEFAULT_V0 = {"kind": "constant", "value": 0.5}
_DEFAULT_DESIRED = {"kind": "constant", "u_value": 0.5, "v_value": 0.5}
_DEFAULT_F_INIT = {"kind": "constant", "value": 0.0}


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """A validated problem: model, objective, admissible set, options.

    Desired states are resolved lazily through :meth:`build_desired`
    because the self-target kind runs a forward solve.
    """

    grid: Grid
    time: TimeGrid
    params: ModelParams
    weights: CostWeights
    admissible: AdmissibleSet
    optimizer: OptimizeOptions
    desired_spec: dict
    f_init_spec: dict
    gradcheck_directions: int
    gradcheck_eps: tuple
    output_dir: str
    seed: int
    snap_every: int | None
    base_dir: Path

    def build_initial_control(self) -> Control:
        """Time-constant control from the initial-control field spec."""
        f_field = _build_field(self.f_init_spec, self.grid, self.base_dir,
                               "initial_control")
        values = np.tile(f_field.values, (self.time.n_steps, 1))
        return Control(values, self.grid, self.time.n_steps)

    def build_desired(self):
        """Resolve desired states; returns (DesiredStates, f_star or None)."""
        kind = self.desired_spec["kind"]
        n = self.time.n_steps
        if kind == "constant":
            u_d = ScalarField(
                np.full(self.grid.ncells, float(self.desired_spec["u_value"])), self.grid)
            v_d = ScalarField(
                np.full(self.grid.ncells, float(self.desired_spec["v_value"])), self.grid)
            return DesiredStates.constant_in_time(u_d, v_d, n), None
        if kind == "from_file":
            u_d = _build_field({"kind": "file", "path": self.desired_spec["u_path"]},
                               self.grid, self.base_dir, "desired")
            v_d = _build_field({"kind": "file", "path": self.desired_spec["v_path"]},
                               self.grid, self.base_dir, "desired")
            return DesiredStates.constant_in_time(u_d, v_d, n), None
        f_field = _build_field(self.desired_spec["f_star"], self.grid,
                               self.base_dir, "desired.f_star")
        f_star = Control(np.tile(f_field.values, (n, 1)), self.grid, n)
        traj = solve_forward(self.params, f_star)
        return DesiredStates(list(traj.u[1:]), list(traj.v[1:])), f_star


def parse_config(text: str, base_dir: Path | str = ".") -> ProblemSpec:
    """Parse and validate a JSON config document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    _expect_object(doc, "config")
    _reject_unknown(doc, {"grid", "time", "initial", "weights", "desired",
                          "admissible", "optimizer", "initial_control",
                          "gradcheck", "output_dir", "seed", "snap_every"}, "")

    gnode = _expect_object(doc.get("grid", {}), "grid")
    _reject_unknown(gnode, {"nx", "ny", "lx", "ly", "control_rect",
                            "observation_rect"}, "grid")
    nx = _get_number(gnode, "nx", "grid", 32, integer=True, minimum=1)
    ny = _get_number(gnode, "ny", "grid", 32, integer=True, minimum=1)
    lx = _get_number(gnode, "lx", "grid", 1.0, positive=True)
    ly = _get_number(gnode, "ly", "grid", 1.0, positive=True)
    try:
        grid = build_grid(nx, ny, lx, ly,
                          _get_rect(gnode, "control_rect", "grid"),
                          _get_rect(gnode, "observation_rect", "grid"))
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from exc

    tnode = _expect_object(doc.get("time", {}), "time")
    _reject_unknown(tnode, {"t_final", "n_steps"}, "time")
    time = TimeGrid(
        _get_number(tnode, "t_final", "time", 1.0, positive=True),
        _get_number(tnode, "n_steps", "time", 100, integer=True, minimum=1),
    )

    inode = _expect_object(doc.get("initial", {}), "initial")
    _reject_unknown(inode, {"u0", "v0"}, "initial")
    base_dir = Path(base_dir)
    u0_spec = _parse_field_spec(inode.get("u0"), "initial.u0", _DEFAULT_U0)
    v0_spec = _parse_field_spec(inode.get("v0"), "initial.v0", _DEFAULT_V0)
    u0 = _build_field(u0_spec, grid, base_dir, "initial.u0")
    v0 = _build_field(v0_spec, grid, base_dir, "initial.v0")
    try:
        params = ModelParams(grid, time, u0, v0)
    except ValueError as exc:
        raise ConfigError(f"initial: {exc}") from exc

    wnode = _expect_object(doc.get("weights", {}), "weights")
    _reject_unknown(wnode, {"alpha_u", "alpha_v", "n_cost"}, "weights")
    try:
        weights = CostWeights(
            _get_number(wnode, "alpha_u", "weights", 1.0, minimum=0.0),
            _get_number(wnode, "alpha_v", "weights", 1.0, minimum=0.0),
            _get_number(wnode, "n_cost", "weights", 1.0, minimum=0.0),
        )
    except ValueError as exc:
        raise ConfigError(f"weights: {exc}") from exc

    dnode = _expect_object(doc.get("desired", dict(_DEFAULT_DESIRED)), "desired")
    dkind = dnode.get("kind")
    if dkind == "constant":
        _reject_unknown(dnode, {"kind", "u_value", "v_value"}, "desired")
        desired_spec = {
            "kind": "constant",
            "u_value": _get_number(dnode, "u_value", "desired", 0.5),
            "v_value": _get_number(dnode, "v_value", "desired", 0.5),
        }
    elif dkind == "from_file":
        _reject_unknown(dnode, {"kind", "u_path", "v_path"}, "desired")
        if not isinstance(dnode.get("u_path"), str) or not isinstance(dnode.get("v_path"), str):
            raise ConfigError("desired.u_path / desired.v_path: expected file path strings")
        desired_spec = dict(dnode)
    elif dkind == "self_target":
        _reject_unknown(dnode, {"kind", "f_star"}, "desired")
        desired_spec = {
            "kind": "self_target",
            "f_star": _parse_field_spec(dnode.get("f_star"), "desired.f_star",
                                        {"kind": "constant", "value": 0.5}),
        }
    else:
        raise ConfigError(
            "desired.kind: expected one of ['constant', 'from_file', 'self_target']"
        )

    anode = _expect_object(doc.get("admissible", {"kind": "box", "f_min": -1.0,
                                                  "f_max": 1.0}), "admissible")
    akind = anode.get("kind")
    if akind == "free":
        _reject_unknown(anode, {"kind"}, "admissible")
        admissible: AdmissibleSet = FreeSet()
    elif akind == "box":
        _reject_unknown(anode, {"kind", "f_min", "f_max"}, "admissible")
        f_min = _get_number(anode, "f_min", "admissible", -1.0)
        f_max = _get_number(anode, "f_max", "admissible", 1.0)
        if f_min > f_max:
            raise ConfigError(
                f"admissible: f_min={f_min} exceeds f_max={f_max}"
            )
        admissible = BoxSet(f_min, f_max)
    else:
        raise ConfigError("admissible.kind: expected 'free' or 'box'")
    if isinstance(admissible, FreeSet) and weights.n_cost == 0:
        raise ConfigError(
            "admissible: a free set requires weights.n_cost > 0"
        )

    onode = _expect_object(doc.get("optimizer", {}), "optimizer")
    _reject_unknown(onode, {"max_iters", "tol", "armijo_c", "backtrack_ratio",
                            "step_init", "bb_warm_start"}, "optimizer")
    bb = onode.get("bb_warm_start", True)
    if not isinstance(bb, bool):
        raise ConfigError("optimizer.bb_warm_start: expected a boolean")
    try:
        options = OptimizeOptions(
            max_iters=_get_number(onode, "max_iters", "optimizer", 200,
                                  integer=True, minimum=1),
            tol=_get_number(onode, "tol", "optimizer", 1e-8, positive=True),
            armijo_c=_get_number(onode, "armijo_c", "optimizer", 1e-4, positive=True),
            backtrack_ratio=_get_number(onode, "backtrack_ratio", "optimizer", 0.5,
                                        positive=True),
            step_init=_get_number(onode, "step_init", "optimizer", 1.0, positive=True),
            bb_warm_start=bb,
        )
    except ValueError as exc:
        raise ConfigError(f"optimizer: {exc}") from exc

    f_init_spec = _parse_field_spec(doc.get("initial_control"), "initial_control",
                                    _DEFAULT_F_INIT)

    cnode = _expect_object(doc.get("gradcheck", {}), "gradcheck")
    _reject_unknown(cnode, {"n_directions", "eps_list"}, "gradcheck")
    n_dirs = _get_number(cnode, "n_directions", "gradcheck", 5, integer=True, minimum=1)
    eps_list = cnode.get("eps_list", [1e-3, 1e-4, 1e-5, 1e-6, 1e-7])
    if (not isinstance(eps_list, list) or not eps_list
            or any(isinstance(e, bool) or not isinstance(e, (int, float)) or e <= 0
                   for e in eps_list)):
        raise ConfigError("gradcheck.eps_list: expected a nonempty list of positive numbers")

    output_dir = doc.get("output_dir", "out")
    if not isinstance(output_dir, str):
        raise ConfigError("output_dir: expected a string")
    seed = _get_number(doc, "seed", "config", 0, integer=True, minimum=0)
    snap_every = doc.get("snap_every")
    if snap_every is not None:
        snap_every = _get_number(doc, "snap_every", "config", None,
                                 integer=True, minimum=1)

    return ProblemSpec(
        grid=grid, time=time, params=params, weights=weights,
        admissible=admissible, optimizer=options,
        desired_spec=desired_spec, f_init_spec=f_init_spec,
        gradcheck_directions=n_dirs, gradcheck_eps=tuple(float(e) for e in eps_list),
        output_dir=output_dir, seed=seed, snap_every=snap_every,
        base_dir=base_dir,
    )


def load_config(path: str | Path) -> ProblemSpec:
    """Read and parse a config file; relative data paths resolve
    against the config's directory."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, base_dir=path.parent)
