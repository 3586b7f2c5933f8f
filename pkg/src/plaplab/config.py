"""Experiment configuration: strict JSON schema and canonical digests.

Configs are JSON objects.  Unknown keys are rejected everywhere, and
every complaint carries the dotted path of the offending field so a
config can be fixed without reading this module.  Problem data can be
given three ways: a named preset from the profiles catalog, a named
entry from the exact-solution catalog, or raw expression strings in
the small arithmetic language from the expressions module.

The digest is the sha256 of the canonicalized raw JSON (sorted keys,
no whitespace), so formatting and key order never change it while any
value change does.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from . import oracles, profiles
from .elliptic import SEED_FIELDS, SWEEP_ORDERS, SolverConfig
from .errors import ConfigurationError, ParseError
from .expressions import parse_expression, variables_used
from .freeboundary import GRADIENT_SOURCES
from .mesh import Domain, Grid, build_grid
from .parabolic import TimeGrid

__all__ = [
    "KINDS",
    "GridSpec",
    "DataSpec",
    "TimeSpec",
    "MeasureSpec",
    "OracleSpec",
    "ExperimentConfig",
    "canonical_digest",
    "parse_config",
    "load_config",
]

KINDS = (
    "elliptic",
    "parabolic",
    "growth",
    "nondeg",
    "porosity",
    "oracle",
    "audit",
    "convergence",
)

PARABOLIC_KINDS = ("parabolic",)  # growth turns parabolic when "time" is present

DATA_MODES = ("preset", "exact", "expressions")


def canonical_digest(obj) -> str:
    """sha256 hex digest of the canonical JSON form of obj."""
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _fail(path: str, message: str):
    raise ConfigurationError(f"{path}: {message}" if path else message)


def _expect_mapping(obj, path: str) -> dict:
    if not isinstance(obj, dict):
        _fail(path, f"expected an object, got {type(obj).__name__}")
    return obj


def _check_keys(obj: dict, path: str, required, optional):
    allowed = set(required) | set(optional)
    for key in obj:
        if key not in allowed:
            _fail(f"{path}.{key}" if path else key, "unknown key")
    for key in required:
        if key not in obj:
            _fail(path, f"missing required key {key!r}")


def _number(obj, path: str, minimum=None, maximum=None, exclusive_min=False) -> float:
    if isinstance(obj, bool) or not isinstance(obj, (int, float)):
        _fail(path, f"expected a number, got {type(obj).__name__}")
    value = float(obj)
    if value != value or value in (float("inf"), float("-inf")):
        _fail(path, "must be finite")
    if minimum is not None:
        if exclusive_min and not value > minimum:
            _fail(path, f"must exceed {minimum}, got {value}")
        if not exclusive_min and value < minimum:
            _fail(path, f"must be at least {minimum}, got {value}")
    if maximum is not None and value > maximum:
        _fail(path, f"must be at most {maximum}, got {value}")
    return value


def _integer(obj, path: str, minimum=None) -> int:
    if isinstance(obj, bool) or not isinstance(obj, int):
        _fail(path, f"expected an integer, got {type(obj).__name__}")
    if minimum is not None and obj < minimum:
        _fail(path, f"must be at least {minimum}, got {obj}")
    return int(obj)


def _string(obj, path: str, choices=None) -> str:
    if not isinstance(obj, str):
        _fail(path, f"expected a string, got {type(obj).__name__}")
    if choices is not None and obj not in choices:
        _fail(path, f"must be one of {tuple(choices)}, got {obj!r}")
    return obj


def _boolean(obj, path: str) -> bool:
    if not isinstance(obj, bool):
        _fail(path, f"expected a boolean, got {type(obj).__name__}")
    return obj


def _params_mapping(obj, path: str) -> dict:
    obj = _expect_mapping(obj, path)
    out = {}
    for key, value in obj.items():
        if not isinstance(key, str):
            _fail(path, "parameter names must be strings")
        out[key] = _number(value, f"{path}.{key}")
    return out


@dataclass(frozen=True)
class GridSpec:
    box: tuple
    counts: tuple

    @property
    def dim(self) -> int:
        return len(self.counts)

    def build(self) -> Grid:
        lo = tuple(pair[0] for pair in self.box)
        hi = tuple(pair[1] for pair in self.box)
        return build_grid(Domain(lo, hi), self.counts)


@dataclass(frozen=True)
class DataSpec:
    mode: str  # preset | exact | expressions
    name: str | None = None
    params: dict | None = None
    obstacle: str | None = None
    boundary: str | None = None
    rhs: str | None = None
    initial: str | None = None
    gradient: tuple | None = None
    beta: float | None = None


@dataclass(frozen=True)
class TimeSpec:
    t0: float
    dt: float
    steps: int

    def build(self) -> TimeGrid:
        return TimeGrid(dt=self.dt, steps=self.steps, t0=self.t0)


@dataclass(frozen=True)
class MeasureSpec:
    anchor: tuple | None = None
    r_max: float | None = None
    radii_count: int = 5
    gradient_source: str | None = None  # None -> auto in the runner
    expected_exponent: float | None = None
    s_time: float | None = None
    snap: bool = True
    blowup: bool = False
    radii_factors: tuple = (8.0, 16.0, 32.0)
    max_points: int = 16
    shell_half_width: float | None = None


@dataclass(frozen=True)
class OracleSpec:
    name: str
    p: float
    dim: int = 1
    params: dict | None = None
    levels: int = 3
    counts: tuple | None = None
    times: tuple | None = None
    margin_factor: float = 4.0
    perturb: float = 0.1
    constant: float | str | None = None  # number, or "quoted" for the printed value


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    digest: str
    raw: dict = field(repr=False)
    grid: GridSpec | None = None
    p: float | None = None
    data: DataSpec | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    time: TimeSpec | None = None
    measure: MeasureSpec | None = None
    oracle: OracleSpec | None = None
    out: str | None = None
    threads: int = 1
    seed: int = 0
    levels: int | None = None

    @property
    def time_dependent(self) -> bool:
        return self.kind == "parabolic" or (
            self.kind == "growth" and self.time is not None
        )

    def normalized(self) -> dict:
        """Config with defaults filled, for echoing into reports."""
        out = {"kind": self.kind}
        if self.grid is not None:
            out["grid"] = {
                "box": [list(pair) for pair in self.grid.box],
                "counts": list(self.grid.counts),
            }
        if self.p is not None:
            out["p"] = self.p
        if self.data is not None:
            d = {}
            if self.data.mode == "preset":
                d["preset"] = self.data.name
            elif self.data.mode == "exact":
                d["exact"] = self.data.name
            else:
                d["obstacle"] = self.data.obstacle
                d["boundary"] = self.data.boundary
                if self.data.rhs is not None:
                    d["rhs"] = self.data.rhs
                if self.data.initial is not None:
                    d["initial"] = self.data.initial
                if self.data.gradient is not None:
                    d["gradient"] = list(self.data.gradient)
                if self.data.beta is not None:
                    d["beta"] = self.data.beta
            if self.data.params:
                d["params"] = dict(sorted(self.data.params.items()))
            out["data"] = d
        out["solver"] = {
            "outer_tol": self.solver.outer_tol,
            "max_sweeps": self.solver.max_sweeps,
            "node_tol": self.solver.node_tol,
            "sweep_order": self.solver.sweep_order,
            "seed_field": self.solver.seed_field,
            "omega": self.solver.omega,
            "continuation_levels": self.solver.continuation_levels,
        }
        if self.time is not None:
            out["time"] = {
                "t0": self.time.t0,
                "dt": self.time.dt,
                "steps": self.time.steps,
            }
        if self.measure is not None:
            m = self.measure
            out["measure"] = {
                "anchor": None if m.anchor is None else list(m.anchor),
                "r_max": m.r_max,
                "radii_count": m.radii_count,
                "gradient_source": m.gradient_source,
                "expected_exponent": m.expected_exponent,
                "s_time": m.s_time,
                "snap": m.snap,
                "blowup": m.blowup,
                "radii_factors": list(m.radii_factors),
                "max_points": m.max_points,
                "shell_half_width": m.shell_half_width,
            }
        if self.oracle is not None:
            o = self.oracle
            out["oracle"] = {
                "name": o.name,
                "p": o.p,
                "dim": o.dim,
                "params": dict(sorted((o.params or {}).items())),
                "levels": o.levels,
                "counts": None if o.counts is None else list(o.counts),
                "times": None if o.times is None else list(o.times),
                "margin_factor": o.margin_factor,
                "perturb": o.perturb,
                "constant": o.constant,
            }
        if self.out is not None:
            out["out"] = self.out
        out["threads"] = self.threads
        out["seed"] = self.seed
        if self.levels is not None:
            out["levels"] = self.levels
        return out


def _parse_grid(obj, path: str) -> GridSpec:
    obj = _expect_mapping(obj, path)
    _check_keys(obj, path, required=("box", "counts"), optional=())
    box = obj["box"]
    if not isinstance(box, list) or not box:
        _fail(f"{path}.box", "expected a list of [lo, hi] pairs")
    pairs = []
    for i, pair in enumerate(box):
        ppath = f"{path}.box[{i}]"
        if not isinstance(pair, list) or len(pair) != 2:
            _fail(ppath, "expected a [lo, hi] pair")
        lo = _number(pair[0], f"{ppath}[0]")
        hi = _number(pair[1], f"{ppath}[1]")
        if not lo < hi:
            _fail(ppath, f"needs lo < hi, got [{lo}, {hi}]")
        pairs.append((lo, hi))
    if len(pairs) not in (1, 2):
        _fail(f"{path}.box", f"only 1D and 2D boxes are supported, got {len(pairs)}D")
    counts = obj["counts"]
    if not isinstance(counts, list) or len(counts) != len(pairs):
        _fail(f"{path}.counts", f"expected {len(pairs)} node count(s)")
    ns = tuple(_integer(n, f"{path}.counts[{i}]", minimum=2) for i, n in enumerate(counts))
    return GridSpec(box=tuple(pairs), counts=ns)


def _allowed_variables(dim: int, time_dependent: bool) -> set:
    names = {"x"} if dim == 1 else {"x", "y"}
    if time_dependent:
        names.add("t")
    return names


def _parse_data_expression(
    text, path: str, dim: int, time_dependent: bool
) -> str:
    source = _string(text, path)
    try:
        ast = parse_expression(source)
    except ParseError as err:
        _fail(path, f"bad expression at offset {err.offset}: {err}")
    used = variables_used(ast)
    allowed = _allowed_variables(dim, time_dependent)
    for name in sorted(used - allowed):
        if name == "t":
            _fail(path, "variable 't' is not allowed in a time-independent problem")
        _fail(path, f"variable {name!r} is not allowed on a {dim}D grid")
    return source


def _parse_data(
    obj, path: str, kind: str, p: float, dim: int, time_dependent: bool
) -> DataSpec:
    obj = _expect_mapping(obj, path)
    modes = [m for m in ("preset", "exact") if m in obj]
    has_expr = any(k in obj for k in ("obstacle", "boundary", "rhs", "initial"))
    if len(modes) > 1 or (modes and has_expr):
        _fail(path, "give exactly one of: a preset, an exact entry, or expressions")

    if "preset" in obj:
        _check_keys(obj, path, required=("preset",), optional=("params",))
        name = _string(obj["preset"], f"{path}.preset", choices=profiles.PRESET_NAMES)
        params = _params_mapping(obj.get("params", {}), f"{path}.params")
        if kind == "parabolic":
            _fail(
                f"{path}.preset",
                "presets are time-independent; use expressions or an exact entry",
            )
        try:
            built = profiles.preset(name, p, dim, params or None)
        except ConfigurationError as err:
            _fail(path, str(err))
        if kind == "convergence" and not built.has_exact:
            _fail(path, f"preset {name!r} provides no exact reference for a convergence study")
        return DataSpec(mode="preset", name=name, params=params or None)

    if "exact" in obj:
        _check_keys(obj, path, required=("exact",), optional=("params",))
        name = _string(obj["exact"], f"{path}.exact", choices=oracles.CATALOG_NAMES)
        params = _params_mapping(obj.get("params", {}), f"{path}.params")
        try:
            built = oracles.catalog(name, p, dim, params or None)
        except ConfigurationError as err:
            _fail(path, str(err))
        if time_dependent and built.kind != "parabolic":
            _fail(f"{path}.exact", f"{name!r} is not a time-dependent solution")
        if not time_dependent and built.kind != "elliptic":
            _fail(f"{path}.exact", f"{name!r} needs a time-dependent problem kind")
        return DataSpec(mode="exact", name=name, params=params or None)

    _check_keys(
        obj,
        path,
        required=("obstacle", "boundary"),
        optional=("rhs", "initial", "gradient", "beta"),
    )
    obstacle = _parse_data_expression(
        obj["obstacle"], f"{path}.obstacle", dim, time_dependent
    )
    boundary = _parse_data_expression(
        obj["boundary"], f"{path}.boundary", dim, time_dependent
    )
    rhs = None
    if "rhs" in obj:
        if time_dependent:
            _fail(f"{path}.rhs", "an interior source is not supported for time-dependent problems")
        rhs = _parse_data_expression(obj["rhs"], f"{path}.rhs", dim, False)
    initial = None
    if "initial" in obj:
        if not time_dependent:
            _fail(f"{path}.initial", "only time-dependent problems take an initial datum")
        initial = _parse_data_expression(obj["initial"], f"{path}.initial", dim, False)
    gradient = None
    if "gradient" in obj:
        comps = obj["gradient"]
        if not isinstance(comps, list) or len(comps) != dim:
            _fail(f"{path}.gradient", f"expected {dim} component expression(s)")
        gradient = tuple(
            _parse_data_expression(c, f"{path}.gradient[{i}]", dim, time_dependent)
            for i, c in enumerate(comps)
        )
    beta = None
    if "beta" in obj:
        beta = _number(obj["beta"], f"{path}.beta", minimum=0.0, exclusive_min=True)
        if beta > 1.0:
            _fail(f"{path}.beta", f"must be at most 1, got {beta}")
    return DataSpec(
        mode="expressions",
        obstacle=obstacle,
        boundary=boundary,
        rhs=rhs,
        initial=initial,
        gradient=gradient,
        beta=beta,
    )


def _parse_solver(obj, path: str) -> SolverConfig:
    obj = _expect_mapping(obj, path)
    _check_keys(
        obj,
        path,
        required=(),
        optional=(
            "outer_tol",
            "max_sweeps",
            "node_tol",
            "sweep_order",
            "seed_field",
            "omega",
            "continuation_levels",
        ),
    )
    kwargs = {}
    if "outer_tol" in obj and obj["outer_tol"] is not None:
        kwargs["outer_tol"] = _number(
            obj["outer_tol"], f"{path}.outer_tol", minimum=0.0, exclusive_min=True
        )
    if "max_sweeps" in obj:
        kwargs["max_sweeps"] = _integer(obj["max_sweeps"], f"{path}.max_sweeps", minimum=1)
    if "node_tol" in obj:
        kwargs["node_tol"] = _number(
            obj["node_tol"], f"{path}.node_tol", minimum=0.0, exclusive_min=True
        )
    if "sweep_order" in obj:
        kwargs["sweep_order"] = _string(
            obj["sweep_order"], f"{path}.sweep_order", choices=SWEEP_ORDERS
        )
    if "seed_field" in obj:
        kwargs["seed_field"] = _string(
            obj["seed_field"], f"{path}.seed_field", choices=SEED_FIELDS
        )
    if "omega" in obj:
        kwargs["omega"] = _number(
            obj["omega"], f"{path}.omega", minimum=0.0, exclusive_min=True
        )
    if "continuation_levels" in obj:
        kwargs["continuation_levels"] = _integer(
            obj["continuation_levels"], f"{path}.continuation_levels", minimum=1
        )
    try:
        return SolverConfig(**kwargs)
    except ConfigurationError as err:
        _fail(path, str(err))


def _parse_time(obj, path: str) -> TimeSpec:
    obj = _expect_mapping(obj, path)
    _check_keys(obj, path, required=("steps",), optional=("t0", "dt", "t_end"))
    t0 = _number(obj.get("t0", 0.0), f"{path}.t0")
    steps = _integer(obj["steps"], f"{path}.steps", minimum=1)
    if ("dt" in obj) == ("t_end" in obj):
        _fail(path, "give exactly one of 'dt' or 't_end'")
    if "dt" in obj:
        dt = _number(obj["dt"], f"{path}.dt", minimum=0.0, exclusive_min=True)
    else:
        t_end = _number(obj["t_end"], f"{path}.t_end")
        if not t_end > t0:
            _fail(f"{path}.t_end", f"must exceed t0 = {t0}, got {t_end}")
        dt = (t_end - t0) / steps
    return TimeSpec(t0=t0, dt=dt, steps=steps)


def _parse_measure(obj, path: str, kind: str, dim: int, time_dependent: bool) -> MeasureSpec:
    obj = _expect_mapping(obj, path)
    if kind == "porosity":
        _check_keys(obj, path, required=(), optional=("radii_factors", "max_points"))
        factors = (8.0, 16.0, 32.0)
        if "radii_factors" in obj:
            raw = obj["radii_factors"]
            if not isinstance(raw, list) or not raw:
                _fail(f"{path}.radii_factors", "expected a nonempty list of numbers")
            factors = tuple(
                _number(v, f"{path}.radii_factors[{i}]", minimum=4.0)
                for i, v in enumerate(raw)
            )
        max_points = _integer(obj.get("max_points", 16), f"{path}.max_points", minimum=1)
        return MeasureSpec(radii_factors=factors, max_points=max_points)

    optional = ["r_max", "radii_count", "snap"]
    if kind == "growth":
        optional += ["gradient_source", "expected_exponent", "blowup"]
        if time_dependent:
            optional += ["s_time"]
    if kind == "nondeg":
        optional += ["shell_half_width"]
    _check_keys(obj, path, required=("anchor",), optional=tuple(optional))

    raw_anchor = obj["anchor"]
    if not isinstance(raw_anchor, list) or len(raw_anchor) != dim:
        _fail(f"{path}.anchor", f"expected {dim} coordinate(s)")
    anchor = tuple(_number(v, f"{path}.anchor[{i}]") for i, v in enumerate(raw_anchor))

    kwargs = {"anchor": anchor}
    if "r_max" in obj:
        kwargs["r_max"] = _number(obj["r_max"], f"{path}.r_max", minimum=0.0, exclusive_min=True)
    kwargs["radii_count"] = _integer(
        obj.get("radii_count", 4 if kind == "nondeg" else 5),
        f"{path}.radii_count",
        minimum=4,
    )
    if "gradient_source" in obj:
        kwargs["gradient_source"] = _string(
            obj["gradient_source"], f"{path}.gradient_source", choices=GRADIENT_SOURCES
        )
    if "expected_exponent" in obj:
        kwargs["expected_exponent"] = _number(
            obj["expected_exponent"], f"{path}.expected_exponent", minimum=0.0, exclusive_min=True
        )
    if "s_time" in obj:
        kwargs["s_time"] = _number(obj["s_time"], f"{path}.s_time")
    if "snap" in obj:
        kwargs["snap"] = _boolean(obj["snap"], f"{path}.snap")
    if "blowup" in obj:
        kwargs["blowup"] = _boolean(obj["blowup"], f"{path}.blowup")
    if "shell_half_width" in obj:
        kwargs["shell_half_width"] = _number(
            obj["shell_half_width"], f"{path}.shell_half_width", minimum=0.0, exclusive_min=True
        )
    return MeasureSpec(**kwargs)


def _parse_oracle(obj, path: str, kind: str) -> OracleSpec:
    obj = _expect_mapping(obj, path)
    optional = ["dim", "params", "times", "margin_factor", "counts"]
    if kind == "oracle":
        optional += ["levels", "perturb", "constant"]
    _check_keys(obj, path, required=("name", "p"), optional=tuple(optional))
    name = _string(obj["name"], f"{path}.name", choices=oracles.CATALOG_NAMES)
    p = _number(obj["p"], f"{path}.p", minimum=1.0, exclusive_min=True)
    dim = _integer(obj.get("dim", 1), f"{path}.dim", minimum=1)
    if dim > 2:
        _fail(f"{path}.dim", f"only 1D and 2D are supported, got {dim}")
    params = _params_mapping(obj.get("params", {}), f"{path}.params")
    if kind == "audit" and name not in oracles.AUDITABLE:
        _fail(
            f"{path}.name",
            f"{name!r} has no single-amplitude audit; choose one of {oracles.AUDITABLE}",
        )
    kwargs = {"name": name, "p": p, "dim": dim, "params": params or None}
    if "levels" in obj:
        kwargs["levels"] = _integer(obj["levels"], f"{path}.levels", minimum=3)
    if "counts" in obj:
        raw = obj["counts"]
        if not isinstance(raw, list) or len(raw) != dim:
            _fail(f"{path}.counts", f"expected {dim} node count(s)")
        kwargs["counts"] = tuple(
            _integer(n, f"{path}.counts[{i}]", minimum=2) for i, n in enumerate(raw)
        )
    if "times" in obj:
        raw = obj["times"]
        if not isinstance(raw, list) or not raw:
            _fail(f"{path}.times", "expected a nonempty list of times")
        kwargs["times"] = tuple(_number(v, f"{path}.times[{i}]") for i, v in enumerate(raw))
    if "margin_factor" in obj:
        kwargs["margin_factor"] = _number(
            obj["margin_factor"], f"{path}.margin_factor", minimum=0.0
        )
    if "perturb" in obj:
        kwargs["perturb"] = _number(
            obj["perturb"], f"{path}.perturb", minimum=0.0, exclusive_min=True
        )
    if "constant" in obj:
        value = obj["constant"]
        if isinstance(value, str):
            kwargs["constant"] = _string(value, f"{path}.constant", choices=("quoted",))
        else:
            kwargs["constant"] = _number(
                value, f"{path}.constant", minimum=0.0, exclusive_min=True
            )
    # validate eagerly so a bad name/p combination is a config error
    try:
        oracles.catalog(name, p, dim, params or None)
    except ConfigurationError as err:
        _fail(path, str(err))
    return OracleSpec(**kwargs)


_SECTION_RULES = {
    # kind: (required, optional)
    "elliptic": (("kind", "grid", "p", "data"), ("solver", "out", "threads", "seed")),
    "parabolic": (
        ("kind", "grid", "p", "data", "time"),
        ("solver", "out", "threads", "seed"),
    ),
    "growth": (
        ("kind", "grid", "p", "data", "measure"),
        ("solver", "time", "out", "threads", "seed"),
    ),
    "nondeg": (
        ("kind", "grid", "p", "data", "measure"),
        ("solver", "out", "threads", "seed"),
    ),
    "porosity": (
        ("kind", "grid", "p", "data", "measure"),
        ("solver", "out", "threads", "seed"),
    ),
    "oracle": (("kind", "oracle"), ("out", "threads", "seed")),
    "audit": (("kind", "oracle"), ("out", "threads", "seed")),
    "convergence": (
        ("kind", "grid", "p", "data"),
        ("levels", "solver", "out", "threads", "seed"),
    ),
}


def parse_config(obj) -> ExperimentConfig:
    """Validate a parsed JSON object into an ExperimentConfig."""
    obj = _expect_mapping(obj, "")
    if "kind" not in obj:
        _fail("", "missing required key 'kind'")
    kind = _string(obj["kind"], "kind", choices=KINDS)
    required, optional = _SECTION_RULES[kind]
    _check_keys(obj, "", required=required, optional=optional)
    digest = canonical_digest(obj)

    out = None
    if "out" in obj:
        out = _string(obj["out"], "out")
    threads = _integer(obj.get("threads", 1), "threads", minimum=1)
    seed = _integer(obj.get("seed", 0), "seed", minimum=0)

    if kind in ("oracle", "audit"):
        oracle = _parse_oracle(obj["oracle"], "oracle", kind)
        return ExperimentConfig(
            kind=kind,
            digest=digest,
            raw=obj,
            oracle=oracle,
            out=out,
            threads=threads,
            seed=seed,
        )

    grid = _parse_grid(obj["grid"], "grid")
    if isinstance(obj["p"], bool) or not isinstance(obj["p"], (int, float)):
        _fail("p", f"expected a number, got {type(obj['p']).__name__}")
    p = float(obj["p"])
    if not p > 1.0 or p != p or p == float("inf"):
        raise ConfigurationError(f"p must exceed 1, got {obj['p']}")

    time = None
    if "time" in obj:
        time = _parse_time(obj["time"], "time")
    time_dependent = kind == "parabolic" or (kind == "growth" and time is not None)

    data = _parse_data(obj["data"], "data", kind, p, grid.dim, time_dependent)
    solver = _parse_solver(obj.get("solver", {}), "solver")

    measure = None
    if kind in ("growth", "nondeg", "porosity"):
        measure = _parse_measure(obj["measure"], "measure", kind, grid.dim, time_dependent)
        if time_dependent and data.mode == "preset":
            _fail("data.preset", "presets are time-independent")

    levels = None
    if kind == "convergence":
        levels = _integer(obj.get("levels", 3), "levels", minimum=3)

    return ExperimentConfig(
        kind=kind,
        digest=digest,
        raw=obj,
        grid=grid,
        p=p,
        data=data,
        solver=solver,
        time=time,
        measure=measure,
        oracle=None,
        out=out,
        threads=threads,
        seed=seed,
        levels=levels,
    )


def load_config(path) -> ExperimentConfig:
    """Read and validate a JSON config file."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as err:
        raise ConfigurationError(f"cannot read config file {path}: {err}") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigurationError(
            f"config file {path} is not valid JSON: {err.msg} at line {err.lineno}"
        ) from None
    return parse_config(obj)
