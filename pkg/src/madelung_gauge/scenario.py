"""Scenario files: parsing, serialization and the dotted key schema.

A scenario is plain text, one ``key = value`` pair per line, ``#`` starts a
comment. Lists and coordinate pairs are comma separated. Parsing is strict:
unknown keys, duplicates and missing required keys are errors.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import InvalidValue, MissingKey, UnknownKey
from .grid import BOUNDARY_KINDS, DIRICHLET, Grid
from .propagator import ANALYTIC_KINDS, ONE_D_KINDS, PhysicalConstants

DIAGNOSTICS = ("continuity", "hje", "energy", "spin_gauge", "trajectories")
POTENTIAL_KINDS = ("free", "harmonic", "custom_table")
SIGNS = ("plus", "minus")
TRAJECTORY_METHODS = ("from_current", "from_phase_gradient")


@dataclass(frozen=True)
class PotentialSpec:
    kind: str = "free"
    omega: float = 1.0
    center: float = 0.0
    table: str | None = None


@dataclass(frozen=True)
class InitialSpec:
    kind: str
    params: tuple = ()
    discrete_ground: bool = False

    @property
    def param_dict(self) -> dict:
        return dict(self.params)


@dataclass(frozen=True)
class EvolutionSpec:
    dt: float = 0.0
    steps: int = 0
    stride: int = 1


@dataclass(frozen=True)
class SpinSpec:
    alpha: float = 0.5
    r0: float = 1.0
    center: tuple = (0.0, 0.0)
    direction: tuple = (0.0, 0.0, 1.0)
    sign: str = "plus"
    reference: float = 0.0
    exclusion_radius: float | None = None


@dataclass(frozen=True)
class TrajectorySpec:
    starts: tuple = ()
    method: str = "from_current"
    ensemble: int = 0


@dataclass(frozen=True)
class Tolerances:
    continuity: float = 1e-4
    hje: float = 1e-4
    energy: float = 1e-6
    spin: float = 1e-10
    gauge: float = 1e-2
    trajectories: float = 1e-4


@dataclass(frozen=True)
class Scenario:
    name: str
    grid: Grid
    initial: InitialSpec
    diagnostics: tuple
    constants: PhysicalConstants = PhysicalConstants()
    potential: PotentialSpec = PotentialSpec()
    evolution: EvolutionSpec = EvolutionSpec()
    spin: SpinSpec = SpinSpec()
    trajectories: TrajectorySpec = TrajectorySpec()
    tolerances: Tolerances = Tolerances()
    energy_expected: float | None = None
    node_epsilon: float = 1e-10
    density_floor: float = 1e-8
    stationary: bool = False
    seed: int = 0
    output_dir: str | None = None


# --- value parsers ---------------------------------------------------------

def _float(key, text):
    try:
        return float(text)
    except ValueError:
        raise InvalidValue(key, f"expected a number, got {text!r}") from None


def _positive(key, text):
    v = _float(key, text)
    if not v > 0:
        raise InvalidValue(key, "must be positive")
    return v


def _int(key, text, minimum=None):
    try:
        v = int(text)
    except ValueError:
        raise InvalidValue(key, f"expected an integer, got {text!r}") from None
    if minimum is not None and v < minimum:
        raise InvalidValue(key, f"must be >= {minimum}")
    return v


def _bool(key, text):
    low = text.lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise InvalidValue(key, f"expected true/false, got {text!r}")


def _choice(key, text, options):
    if text not in options:
        raise InvalidValue(key, f"expected one of {list(options)}, got {text!r}")
    return text


def _floats(key, text, sizes=None):
    parts = [p.strip() for p in text.split(",") if p.strip()]
    values = tuple(_float(key, p) for p in parts)
    if sizes is not None and len(values) not in sizes:
        raise InvalidValue(key, f"expected {' or '.join(map(str, sizes))} values")
    return values


def _ints(key, text, sizes=None):
    parts = [p.strip() for p in text.split(",") if p.strip()]
    values = tuple(_int(key, p) for p in parts)
    if sizes is not None and len(values) not in sizes:
        raise InvalidValue(key, f"expected {' or '.join(map(str, sizes))} values")
    return values


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (tuple, list)):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


# --- text <-> key/value ----------------------------------------------------

def read_pairs(text: str) -> dict[str, str]:
    pairs: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidValue(f"line {lineno}", f"expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise InvalidValue(f"line {lineno}", "empty key")
        if key in pairs:
            raise InvalidValue(key, f"duplicate key on line {lineno}")
        pairs[key] = value
    return pairs


INITIAL_PARAMS = {kind: allowed for kind, (_, allowed) in ANALYTIC_KINDS.items()}

KNOWN_KEYS = {
    "name", "stationary", "seed", "diagnostics",
    "grid.n", "grid.min", "grid.max", "grid.boundary",
    "constants.hbar", "constants.mass", "constants.light_speed",
    "potential.kind", "potential.omega", "potential.center", "potential.table",
    "initial.kind", "initial.discrete_ground",
    "evolution.dt", "evolution.steps", "evolution.stride",
    "node.epsilon", "analysis.density_floor",
    "spin.alpha", "spin.r0", "spin.center", "spin.direction", "spin.sign",
    "spin.reference", "spin.exclusion_radius",
    "trajectories.starts", "trajectories.uniform", "trajectories.method",
    "trajectories.ensemble",
    "energy.expected",
    "tolerance.continuity", "tolerance.hje", "tolerance.energy", "tolerance.spin",
    "tolerance.gauge", "tolerance.trajectories",
    "output.directory",
}


def parse_scenario(text: str) -> Scenario:
    """Parse and validate scenario text, applying defaults."""
    pairs = read_pairs(text)
    kind = pairs.get("initial.kind")
    allowed_params = {f"initial.{p}" for p in INITIAL_PARAMS.get(kind, ())}
    for key in pairs:
        if key not in KNOWN_KEYS and key not in allowed_params:
            raise UnknownKey(key)
    for key in ("name", "grid.n", "grid.min", "grid.max", "initial.kind", "diagnostics"):
        if key not in pairs:
            raise MissingKey(key)

    get = pairs.get
    n = _ints("grid.n", pairs["grid.n"], (1, 2))
    lo = _floats("grid.min", pairs["grid.min"], (1, 2))
    hi = _floats("grid.max", pairs["grid.max"], (1, 2))
    boundary = _choice("grid.boundary", get("grid.boundary", DIRICHLET), BOUNDARY_KINDS)
    dim = len(n)
    if len(lo) > dim or len(hi) > dim:
        raise InvalidValue("grid.min", "more bounds than grid axes")
    try:
        grid = Grid(n, lo, hi, boundary)
    except ValueError as exc:
        raise InvalidValue("grid", str(exc)) from None

    try:
        constants = PhysicalConstants(
            hbar=_float("constants.hbar", get("constants.hbar", "1.0")),
            mass=_float("constants.mass", get("constants.mass", "1.0")),
            light_speed=_float("constants.light_speed", get("constants.light_speed", "137.035999")),
        )
    except ValueError as exc:
        raise InvalidValue("constants", str(exc)) from None

    pkind = _choice("potential.kind", get("potential.kind", "free"), POTENTIAL_KINDS)
    potential = PotentialSpec(
        kind=pkind,
        omega=_positive("potential.omega", get("potential.omega", "1.0")),
        center=_float("potential.center", get("potential.center", "0.0")),
        table=get("potential.table"),
    )
    if pkind == "custom_table" and potential.table is None:
        raise MissingKey("potential.table")
    if pkind != "custom_table" and potential.table is not None:
        raise InvalidValue("potential.table", "only used with potential.kind = custom_table")

    kind = _choice("initial.kind", kind, tuple(ANALYTIC_KINDS))
    if kind in ONE_D_KINDS and dim != 1:
        raise InvalidValue("initial.kind", f"{kind} needs a 1D grid")
    params = []
    for p in INITIAL_PARAMS[kind]:
        key = f"initial.{p}"
        if key in pairs:
            if p == "center" and kind == "power_law_radial":
                params.append((p, _floats(key, pairs[key], (dim,))))
            elif p in ("sigma0", "r0", "alpha", "omega"):
                params.append((p, _positive(key, pairs[key])))
            else:
                params.append((p, _float(key, pairs[key])))
    discrete = _bool("initial.discrete_ground", get("initial.discrete_ground", "false"))
    if discrete and (dim != 1 or boundary != DIRICHLET):
        raise InvalidValue("initial.discrete_ground", "needs a 1D dirichlet grid")
    initial = InitialSpec(kind=kind, params=tuple(params), discrete_ground=discrete)

    steps = _int("evolution.steps", get("evolution.steps", "0"), minimum=0)
    dt = _float("evolution.dt", get("evolution.dt", "0.0"))
    if steps > 0 and not dt > 0:
        raise InvalidValue("evolution.dt", "must be positive when evolution.steps > 0")
    if steps > 0 and dim != 1:
        raise InvalidValue("evolution.steps", "time evolution is 1D only")
    evolution = EvolutionSpec(dt=dt, steps=steps,
                              stride=_int("evolution.stride", get("evolution.stride", "1"), 1))

    diags = tuple(d.strip() for d in pairs["diagnostics"].split(",") if d.strip())
    if not diags:
        raise InvalidValue("diagnostics", "at least one diagnostic is required")
    for d in diags:
        _choice("diagnostics", d, DIAGNOSTICS)
    if len(set(diags)) != len(diags):
        raise InvalidValue("diagnostics", "duplicate entries")

    stationary = _bool("stationary", get("stationary", "false"))
    if "energy" in diags and not stationary:
        raise InvalidValue("diagnostics", "energy needs stationary = true")
    needs_snapshots = {"continuity", "hje", "energy"} & set(diags)
    if needs_snapshots and steps < 2 * evolution.stride:
        raise InvalidValue("evolution.steps",
                           f"{sorted(needs_snapshots)} need at least 3 snapshots")
    if "trajectories" in diags and (dim != 1 or steps == 0):
        raise InvalidValue("diagnostics", "trajectories need a 1D evolution")

    center = _floats("spin.center", get("spin.center", "0.0, 0.0"), (2,))
    direction = _floats("spin.direction", get("spin.direction", "0.0, 0.0, 1.0"), (3,))
    excl = get("spin.exclusion_radius")
    spin = SpinSpec(
        alpha=_positive("spin.alpha", get("spin.alpha", "0.5")),
        r0=_positive("spin.r0", get("spin.r0", "1.0")),
        center=center,
        direction=direction,
        sign=_choice("spin.sign", get("spin.sign", "plus"), SIGNS),
        reference=_float("spin.reference", get("spin.reference", "0.0")),
        exclusion_radius=None if excl is None else _positive("spin.exclusion_radius", excl),
    )

    starts: tuple = ()
    if "trajectories.starts" in pairs:
        starts = _floats("trajectories.starts", pairs["trajectories.starts"])
    if "trajectories.uniform" in pairs:
        a, b, count = _floats("trajectories.uniform", pairs["trajectories.uniform"], (3,))
        if count < 1 or count != int(count):
            raise InvalidValue("trajectories.uniform", "count must be a positive integer")
        count = int(count)
        starts += tuple(a + (b - a) * i / max(count - 1, 1) for i in range(count))
    if "trajectories" in diags and not starts:
        raise MissingKey("trajectories.starts")
    trajectories = TrajectorySpec(
        starts=starts,
        method=_choice("trajectories.method", get("trajectories.method", "from_current"),
                       TRAJECTORY_METHODS),
        ensemble=_int("trajectories.ensemble", get("trajectories.ensemble", "0"), 0),
    )

    tol_defaults = Tolerances()
    tolerances = Tolerances(**{
        name: _positive(f"tolerance.{name}", get(f"tolerance.{name}", repr(getattr(tol_defaults, name))))
        for name in Tolerances.__dataclass_fields__
    })

    expected = get("energy.expected")
    return Scenario(
        name=pairs["name"],
        grid=grid,
        initial=initial,
        diagnostics=diags,
        constants=constants,
        potential=potential,
        evolution=evolution,
        spin=spin,
        trajectories=trajectories,
        tolerances=tolerances,
        energy_expected=None if expected is None else _float("energy.expected", expected),
        node_epsilon=_positive("node.epsilon", get("node.epsilon", "1e-10")),
        density_floor=_float("analysis.density_floor", get("analysis.density_floor", "1e-08")),
        stationary=stationary,
        seed=_int("seed", get("seed", "0")),
        output_dir=get("output.directory"),
    )


def scenario_pairs(s: Scenario) -> list[tuple[str, object]]:
    """Every key of a scenario with its value, in canonical order."""
    g = s.grid
    out = [
        ("name", s.name),
        ("grid.n", g.n),
        ("grid.min", g.lo),
        ("grid.max", g.hi),
        ("grid.boundary", g.boundary),
        ("constants.hbar", s.constants.hbar),
        ("constants.mass", s.constants.mass),
        ("constants.light_speed", s.constants.light_speed),
        ("potential.kind", s.potential.kind),
        ("potential.omega", s.potential.omega),
        ("potential.center", s.potential.center),
    ]
    if s.potential.table is not None:
        out.append(("potential.table", s.potential.table))
    out.append(("initial.kind", s.initial.kind))
    out += [(f"initial.{k}", v) for k, v in s.initial.params]
    out += [
        ("initial.discrete_ground", s.initial.discrete_ground),
        ("evolution.dt", s.evolution.dt),
        ("evolution.steps", s.evolution.steps),
        ("evolution.stride", s.evolution.stride),
        ("diagnostics", s.diagnostics),
        ("stationary", s.stationary),
        ("node.epsilon", s.node_epsilon),
        ("analysis.density_floor", s.density_floor),
        ("spin.alpha", s.spin.alpha),
        ("spin.r0", s.spin.r0),
        ("spin.center", s.spin.center),
        ("spin.direction", s.spin.direction),
        ("spin.sign", s.spin.sign),
        ("spin.reference", s.spin.reference),
    ]
    if s.spin.exclusion_radius is not None:
        out.append(("spin.exclusion_radius", s.spin.exclusion_radius))
    if s.trajectories.starts:
        out.append(("trajectories.starts", s.trajectories.starts))
    out += [
        ("trajectories.method", s.trajectories.method),
        ("trajectories.ensemble", s.trajectories.ensemble),
    ]
    if s.energy_expected is not None:
        out.append(("energy.expected", s.energy_expected))
    out += [(f"tolerance.{k}", getattr(s.tolerances, k)) for k in Tolerances.__dataclass_fields__]
    out.append(("seed", s.seed))
    if s.output_dir is not None:
        out.append(("output.directory", s.output_dir))
    return out


def serialize_scenario(s: Scenario) -> str:
    return "".join(f"{k} = {_fmt(v)}\n" for k, v in scenario_pairs(s))


def load_scenario(path) -> Scenario:
    return parse_scenario(Path(path).read_text())


def bundled_scenarios() -> dict[str, str]:
    """Name -> text of every scenario shipped with the package."""
    root = resources.files(__package__) / "scenarios"
    return {
        p.name[:-4]: p.read_text()
        for p in sorted(root.iterdir(), key=lambda p: p.name)
        if p.name.endswith(".cfg")
    }


def resolve_scenario(ref: str) -> Scenario:
    """Load from a path, or fall back to a bundled scenario of that name."""
    path = Path(ref)
    if path.is_file():
        return load_scenario(path)
    bundled = bundled_scenarios()
    if ref in bundled:
        return parse_scenario(bundled[ref])
    raise FileNotFoundError(f"no scenario file or bundled scenario named {ref!r}")
