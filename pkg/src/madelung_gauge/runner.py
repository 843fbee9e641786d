"""Run scenarios end to end: evolution, diagnostics, CSV fields and reports."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .bohm import equivariance_check, integrate_trajectories
from .diagnostics import (
    continuity_residual,
    energy_decomposition,
    hje_from_evolution,
    quantum_potential,
)
from .errors import MadelungError, ScenarioError
from .grid import Grid, l2_norm, max_norm
from .propagator import (
    EvolutionResult,
    Potential,
    analytic_state,
    evolve,
    ground_state,
)
from .scenario import Scenario
from .spin_gauge import (
    SpinConfig,
    compton_speed,
    gauge_phase_from_amplitude,
    log_gauge_phase,
    quantum_potential_from_theta,
    spin_vector_field,
    verify_gauge_condition,
)
from .wavefield import normalize

FLOOR = 1e-10
MIN_P_VALUE = 1e-3


@dataclass
class DiagnosticResult:
    name: str
    passed: bool
    values: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    def check(self, label: str, ok: bool):
        if not ok:
            self.failures.append(label)
            self.passed = False


@dataclass
class DiagnosticsReport:
    scenario: str
    results: dict
    series: dict
    provenance: dict
    fields: dict = field(default_factory=dict, repr=False)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results.values())

    @property
    def failing(self) -> list[str]:
        return [name for name, r in self.results.items() if not r.passed]

    def lines(self) -> list[str]:
        out = [f"scenario = {self.scenario}"]
        out += [f"provenance.{k} = {_text(v)}" for k, v in self.provenance.items()]
        for name, r in self.results.items():
            out += [f"{name}.{k} = {_text(v)}" for k, v in r.values.items()]
            if r.failures:
                out.append(f"{name}.failed_checks = {', '.join(r.failures)}")
        out += [f"series.{k} = {_text(v)}" for k, v in self.series.items()]
        out += [f"result.{name} = {'pass' if r.passed else 'fail'}" for name, r in self.results.items()]
        out.append(f"status = {'pass' if self.passed else 'fail'}")
        return out

    def to_text(self) -> str:
        return "\n".join(self.lines()) + "\n"


def _text(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (tuple, list, np.ndarray)):
        return ", ".join(_text(x) for x in v)
    return str(v)


# --- building blocks -------------------------------------------------------

def build_potential(s: Scenario) -> Potential:
    spec = s.potential
    if spec.kind == "harmonic":
        return Potential.harmonic(s.grid, spec.omega, s.constants, spec.center)
    if spec.kind == "custom_table":
        table = np.loadtxt(spec.table, delimiter=",", skiprows=1, ndmin=2)
        return Potential.from_table(s.grid, table[:, 0], table[:, 1])
    return Potential.free(s.grid)


def initial_state(s: Scenario, potential: Potential) -> np.ndarray:
    if s.initial.discrete_ground:
        _, vec = ground_state(s.grid, potential, s.constants)
        return vec.astype(complex)
    psi = analytic_state(s.initial.kind, s.initial.param_dict, s.grid, 0.0, s.constants)
    if s.evolution.steps > 0:
        psi = normalize(s.grid, psi)
    return psi


def spin_config(s: Scenario) -> SpinConfig:
    return SpinConfig(alpha=s.spin.alpha, r0=s.spin.r0, center=s.spin.center,
                      direction=s.spin.direction)


def _node_epsilon(s: Scenario, psi) -> float:
    return s.node_epsilon * float(np.max(np.abs(psi)))


def _crossings(positions: np.ndarray, starts: np.ndarray) -> int:
    order = np.argsort(starts)
    gaps = np.diff(positions[:, order], axis=1)
    return int(np.sum(np.any(gaps <= 0.0, axis=0)))


def _analytic_paths(s: Scenario, times, starts):
    """Exact free-Gaussian trajectories, or None when no closed form applies."""
    if s.initial.kind != "free_gaussian" or s.potential.kind != "free" or s.grid.periodic:
        return None
    p = s.initial.param_dict
    sigma0, x0, k0 = p.get("sigma0", 1.0), p.get("x0", 0.0), p.get("k0", 0.0)
    c = s.constants
    spread = np.sqrt(1.0 + (c.hbar * times / (2.0 * c.mass * sigma0**2)) ** 2)
    drift = c.hbar * k0 * times / c.mass
    return x0 + drift[:, None] + (starts[None, :] - x0) * spread[:, None]


def spin_metrics(grid: Grid, s: Scenario, amplitude, exclusion_radius=None,
                 region_radius=None) -> tuple[dict, dict]:
    """2D log-phase checks: spin vector, gauge condition lap(A) = |grad theta|^2 A and Q by both routes.

    Norms are taken outside ``region_radius`` (default: twice the exclusion
    radius, so no stencil reaches into the excluded disk).
    """
    cfg = spin_config(s)
    c = s.constants
    fields = log_gauge_phase(grid, cfg, exclusion_radius)
    if region_radius is None:
        region_radius = 2.0 * fields.exclusion_radius
    spin = spin_vector_field(fields, cfg, c)
    region = grid.interior(2) & (fields.radius >= region_radius)
    cond = verify_gauge_condition(grid, amplitude, fields.theta, region)
    q_amp = quantum_potential(grid, amplitude, amplitude <= 0, c)
    q_theta = quantum_potential_from_theta(fields.grad_theta, c)
    diff = np.where(region, q_amp - q_theta, 0.0)
    probe = grid.nearest_index((cfg.center[0] + cfg.r0, cfg.center[1]))
    values = {
        "alpha": cfg.alpha,
        "magnitude": spin.magnitude,
        "magnitude_error": abs(spin.magnitude - cfg.alpha * c.hbar),
        "deviation": spin.deviation,
        "exclusion_radius": fields.exclusion_radius,
        "probe_radius": float(fields.radius[probe]),
        "theta_r0": float(fields.theta[probe]),
        "q_r0_amplitude": float(q_amp[probe]),
        "q_r0_theta": float(q_theta[probe]),
        "q_routes_l2": l2_norm(grid, diff, region),
        "q_routes_max": max_norm(diff, region),
        "gauge_l2": cond.l2,
        "gauge_max": cond.max,
        "compton_speed": compton_speed(cfg, c),
    }
    arrays = {"gauge_phase": fields.theta, "spin_z": spin.field[2],
              "quantum_potential": q_amp, "gauge_residual": cond.residual}
    return values, arrays


def gauge_metrics_1d(grid: Grid, s: Scenario, amplitude) -> tuple[dict, dict]:
    gauge = gauge_phase_from_amplitude(grid, amplitude, s.spin.sign, s.spin.reference)
    cond = verify_gauge_condition(grid, amplitude, gauge.theta, gauge.region)
    values = {
        "sign": gauge.sign,
        "reference": gauge.reference,
        "valid_fraction": float(np.mean(gauge.region)),
        "gauge_l2": cond.l2,
        "gauge_max": cond.max,
    }
    return values, {"gauge_phase": gauge.theta, "gauge_residual": cond.residual}


# --- run -------------------------------------------------------------------

def _guarded(s: Scenario, diag: str, func, *args, **kwargs):
    try:
        return func(*args, **kwargs)
    except MadelungError as exc:
        raise ScenarioError(f"scenario {s.name!r}, {diag}: {exc}") from exc


def run_scenario(s: Scenario, out_dir=None, seed: int | None = None) -> DiagnosticsReport:
    """Execute a scenario and evaluate every requested diagnostic.

    Fields and ``report.txt`` are written to ``out_dir`` (or the scenario's
    ``output.directory``) when one is given.
    """
    grid, c, tol = s.grid, s.constants, s.tolerances
    seed = s.seed if seed is None else seed
    potential = _guarded(s, "setup", build_potential, s)
    psi0 = _guarded(s, "setup", initial_state, s, potential)
    fields: dict = {"psi_initial": psi0}
    series: dict = {}
    evolution: EvolutionResult | None = None
    if s.evolution.steps > 0:
        ev = s.evolution
        evolution = _guarded(s, "evolution", evolve, grid, psi0, potential, ev.dt, ev.steps,
                             ev.stride, c)
        fields["psi_final"] = evolution.snapshots[-1]
        fields["density_final"] = np.abs(evolution.snapshots[-1]) ** 2
        series["times"] = evolution.times
        series["norm"] = evolution.norms[::ev.stride]
        series["norm_drift"] = float(np.max(np.abs(evolution.norms - evolution.norms[0])))
        series["boundary_density"] = evolution.boundary_density
    eps = _node_epsilon(s, psi0)
    results: dict[str, DiagnosticResult] = {}
    hje = None

    for diag in s.diagnostics:
        r = DiagnosticResult(diag, True)
        if diag == "continuity":
            rep = _guarded(s, diag, continuity_residual, evolution, c, eps)
            r.values.update(l2=rep.l2, max=rep.max, masked=rep.masked_count,
                            tolerance=tol.continuity)
            r.check("l2", rep.l2 < tol.continuity)
            fields["continuity_residual"] = rep.residual[len(rep.residual) // 2]
        elif diag in ("hje", "energy"):
            if hje is None:
                hje = _guarded(s, diag, hje_from_evolution, evolution, None, eps, s.density_floor)
            if diag == "hje":
                r.values.update(l2=hje.l2, max=hje.max, classical_l2=hje.classical_l2,
                                classical_max=hje.classical_max, tolerance=tol.hje)
                r.check("max", hje.max < tol.hje)
                fields["hje_residual"] = np.where(hje.region, hje.residual, np.nan)
                fields["hje_classical_residual"] = np.where(hje.region, hje.classical_residual, np.nan)
                fields["quantum_potential"] = hje.quantum
            else:
                rho = np.abs(evolution.snapshots[len(evolution) // 2]) ** 2
                energy = energy_decomposition(hje, rho)
                r.values.update(total=energy.total, classical=energy.classical,
                                quantum=energy.quantum, spread=energy.spread,
                                stationary=energy.stationary, tolerance=tol.energy)
                r.check("stationary", energy.stationary)
                if s.energy_expected is not None:
                    r.values["expected"] = s.energy_expected
                    r.values["error"] = abs(energy.total - s.energy_expected)
                    r.check("total", r.values["error"] < tol.energy)
        elif diag == "spin_gauge":
            amp = np.abs(psi0)
            if grid.dimension == 2:
                values, arrays = _guarded(s, diag, spin_metrics, grid, s, amp,
                                          s.spin.exclusion_radius)
                r.values.update(values)
                r.check("magnitude", values["magnitude_error"] < tol.spin)
                r.check("deviation", values["deviation"] < tol.spin)
                r.check("compton_speed", math.isclose(values["compton_speed"],
                                                          s.spin.alpha * c.light_speed, rel_tol=1e-14))
            else:
                values, arrays = _guarded(s, diag, gauge_metrics_1d, grid, s, amp)
                r.values.update(values)
            r.values.update(gauge_tolerance=tol.gauge, spin_tolerance=tol.spin)
            r.check("gauge", values["gauge_l2"] < tol.gauge)
            fields.update(arrays)
        elif diag == "trajectories":
            starts = np.asarray(s.trajectories.starts)
            traj = _guarded(s, diag, integrate_trajectories, evolution, starts, c,
                            s.trajectories.method, 4, s.density_floor)
            crossings = _crossings(traj.positions, starts)
            r.values.update(count=len(starts), frozen=int(traj.frozen.sum()), crossings=crossings)
            r.check("frozen", not traj.frozen.any())
            r.check("crossings", crossings == 0)
            exact = _analytic_paths(s, traj.times, starts)
            if exact is not None:
                err = float(np.max(np.abs(traj.positions - exact)))
                r.values.update(max_error=err, tolerance=tol.trajectories)
                r.check("analytic", err < tol.trajectories)
            if s.trajectories.ensemble > 0:
                eq = _guarded(s, diag, equivariance_check, evolution, s.trajectories.ensemble,
                              32, seed, c)
                r.values.update(ensemble=s.trajectories.ensemble, seed=seed, chi2=eq.chi2,
                                dof=eq.dof, p_value=eq.p_value)
                r.check("equivariance", eq.p_value > MIN_P_VALUE)
            fields["trajectories"] = traj
        results[diag] = r

    provenance = {
        "grid.n": grid.n, "grid.min": grid.lo, "grid.max": grid.hi,
        "grid.boundary": grid.boundary, "grid.spacing": grid.spacing,
        "dt": s.evolution.dt, "steps": s.evolution.steps, "stride": s.evolution.stride,
        "version.package": __version__, "version.numpy": np.__version__,
        "version.scipy": scipy.__version__,
    }
    report = DiagnosticsReport(s.name, results, series, provenance, fields)
    target = out_dir if out_dir is not None else s.output_dir
    if target is not None:
        write_outputs(report, grid, Path(target))
    return report


# --- output ----------------------------------------------------------------

def write_field_csv(path: Path, grid: Grid, values) -> None:
    """One row per grid point: ``x[,y],value`` or ``x[,y],re,im`` for complex data."""
    coords = [c.ravel() for c in grid.coords]
    names = ["x", "y"][: grid.dimension]
    values = np.asarray(values)
    if np.iscomplexobj(values):
        cols = coords + [values.real.ravel(), values.imag.ravel()]
        names += ["re", "im"]
    else:
        cols = coords + [values.ravel()]
        names += ["value"]
    np.savetxt(path, np.column_stack(cols), delimiter=",", header=",".join(names),
               comments="", fmt="%.17g")


def write_outputs(report: DiagnosticsReport, grid: Grid, directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    for name, value in report.fields.items():
        if name == "trajectories":
            header = "t," + ",".join(f"x{i}" for i in range(value.positions.shape[1]))
            np.savetxt(directory / "trajectories.csv",
                       np.column_stack([value.times, value.positions]),
                       delimiter=",", header=header, comments="", fmt="%.17g")
        else:
            write_field_csv(directory / f"{name}.csv", grid, value)
    if "times" in report.series:
        np.savetxt(directory / "conserved.csv",
                   np.column_stack([report.series["times"], report.series["norm"]]),
                   delimiter=",", header="t,norm", comments="", fmt="%.17g")
    (directory / "report.txt").write_text(report.to_text())


# --- convergence -----------------------------------------------------------

@dataclass
class ConvergenceTable:
    """Residual norms per refinement level and observed orders between levels.

    An order is the string ``"floor"`` when both residuals are below 1e-10.
    """

    spacing: list
    dt: list
    residuals: dict
    orders: dict

    def lines(self) -> list[str]:
        out = []
        for i, (h, dt) in enumerate(zip(self.spacing, self.dt)):
            out.append(f"level.{i}.dx = {_text(h)}")
            out.append(f"level.{i}.dt = {_text(dt)}")
            out += [f"level.{i}.{k} = {_text(v[i])}" for k, v in self.residuals.items()]
        for k, v in self.orders.items():
            out.append(f"order.{k} = {_text(v)}")
        return out


def observed_orders(values, floor: float = FLOOR) -> list:
    out = []
    for a, b in zip(values[:-1], values[1:]):
        if a < floor and b < floor:
            out.append("floor")
        elif b <= 0 or a <= 0:
            out.append(float("nan"))
        else:
            out.append(math.log2(a / b))
    return out


def refine(s: Scenario) -> Scenario:
    """Halve the spacing and dt; keep the total time and the stride in steps."""
    ev = s.evolution
    evolution = dataclasses.replace(ev, dt=ev.dt / 2, steps=ev.steps * 2) if ev.steps else ev
    return dataclasses.replace(s, grid=s.grid.refined(), evolution=evolution, output_dir=None)


def _level_residuals(s: Scenario, region_radius: float | None) -> dict:
    grid = s.grid
    potential = _guarded(s, "setup", build_potential, s)
    psi0 = _guarded(s, "setup", initial_state, s, potential)
    eps = _node_epsilon(s, psi0)
    out = {}
    evolution = None
    if s.evolution.steps > 0:
        ev = s.evolution
        evolution = _guarded(s, "evolution", evolve, grid, psi0, potential, ev.dt, ev.steps,
                             ev.stride, s.constants)
    for diag in s.diagnostics:
        if diag == "continuity":
            out["continuity_l2"] = continuity_residual(evolution, s.constants, eps).l2
        elif diag == "hje":
            out["hje_l2"] = hje_from_evolution(evolution, None, eps, s.density_floor).l2
        elif diag == "spin_gauge":
            if grid.dimension == 2:
                values, _ = spin_metrics(grid, s, np.abs(psi0), s.spin.exclusion_radius,
                                         region_radius)
                out["gauge_l2"] = values["gauge_l2"]
                out["q_routes_l2"] = values["q_routes_l2"]
            else:
                out["gauge_l2"] = gauge_metrics_1d(grid, s, np.abs(psi0))[0]["gauge_l2"]
    return out


def convergence_study(s: Scenario, levels: int = 3) -> ConvergenceTable:
    """Rerun ``s`` on ``levels`` successively refined grids.

    The 2D spin norms are taken outside a fixed radius (twice the coarse
    exclusion radius) so every level measures the same physical region.
    """
    if levels < 2:
        raise ValueError("a convergence study needs at least 2 levels")
    region_radius = None
    if s.grid.dimension == 2 and "spin_gauge" in s.diagnostics:
        excl = s.spin.exclusion_radius or 2.0 * max(s.grid.spacing)
        region_radius = 2.0 * excl
    spacing, dts, residuals = [], [], {}
    level = s
    for i in range(levels):
        if i:
            level = refine(level)
        spacing.append(max(level.grid.spacing))
        dts.append(level.evolution.dt)
        for k, v in _level_residuals(level, region_radius).items():
            residuals.setdefault(k, []).append(v)
    orders = {k: observed_orders(v) for k, v in residuals.items()}
    return ConvergenceTable(spacing=spacing, dt=dts, residuals=residuals, orders=orders)
