"""Benchmark scenarios: configuration, orchestration, and tabular output.

Each scenario runs a list of formulations over a list of meshes; one
formulation's failure is recorded and does not abort the others.  Results
are collected into fixed-schema tables (one CSV per table on emission) plus
a JSON manifest echoing the configuration.
"""

from __future__ import annotations

import copy
import csv
import json
import subprocess
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import diagnostics as diag
from . import mechanics as mech
from .assembly import (EndMoment, Formulation, LoadModel, PointLoad, RodModel,
                       build_model, evaluate_centerline, straight_state)
from .mechanics import BarrierModel, RodProperties
from .solve import ConvergenceError, NewtonConfig, RodState, SolveReport, \
    dynamic_march, static_march

__all__ = [
    "SCENARIOS",
    "RunOutput",
    "default_config",
    "load_config",
    "parse_formulation",
    "run_scenario",
    "run_rollup",
    "run_rollup_convergence",
    "run_catenary",
    "run_mooring",
    "run_free_rod",
    "run_condition_sweep",
    "emit_output",
    "rollup_reference_circle",
]

GRAVITY = 9.81

_KEVLAR = {
    # DuPont Kevlar 49 type 968 cable used by the conditioning and catenary
    # studies: E = 81.8 GPa, rho = 1429 kg/m^3, diameter 7 mm, length 300 m
    "youngs_modulus": 81.8e9,
    "density": 1429.0,
    "length": 300.0,
    "diameter": 0.007,
}

_DEFAULT_FORMULATIONS = [
    {"scheme": "iga"},
    {"scheme": "nodal_r3"},
    {"scheme": "nodal_spp"},
    {"scheme": "nodal_spp_reduced"},
    {"scheme": "nodal_penalty"},
]

_DEFAULTS: dict[str, dict] = {
    "rollup": {
        "length": 40.0,
        "axial_stiffness": 100.0,
        "bending_stiffness": 200.0,
        "n_elements": [40],
        "n_steps": 55,
        "moment_turns": 1.0,
        "moment_pullback": "angle",
        "snapshot_steps": [11, 22, 33, 44, 55],
        "formulations": copy.deepcopy(_DEFAULT_FORMULATIONS),
        "newton": {"tolerance": 1e-10, "max_iterations": 50,
                   "max_increment_fraction": 0.25},
        "convergence_meshes": [],
    },
    "catenary": {
        "cable": dict(_KEVLAR),
        "n_elements": [40],
        "prestress_offset": 0.01,
        "weight_steps": 50,
        "motion_steps": 400,
        "fairlead": [50.0, 0.0, 280.0],
        "wind": {"speed": 15.0, "reference_height": 100.0,
                 "drag_coefficient": 0.0042875, "direction": [1.0, 0.0, 0.0]},
        "formulations": copy.deepcopy(_DEFAULT_FORMULATIONS),
        "newton": {"tolerance": 1e-10, "max_iterations": 80,
                   "max_increment_fraction": 0.02},
        "sample_points": 101,
    },
    "mooring": {
        "length": 627.0,
        "youngs_modulus": 5.6e10,
        "area": 0.0159,
        "submerged_weight": 2.46e3,
        "n_elements": [40],
        "dt": 0.01,
        "ramp_time": 10.0,
        "horizon": 30.0,
        "snapshot_interval": 5.0,
        "dimensionality": "2d",
        "fairlead_force": [1.0e6, 0.0, 0.745e6],
        "current": {"speed": 2.0, "reference_height": 100.0,
                    "drag_coefficient": 2.0, "direction": [1.0, 0.0, 0.0]},
        "barrier": {"height": -0.5, "strength": 25.0},
        "formulations": [
            {"scheme": "iga", "outlier_removal": True},
            {"scheme": "nodal_r3"},
            {"scheme": "nodal_spp"},
            {"scheme": "nodal_spp_reduced"},
            {"scheme": "nodal_penalty"},
        ],
        "newton": {"tolerance": 1e-10, "max_iterations": 50},
        "sample_points": 201,
    },
    "free_rod": {
        "length": 5.0,
        "axial_stiffness": 1.0e4,
        "bending_stiffness": 10.0,
        "mass_per_length": 2.0,
        "rotary_inertia": 0.0,
        "n_elements": [6],
        "dt": [0.01],
        "n_steps": 100,
        "translation": [0.2, -0.1, 0.05],
        "spin": [0.0, 0.3, 0.5],
        "formulations": [{"scheme": "iga"}, {"scheme": "nodal_spp"}],
        "newton": {"tolerance": 1e-12, "max_iterations": 50},
    },
    "condition": {
        "cable": dict(_KEVLAR),
        "n_elements": 40,
        "dt": 0.01,
        "penalty_sweep": [10.0**k for k in range(0, 11)],
        "director_scale_sweep": [0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 100.0, 1000.0],
        "regimes": ["static", "dynamic"],
    },
}

SCENARIOS = tuple(_DEFAULTS)


@dataclass
class RunOutput:
    """Tables and manifest of one scenario invocation."""

    scenario: str
    tables: dict[str, list[dict]] = field(default_factory=dict)
    manifest: dict = field(default_factory=dict)

    def add_rows(self, table: str, rows) -> None:
        self.tables.setdefault(table, []).extend(rows)


def default_config(scenario: str) -> dict:
    if scenario not in _DEFAULTS:
        raise ValueError(f"unknown scenario {scenario!r}; choose from {SCENARIOS}")
    return copy.deepcopy(_DEFAULTS[scenario])


def load_config(scenario: str, path: str | Path | None = None,
                overrides: dict | None = None) -> dict:
    """Defaults merged with a JSON config file and explicit overrides.

    Unknown keys are rejected so that typos fail fast; the merged mapping
    round-trips through JSON unchanged.
    """
    config = default_config(scenario)
    supplied = {}
    if path is not None:
        supplied = json.loads(Path(path).read_text())
    if overrides:
        supplied = {**supplied, **overrides}
    for key, value in supplied.items():
        if key not in config:
            raise ValueError(f"unknown config key {key!r} for scenario {scenario!r}")
        config[key] = value
    return config


def parse_formulation(spec: dict) -> Formulation:
    known = {"scheme", "degree", "smoothness", "outlier_removal",
             "penalty_factor", "director_scale"}
    unknown = set(spec) - known
    if unknown:
        raise ValueError(f"unknown formulation keys {sorted(unknown)}")
    return Formulation(**spec)


def _newton_config(block: dict) -> NewtonConfig:
    return NewtonConfig(**block)


def _row_base(scenario, label, n_elements):
    return {"scenario": scenario, "formulation": label, "n_elements": n_elements}


def _sample_grid(model: RodModel, n_samples: int) -> np.ndarray:
    return np.linspace(0.0, model.disc.length, n_samples)


def _stress_rows(scenario, label, n_elements, model, q, samples):
    res = diag.stress_resultants(model, q, samples)
    return [{**_row_base(scenario, label, n_elements),
             "s": float(s), "axial": float(a), "axial_norm": float(an),
             "bending_norm": float(b)}
            for s, a, an, b in zip(res["s"], res["axial"], res["axial_norm"],
                                   res["bending_norm"])]


def _snapshot_rows(scenario, label, n_elements, model, q, samples, step, time):
    pts = evaluate_centerline(model.disc, q, samples)[0]
    return [{**_row_base(scenario, label, n_elements), "step": step,
             "time": time, "s": float(s), "x": float(p[0]), "y": float(p[1]),
             "z": float(p[2])}
            for s, p in zip(samples, pts)]


def _stats_row(scenario, label, n_elements, report: SolveReport, status: str):
    return {**_row_base(scenario, label, n_elements),
            "status": status,
            "converged": report.converged if report.steps else False,
            "clean": report.clean if report.steps else False,
            "max_iterations": report.max_iterations,
            "total_iterations": report.total_iterations,
            "mean_time_per_iter_s": report.mean_seconds_per_iteration}


# --------------------------------------------------------------------------
# planar roll-up
# --------------------------------------------------------------------------

def rollup_reference_circle(length: float, turns: float = 1.0):
    """Closed-form circle the clamped rod bends into under the full moment."""
    alpha = 2.0 * np.pi * turns / length

    def reference(s):
        s = np.asarray(s, dtype=float)
        out = np.zeros((3, len(s), 3))
        out[0, :, 0] = np.sin(alpha * s) / alpha
        out[0, :, 1] = (1.0 - np.cos(alpha * s)) / alpha
        out[1, :, 0] = np.cos(alpha * s)
        out[1, :, 1] = np.sin(alpha * s)
        out[2, :, 0] = -alpha * np.sin(alpha * s)
        out[2, :, 1] = alpha * np.cos(alpha * s)
        return out

    return reference


def _rollup_model(form: Formulation, config: dict, n_elements: int) -> RodModel:
    props = RodProperties(config["axial_stiffness"], config["bending_stiffness"],
                          0.0, 0.0, config["length"])
    moment = (2.0 * np.pi * config["moment_turns"]
              * props.bending_stiffness / props.length)
    loads = LoadModel(end_moment=EndMoment(
        props.length, moment, (1.0, 0.0, 0.0), (0.0, 1.0, 0.0),
        config["moment_pullback"]))
    return build_model(form, props, n_elements, loads, fix_left="clamped")


def run_rollup(config: dict) -> RunOutput:
    out = RunOutput("rollup", manifest=_manifest("rollup", config))
    n_steps = config["n_steps"]
    newton = _newton_config(config["newton"])
    statuses = {}
    for spec in config["formulations"]:
        form = parse_formulation(spec)
        for n_elements in config["n_elements"]:
            model = _rollup_model(form, config, n_elements)
            samples = _sample_grid(model, 161)
            state = RodState(straight_state(model.disc))
            report = SolveReport(label=form.label)
            status = "converged"
            history = []
            try:
                _, report, history = static_march(
                    model, n_steps, ramp_schedule=lambda s: s / n_steps,
                    initial=state, config=newton, keep_history=True,
                    label=form.label)
            except ConvergenceError as exc:
                report = exc.report or report
                status = f"failed: {exc}"
            statuses[(form.label, n_elements)] = status
            out.add_rows("stats", [_stats_row("rollup", form.label, n_elements,
                                              report, status)])
            out.add_rows("iterations",
                         [{**_row_base("rollup", form.label, n_elements),
                           "step": r.step, "iterations": r.iterations,
                           "halvings": r.halvings}
                          for r in report.steps])
            if status != "converged":
                continue
            for step in config["snapshot_steps"]:
                if step < len(history):
                    out.add_rows("snapshots", _snapshot_rows(
                        "rollup", form.label, n_elements, model,
                        history[step].q, samples, step, float(step)))
            final = history[-1].q
            out.add_rows("stress", _stress_rows("rollup", form.label,
                                                n_elements, model, final, samples))
            tip = evaluate_centerline(model.disc, final, [model.disc.length])[0][0]
            reference = rollup_reference_circle(config["length"],
                                                config["moment_turns"])
            norms = diag.error_norms(model, final, reference)
            out.add_rows("norms", [{**_row_base("rollup", form.label, n_elements),
                                    "l2": norms.l2, "h1": norms.h1, "h2": norms.h2,
                                    "closure": float(np.linalg.norm(tip))}])
    out.manifest["statuses"] = {f"{k[0]}@{k[1]}": v for k, v in statuses.items()}
    return out


def run_rollup_convergence(config: dict) -> RunOutput:
    """Mesh-refinement study against the analytic circle."""
    study = dict(config)
    meshes = config.get("convergence_meshes") or [8, 16, 32, 64]
    study["n_elements"] = meshes
    study["snapshot_steps"] = []
    out = run_rollup(study)
    out.scenario = "rollup_convergence"
    for rows in out.tables.values():
        for row in rows:
            row["scenario"] = "rollup_convergence"
    return out


# --------------------------------------------------------------------------
# static catenary
# --------------------------------------------------------------------------

def _kevlar_properties(cable: dict) -> RodProperties:
    area = np.pi * (cable["diameter"] / 2.0) ** 2
    inertia = np.pi * cable["diameter"] ** 4 / 64.0
    return RodProperties(cable["youngs_modulus"] * area,
                         cable["youngs_modulus"] * inertia,
                         cable["density"] * area,
                         cable["density"] * inertia,
                         cable["length"])


def _catenary_loads(config: dict, props: RodProperties) -> LoadModel:
    wind = config["wind"]
    profile = mech.linear_flow_profile(
        wind["speed"], wind["reference_height"], wind["drag_coefficient"],
        direction=tuple(wind["direction"]))
    return LoadModel(gravity=(0.0, 0.0, -props.mass_per_length * GRAVITY),
                     flow=profile)


def _catenary_schedules(config: dict, model: RodModel):
    length = model.disc.length
    p_start = np.array([length, 0.0, 0.0])
    p_pre = np.array([length + config["prestress_offset"], 0.0, 0.0])
    p_fair = np.array(config["fairlead"], dtype=float)
    w_steps = config["weight_steps"]
    m_steps = config["motion_steps"]
    n_dof = model.disc.n_dof

    def right_end(x: float) -> np.ndarray:
        if x <= 1.0:
            return p_start + x * (p_pre - p_start)
        if x <= 1.0 + w_steps:
            return p_pre
        frac = min((x - 1.0 - w_steps) / m_steps, 1.0)
        return p_pre + frac * (p_fair - p_pre)

    def prescribed(x: float) -> np.ndarray:
        right = right_end(x)
        return np.array([0.0 if d < 3 else right[d - (n_dof - 3)]
                         for d in model.fixed_dofs])

    def ramp(x: float) -> float:
        if x <= 1.0:
            return 0.0
        return min((x - 1.0) / w_steps, 1.0)

    return prescribed, ramp, 1 + w_steps + m_steps


def run_catenary(config: dict) -> RunOutput:
    out = RunOutput("catenary", manifest=_manifest("catenary", config))
    newton = _newton_config(config["newton"])
    props = _kevlar_properties(config["cable"])
    statuses = {}
    for spec in config["formulations"]:
        form = parse_formulation(spec)
        for n_elements in config["n_elements"]:
            model = build_model(form, props, n_elements,
                                _catenary_loads(config, props),
                                fix_left="position", fix_right="position")
            prescribed, ramp, n_steps = _catenary_schedules(config, model)
            state = RodState(straight_state(model.disc))
            report = SolveReport(label=form.label)
            status = "converged"
            final = None
            try:
                final_state, report, _ = static_march(
                    model, n_steps, ramp_schedule=ramp, prescribed=prescribed,
                    initial=state, config=newton, label=form.label)
                final = final_state.q
            except ConvergenceError as exc:
                report = exc.report or report
                status = f"failed: {exc}"
            statuses[(form.label, n_elements)] = status
            out.add_rows("stats", [_stats_row("catenary", form.label,
                                              n_elements, report, status)])
            out.add_rows("iterations",
                         [{**_row_base("catenary", form.label, n_elements),
                           "step": r.step, "iterations": r.iterations,
                           "halvings": r.halvings}
                          for r in report.steps])
            if final is None:
                continue
            samples = _sample_grid(model, config["sample_points"])
            out.add_rows("snapshots", _snapshot_rows(
                "catenary", form.label, n_elements, model, final, samples,
                n_steps, float(n_steps)))
            out.add_rows("stress", _stress_rows("catenary", form.label,
                                                n_elements, model, final, samples))
    out.manifest["statuses"] = {f"{k[0]}@{k[1]}": v for k, v in statuses.items()}
    return out


# --------------------------------------------------------------------------
# dynamic mooring line
# --------------------------------------------------------------------------

def _mooring_model(form: Formulation, config: dict, n_elements: int) -> RodModel:
    area = config["area"]
    radius = np.sqrt(area / np.pi)
    inertia = np.pi * radius**4 / 4.0
    mass = config["submerged_weight"] / GRAVITY
    props = RodProperties(config["youngs_modulus"] * area,
                          config["youngs_modulus"] * inertia,
                          mass, (mass / area) * inertia, config["length"])
    cur = config["current"]
    profile = mech.log_flow_profile(cur["speed"], cur["reference_height"],
                                    cur["drag_coefficient"],
                                    direction=tuple(cur["direction"]))
    force = np.array(config["fairlead_force"], dtype=float)
    if config["dimensionality"] == "3d":
        force = np.array([force[0] / np.sqrt(2.0), force[0] / np.sqrt(2.0),
                          force[2]])
    barrier = BarrierModel(config["barrier"]["height"],
                           config["barrier"]["strength"])
    loads = LoadModel(gravity=(0.0, 0.0, -config["submerged_weight"]),
                      flow=profile,
                      point_loads=(PointLoad(config["length"], tuple(force)),),
                      barrier=barrier)
    return build_model(form, props, n_elements, loads, fix_left="position")


def run_mooring(config: dict) -> RunOutput:
    out = RunOutput("mooring", manifest=_manifest("mooring", config))
    newton = _newton_config(config["newton"])
    dt = config["dt"]
    n_steps = int(round(config["horizon"] / dt))
    snap_every = max(int(round(config["snapshot_interval"] / dt)), 1)
    ramp_time = config["ramp_time"]
    statuses = {}
    for spec in config["formulations"]:
        form = parse_formulation(spec)
        for n_elements in config["n_elements"]:
            model = _mooring_model(form, config, n_elements)
            samples = _sample_grid(model, config["sample_points"])
            state = RodState(straight_state(model.disc),
                             np.zeros(model.n_dof))
            fair_rows, energy_rows = [], []
            length = model.disc.length

            def record(step, st, model=model, form=form, n_elements=n_elements,
                       fair_rows=fair_rows, energy_rows=energy_rows):
                ders = evaluate_centerline(model.disc, st.q, [length], 0)
                vels = evaluate_centerline(model.disc, st.v, [length], 0)
                p, v = ders[0][0], vels[0][0]
                fair_rows.append({**_row_base("mooring", form.label, n_elements),
                                  "time": st.time,
                                  "x": float(p[0]), "y": float(p[1]), "z": float(p[2]),
                                  "vx": float(v[0]), "vy": float(v[1]), "vz": float(v[2])})
                en = diag.energies(model, st.q, st.v)
                energy_rows.append({**_row_base("mooring", form.label, n_elements),
                                    "time": st.time, "kinetic": en.kinetic,
                                    "strain": en.strain, "gravity": en.gravity,
                                    "barrier": en.barrier, "total": en.total})

            report = SolveReport(label=form.label)
            status = "converged"
            snaps = []
            final = None
            try:
                final_state, report, snaps = dynamic_march(
                    model, dt, n_steps,
                    ramp=lambda t: min(t / ramp_time, 1.0),
                    initial=state, config=newton,
                    snapshot_every=snap_every, on_step=record,
                    label=form.label)
                final = final_state
            except ConvergenceError as exc:
                report = exc.report or report
                status = f"failed: {exc}"
            statuses[(form.label, n_elements)] = status
            out.add_rows("stats", [_stats_row("mooring", form.label,
                                              n_elements, report, status)])
            out.add_rows("iterations",
                         [{**_row_base("mooring", form.label, n_elements),
                           "step": r.step, "iterations": r.iterations,
                           "halvings": r.halvings}
                          for r in report.steps])
            out.add_rows("fairlead", fair_rows)
            out.add_rows("energy", energy_rows)
            if final is None:
                continue
            for i, snap in enumerate(snaps):
                out.add_rows("snapshots", _snapshot_rows(
                    "mooring", form.label, n_elements, model, snap.q, samples,
                    i * snap_every, snap.time))
            out.add_rows("stress", _stress_rows("mooring", form.label,
                                                n_elements, model, final.q,
                                                samples))
            pts = evaluate_centerline(model.disc, final.q, samples)[0]
            # resting segment: points the barrier actually supports (barrier
            # force at least 10% of the distributed weight)
            barrier = config["barrier"]
            gap_rest = np.sqrt(barrier["strength"]
                               / (0.1 * config["submerged_weight"]))
            low = pts[pts[:, 2] <= barrier["height"] + gap_rest]
            out.manifest.setdefault("resting", {})[f"{form.label}@{n_elements}"] = {
                "n_points": int(low.shape[0]),
                "z_min": float(low[:, 2].min()) if low.size else None,
                "z_max": float(low[:, 2].max()) if low.size else None,
            }
    out.manifest["statuses"] = {f"{k[0]}@{k[1]}": v for k, v in statuses.items()}
    return out


# --------------------------------------------------------------------------
# free rod conservation
# --------------------------------------------------------------------------

def _free_rod_model(form: Formulation, config: dict, n_elements: int) -> RodModel:
    props = RodProperties(config["axial_stiffness"], config["bending_stiffness"],
                          config["mass_per_length"], config["rotary_inertia"],
                          config["length"])
    return build_model(form, props, n_elements, LoadModel())


def _rigid_velocity(model: RodModel, translation, spin) -> np.ndarray:
    u = np.asarray(translation, dtype=float)
    omega = np.asarray(spin, dtype=float)
    center = np.array([model.disc.length / 2.0, 0.0, 0.0])
    q0 = straight_state(model.disc).reshape(-1, 3)
    v = np.zeros_like(q0)
    if model.disc.kind == "hermite":
        v[0::2] = u + np.cross(omega, q0[0::2] - center)
        v[1::2] = np.cross(omega, q0[1::2])
    else:
        # control coefficients transform like points under rigid fields
        v[:] = u + np.cross(omega, q0 - center)
    return v.ravel()


def run_free_rod(config: dict) -> RunOutput:
    out = RunOutput("free_rod", manifest=_manifest("free_rod", config))
    newton = _newton_config(config["newton"])
    for spec in config["formulations"]:
        form = parse_formulation(spec)
        for n_elements in config["n_elements"]:
            for dt in config["dt"]:
                model = _free_rod_model(form, config, n_elements)
                q0 = straight_state(model.disc)
                v0 = _rigid_velocity(model, config["translation"], config["spin"])
                state = RodState(q0.copy(), v0)
                rows = []
                lin0, ang0 = diag.momenta(model, q0, v0)
                en0 = diag.energies(model, q0, v0)

                def record(step, st, model=model, rows=rows, form=form,
                           n_elements=n_elements, dt=dt):
                    lin, ang = diag.momenta(model, st.q, st.v)
                    en = diag.energies(model, st.q, st.v)
                    rows.append({**_row_base("free_rod", form.label, n_elements),
                                 "dt": dt, "time": st.time,
                                 "linear_x": float(lin[0]), "linear_y": float(lin[1]),
                                 "linear_z": float(lin[2]),
                                 "angular_x": float(ang[0]), "angular_y": float(ang[1]),
                                 "angular_z": float(ang[2]), "total_energy": en.total})

                _, report, _ = dynamic_march(model, dt, config["n_steps"],
                                             initial=state, config=newton,
                                             on_step=record, label=form.label)
                out.add_rows("conservation", rows)
                out.add_rows("stats", [
                    {**_stats_row("free_rod", form.label, n_elements, report,
                                  "converged"), "dt": dt}])
                out.manifest.setdefault("initial", {})[f"{form.label}@{dt}"] = {
                    "linear": [float(x) for x in lin0],
                    "angular": [float(x) for x in ang0],
                    "total_energy": en0.total,
                }
    return out


# --------------------------------------------------------------------------
# condition-number sweeps
# --------------------------------------------------------------------------

def _condition_model(form: Formulation, config: dict) -> RodModel:
    props = _kevlar_properties(config["cable"])
    loads = LoadModel(gravity=(0.0, 0.0, -props.mass_per_length * GRAVITY))
    return build_model(form, props, config["n_elements"], loads,
                       fix_left="position", fix_right="position")


def _first_iteration_matrix(model: RodModel, regime: str, dt: float):
    from .assembly import assemble_system
    q0 = straight_state(model.disc)
    lam = np.zeros(model.n_constraints) if model.formulation.scheme == "nodal_spp" else None
    if regime == "static":
        system = assemble_system(model, "static", q0, lam, ramp=1.0)
    else:
        system = assemble_system(model, "dynamic", q0, lam, q_old=q0,
                                 v_old=np.zeros(model.n_dof), dt=dt, ramp=1.0)
    return system


def run_condition_sweep(config: dict) -> RunOutput:
    out = RunOutput("condition", manifest=_manifest("condition", config))
    dt = config["dt"]
    rows = []

    def record(label, regime, parameter, value, system):
        est, method = diag.condition_estimate(system.matrix)
        rows.append({"scenario": "condition", "formulation": label,
                     "regime": regime, "parameter": parameter,
                     "value": value, "estimate": est, "method": method,
                     "symmetric": system.symmetric})

    for regime in config["regimes"]:
        # reference formulations (parameter-free)
        for spec in ({"scheme": "iga"},
                     {"scheme": "iga", "outlier_removal": True},
                     {"scheme": "nodal_r3"}):
            form = parse_formulation(spec)
            model = _condition_model(form, config)
            system = _first_iteration_matrix(model, regime, dt)
            record(form.label, regime, "none", 0.0, system)
        for beta in config["penalty_sweep"]:
            form = Formulation("nodal_penalty", penalty_factor=beta)
            model = _condition_model(form, config)
            system = _first_iteration_matrix(model, regime, dt)
            record(form.label, regime, "penalty_factor", beta, system)
        props = _kevlar_properties(config["cable"])
        beta_unit = props.length / (2.0 * props.bending_stiffness)
        for alpha in config["director_scale_sweep"]:
            for scheme, beta in (("nodal_spp", None),
                                 ("nodal_spp_reduced", None),
                                 ("nodal_penalty", beta_unit)):
                form = Formulation(scheme, director_scale=alpha,
                                   penalty_factor=beta if beta else 1e5)
                model = _condition_model(form, config)
                system = _first_iteration_matrix(model, regime, dt)
                record(f"{form.label}", regime, "director_scale", alpha, system)
    out.add_rows("condition", rows)
    return out


# --------------------------------------------------------------------------
# orchestration and output
# --------------------------------------------------------------------------

_RUNNERS = {
    "rollup": run_rollup,
    "rollup_convergence": run_rollup_convergence,
    "catenary": run_catenary,
    "mooring": run_mooring,
    "free_rod": run_free_rod,
    "condition": run_condition_sweep,
}


def run_scenario(scenario: str, config: dict) -> RunOutput:
    runner = _RUNNERS.get(scenario)
    if runner is None:
        raise ValueError(f"unknown scenario {scenario!r}")
    return runner(config)


def _build_id() -> str:
    try:
        described = subprocess.run(
            ["git", "describe", "--always", "--dirty"], capture_output=True,
            text=True, timeout=5, check=False).stdout.strip()
    except (OSError, subprocess.SubprocessError):
        described = ""
    return described or f"rodlab-{__version__}"


def _manifest(scenario: str, config: dict) -> dict:
    return {"scenario": scenario, "config": copy.deepcopy(config),
            "build": _build_id(), "version": __version__}


#: Column order per table; rows may omit trailing columns (written empty).
_SCHEMAS = {
    "snapshots": ["scenario", "formulation", "n_elements", "step", "time",
                  "s", "x", "y", "z"],
    "stress": ["scenario", "formulation", "n_elements", "s", "axial",
               "axial_norm", "bending_norm"],
    "fairlead": ["scenario", "formulation", "n_elements", "time", "x", "y",
                 "z", "vx", "vy", "vz"],
    "energy": ["scenario", "formulation", "n_elements", "time", "kinetic",
               "strain", "gravity", "barrier", "total"],
    "stats": ["scenario", "formulation", "n_elements", "status", "converged",
              "clean", "max_iterations", "total_iterations",
              "mean_time_per_iter_s", "dt"],
    "norms": ["scenario", "formulation", "n_elements", "l2", "h1", "h2",
              "closure"],
    "iterations": ["scenario", "formulation", "n_elements", "step",
                   "iterations", "halvings"],
    "condition": ["scenario", "formulation", "regime", "parameter", "value",
                  "estimate", "method", "symmetric"],
    "conservation": ["scenario", "formulation", "n_elements", "dt", "time",
                     "linear_x", "linear_y", "linear_z", "angular_x",
                     "angular_y", "angular_z", "total_energy"],
}


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return "" if value is None else str(value)


def emit_output(output: RunOutput, directory: str | Path) -> list[Path]:
    """Write one CSV per table plus the JSON manifest.

    Physics tables are bit-reproducible across reruns of the same
    configuration; ``stats.csv`` carries wall-clock timings and is exempt.
    """
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {directory}: {exc}") from exc
    written = []
    for table, rows in sorted(output.tables.items()):
        schema = _SCHEMAS.get(table)
        if schema is None:
            schema = sorted({key for row in rows for key in row})
        path = directory / f"{table}.csv"
        try:
            with path.open("w", newline="", encoding="utf-8") as handle:
                writer = csv.writer(handle)
                writer.writerow(schema)
                for row in rows:
                    writer.writerow([_format_value(row.get(col)) for col in schema])
        except OSError as exc:
            raise OSError(f"cannot write table {path}: {exc}") from exc
        written.append(path)
    manifest_path = directory / "manifest.json"
    manifest_path.write_text(json.dumps(output.manifest, indent=2, sort_keys=True)
                             + "\n", encoding="utf-8")
    written.append(manifest_path)
    return written
