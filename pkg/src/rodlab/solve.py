"""Newton-Raphson solves, static load stepping, and implicit time stepping.

The dynamic scheme combines the midpoint and trapezoidal rules: force terms
are evaluated at the midpoint configuration
``q_mid = (q_n + q_{n+1}) / 2``, the velocity update is trapezoidal
``v_{n+1} = 2 (q_{n+1} - q_n) / dt - v_n``, and external loads are taken at
the half step.  The scheme is second-order accurate, preserves linear and
angular momentum exactly (up to the Newton tolerance), and approximately
preserves energy.
"""

from __future__ import annotations

import time as _time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import AssembledSystem, RodModel, _gp_fields, assemble_system
from .mechanics import BarrierPenetrationError, SingularConfigurationError

__all__ = [
    "NewtonConfig",
    "StepRecord",
    "SolveReport",
    "RodState",
    "IllConditionedSystemError",
    "ConvergenceError",
    "linear_solve",
    "newton_solve",
    "static_march",
    "dynamic_march",
]


class IllConditionedSystemError(RuntimeError):
    """Raised when the iteration matrix cannot be factorized reliably."""

    def __init__(self, message: str, condition_estimate: float = np.inf):
        super().__init__(message)
        self.condition_estimate = condition_estimate


class ConvergenceError(RuntimeError):
    """Raised when a step fails after the rejection policy is exhausted."""

    def __init__(self, message: str, report: "SolveReport | None" = None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class NewtonConfig:
    """Convergence control for the Newton-Raphson iterations.

    Convergence is declared when the configuration increment satisfies
    ``|dq| <= tolerance * max(|q|, scale)`` (the force-residual floor of a
    direct solve scales with the matrix condition number, which for taut
    cables makes a comparably tight force criterion unreachable in double
    precision).  A zero force residual converges immediately;
    ``absolute_tolerance`` (default off) additionally accepts steps whose
    force residual is already below the given value.
    """

    tolerance: float = 1e-10
    absolute_tolerance: float = 0.0
    max_iterations: int = 50
    max_step_halvings: int = 5
    max_increment_fraction: float = 0.05   # update cap relative to rod length
    residual_guard: float = 1.0            # accept only below this peak fraction
    late_stage_iterations: int = 20        # after this many solves ...
    late_stage_fraction: float = 1e-5      # ... accept this force reduction

    def __post_init__(self):
        if self.tolerance <= 0.0:
            raise ValueError("tolerance must be positive")


@dataclass
class StepRecord:
    step: int
    time: float
    iterations: int
    seconds: float
    residual_history: list[float]
    converged: bool
    halvings: int = 0
    condition_estimate: float | None = None


@dataclass
class SolveReport:
    """Per-step iteration counts and timing of one march."""

    label: str = ""
    steps: list[StepRecord] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return all(s.converged for s in self.steps)

    @property
    def clean(self) -> bool:
        """Converged without any step rejections."""
        return self.converged and all(s.halvings == 0 for s in self.steps)

    @property
    def max_iterations(self) -> int:
        return max((s.iterations for s in self.steps), default=0)

    @property
    def total_iterations(self) -> int:
        return sum(s.iterations for s in self.steps)

    @property
    def mean_seconds_per_iteration(self) -> float:
        iters = self.total_iterations
        if iters == 0:
            return 0.0
        return sum(s.seconds for s in self.steps) / iters


@dataclass
class RodState:
    """Configuration, velocity, and multipliers at one time/load level."""

    q: np.ndarray
    v: np.ndarray | None = None
    lam: np.ndarray | None = None
    time: float = 0.0

    def copy(self) -> "RodState":
        return RodState(self.q.copy(),
                        None if self.v is None else self.v.copy(),
                        None if self.lam is None else self.lam.copy(),
                        self.time)


def _state_admissible(model: RodModel, q: np.ndarray) -> bool:
    """Tangent norms above tolerance and all points on the safe barrier side.

    In dynamics the force terms act at the midpoint configuration, which
    lies between two admissible states whenever both ends are admissible
    (gaps and tangent norms are checked on the new level; the midpoint of
    two safe states stays safe for the convex barrier gap).
    """
    val, d1, _ = _gp_fields(model.disc, q)
    speed2 = np.einsum("egc,egc->eg", d1, d1)
    if not np.all(np.isfinite(speed2)) or np.any(speed2 <= model.min_speed**2):
        return False
    if model.loads.barrier is not None:
        if np.any(val[..., 2] - model.loads.barrier.height <= 0.0):
            return False
    return True


def linear_solve(system: AssembledSystem) -> np.ndarray:
    """Direct sparse solve of one iteration system.

    Symmetric systems use a symmetric-pattern ordering, general ones a
    column ordering; a failed or unstable factorization raises
    ``IllConditionedSystemError`` with a condition estimate attached.
    """
    mat = system.matrix.tocsc()
    if mat.shape[0] != mat.shape[1]:
        raise ValueError(f"system matrix is not square: {mat.shape}")
    if mat.shape[0] == 0:
        return np.zeros(0)
    perm = "MMD_AT_PLUS_A" if system.symmetric else "COLAMD"
    try:
        lu = spla.splu(mat, permc_spec=perm)
        sol = lu.solve(system.rhs)
    except RuntimeError as exc:
        raise IllConditionedSystemError(
            f"sparse factorization failed: {exc}",
            condition_estimate=_cheap_condition(mat)) from exc
    if not np.all(np.isfinite(sol)):
        raise IllConditionedSystemError(
            "non-finite solution from factorization",
            condition_estimate=_cheap_condition(mat))
    return sol


def _cheap_condition(mat: sp.csc_matrix) -> float:
    try:
        lu = spla.splu(mat.tocsc(), permc_spec="COLAMD")
        inv_norm = spla.onenormest(
            spla.LinearOperator(mat.shape, matvec=lu.solve,
                                rmatvec=lambda x: lu.solve(x, trans="T")))
        return float(spla.onenormest(mat) * inv_norm)
    except (RuntimeError, ValueError):
        return np.inf


def newton_solve(model: RodModel, regime: str, state: RodState, *,
                 q_old: np.ndarray | None = None,
                 v_old: np.ndarray | None = None,
                 dt: float | None = None,
                 ramp: float = 1.0,
                 flow_reference: np.ndarray | None = None,
                 config: NewtonConfig = NewtonConfig()) -> tuple[RodState, StepRecord]:
    """Drive the residual of one step to the configured tolerance.

    ``state`` carries the initial iterate (configuration at the unknown
    time/load level and the multiplier warm start).  Prescribed dofs must
    already hold their target values; their increments stay zero.
    """
    q = state.q.copy()
    if (flow_reference is None and model.loads.flow is not None
            and model.loads.flow_update == "staggered"):
        flow_reference = q_old if q_old is not None else q.copy()
    lam = None
    if model.formulation.scheme == "nodal_spp":
        lam = (np.zeros(model.n_constraints) if state.lam is None
               else state.lam.copy())

    history: list[float] = []
    start = _time.perf_counter()
    scale = model.disc.length
    condition = None
    converged = False
    iterations = 0
    peak = 0.0
    pending = False   # increment already small; confirm on the next residual

    for k in range(config.max_iterations + 1):
        try:
            system = assemble_system(model, regime, q, lam, q_old=q_old,
                                     v_old=v_old, dt=dt, ramp=ramp,
                                     flow_reference=flow_reference)
        except (SingularConfigurationError, BarrierPenetrationError):
            history.append(np.nan)
            break
        rnorm = float(np.linalg.norm(system.rhs))
        history.append(rnorm)
        if not np.isfinite(rnorm):
            break
        if rnorm == 0.0 or rnorm <= config.absolute_tolerance:
            converged = True
            iterations = k
            break
        if pending and rnorm <= config.residual_guard * peak:
            converged = True
            iterations = k
            break
        if (k >= config.late_stage_iterations
                and rnorm <= config.late_stage_fraction * peak):
            # past a reasonable iteration budget, accept working-precision
            # force convergence: an ill-conditioned tangent caps the
            # reachable residual at roughly eps * cond * peak, which the
            # increment criterion cannot certify
            converged = True
            iterations = k
            break
        peak = max(peak, rnorm)
        if k == config.max_iterations:
            break
        # a full Newton step can orbit a soft equilibrium in a period-2
        # cycle (residual alternating high/low around it); the cycle's
        # midpoint sits near the solution, so take the half step whenever
        # the signature appears
        damping = 1.0
        if (k >= 2 and rnorm > 4.0 * history[-2]
                and 0.5 * history[-3] < rnorm < 2.0 * history[-3]):
            damping = 0.5
        try:
            delta = linear_solve(system)
        except IllConditionedSystemError as exc:
            condition = exc.condition_estimate
            break
        if system.reduction is not None:
            dq_free = system.reduction @ delta
        else:
            dq_free = delta[:len(model.free_dofs)]
        # cap excessive excursions; the cap leaves converging steps untouched
        step_scale = damping
        cap = config.max_increment_fraction * scale
        biggest = float(np.max(np.abs(dq_free))) if dq_free.size else 0.0
        if cap > 0.0 and damping * biggest > cap:
            step_scale = cap / biggest
        # backtrack the update when it would cross the barrier or collapse
        # the tangent; a fruitless backtrack fails the step instead
        admissible = False
        for _ in range(10):
            trial = q.copy()
            trial[model.free_dofs] += step_scale * dq_free
            ok = _state_admissible(model, trial)
            if ok and regime == "dynamic":
                ok = _state_admissible(model, 0.5 * (trial + q_old))
            if ok:
                admissible = True
                break
            step_scale *= 0.5
        if not admissible:
            history.append(np.nan)
            break
        q = trial
        if lam is not None and system.n_multipliers:
            lam = lam + step_scale * delta[-system.n_multipliers:]
        iterations = k + 1
        dq_norm = step_scale * float(np.linalg.norm(dq_free))
        # declare convergence only from an uncapped update (a damped-but-tiny
        # increment still qualifies; a cap-limited one does not)
        pending = (step_scale == damping and dq_norm <= config.tolerance
                   * max(float(np.linalg.norm(q)), scale))

    seconds = _time.perf_counter() - start
    if not converged and condition is None and history and np.isfinite(history[-1]):
        # attach a conditioning diagnostic to non-converged steps
        condition = _cheap_condition(
            assemble_system(model, regime, q, lam, q_old=q_old, v_old=v_old,
                            dt=dt, ramp=ramp,
                            flow_reference=flow_reference).matrix)
    record = StepRecord(step=-1, time=state.time, iterations=iterations,
                        seconds=seconds, residual_history=history,
                        converged=converged, condition_estimate=condition)
    return RodState(q, state.v, lam, state.time), record


def static_march(model: RodModel, n_steps: int, *,
                 ramp_schedule=None, prescribed=None,
                 initial: RodState | None = None,
                 config: NewtonConfig = NewtonConfig(),
                 keep_history: bool = False,
                 label: str = "") -> tuple[RodState, SolveReport, list[RodState]]:
    """March through load/motion steps, solving statics at each level.

    ``ramp_schedule(step)`` gives the load factor, ``prescribed(step)`` the
    values of the model's fixed dofs, both for steps ``1..n_steps`` (step 0
    is the initial state).  Failed steps are retried with halved increments
    up to ``config.max_step_halvings``; a step that exhausts the policy
    aborts the march with the report attached.
    """
    state = initial.copy() if initial is not None else RodState(
        np.zeros(model.n_dof))
    report = SolveReport(label=label)
    history = [state.copy()] if keep_history else []

    def targets(step_float):
        ramp = 1.0 if ramp_schedule is None else float(ramp_schedule(step_float))
        values = None if prescribed is None else np.asarray(prescribed(step_float), dtype=float)
        return ramp, values

    increment = np.zeros(model.n_dof)
    for step in range(1, n_steps + 1):
        pending = [(float(step - 1), float(step), 0)]
        step_records: list[StepRecord] = []
        failed = None
        first_attempt = True
        while pending:
            lo, hi, level = pending.pop()
            ramp, values = targets(hi)
            trial = state.copy()
            if first_attempt:
                # secant predictor: continue the previous step's motion
                trial.q[model.free_dofs] += increment[model.free_dofs]
                first_attempt = False
            if values is not None:
                trial.q[model.fixed_dofs] = values
            if not _state_admissible(model, trial.q):
                trial.q[model.free_dofs] = state.q[model.free_dofs]
                if values is not None:
                    trial.q[model.fixed_dofs] = values
            before = state.q.copy()
            trial, rec = newton_solve(model, "static", trial, ramp=ramp,
                                      flow_reference=before, config=config)
            rec.step = step
            rec.halvings = level
            if rec.converged:
                state = trial
                increment = state.q - before
                step_records.append(rec)
                continue
            if level >= config.max_step_halvings:
                step_records.append(rec)
                failed = rec
                break
            increment = np.zeros(model.n_dof)
            mid = 0.5 * (lo + hi)
            pending.extend([(mid, hi, level + 1), (lo, mid, level + 1)])
        # merge substep records into one per nominal step
        merged = _merge_records(step, step_records)
        report.steps.append(merged)
        if failed is not None:
            report.steps[-1].converged = False
            raise ConvergenceError(
                f"static step {step} failed after {failed.halvings} halvings "
                f"(condition estimate {failed.condition_estimate})", report)
        if keep_history:
            history.append(state.copy())
    return state, report, history


def _merge_records(step: int, records: list[StepRecord]) -> StepRecord:
    """Collapse the (sub)step attempts of one nominal step.

    Rejected attempts count toward the iteration maximum and timing, but the
    step outcome is that of the last attempt (the one reaching the target
    level after any halvings).
    """
    if not records:
        return StepRecord(step, 0.0, 0, 0.0, [], False)
    return StepRecord(
        step=step,
        time=records[-1].time,
        iterations=max(r.iterations for r in records),
        seconds=sum(r.seconds for r in records),
        residual_history=records[-1].residual_history,
        converged=records[-1].converged,
        halvings=max(r.halvings for r in records),
        condition_estimate=records[-1].condition_estimate)


def dynamic_march(model: RodModel, dt: float, n_steps: int, *,
                  ramp=None, prescribed=None,
                  initial: RodState | None = None,
                  config: NewtonConfig = NewtonConfig(),
                  snapshot_every: int = 0,
                  on_step=None,
                  label: str = "") -> tuple[RodState, SolveReport, list[RodState]]:
    """Integrate from the initial state over ``n_steps`` of size ``dt``.

    ``ramp(t)`` gives the load factor at time ``t`` (evaluated at the half
    step), ``prescribed(t)`` the fixed-dof values at the new time level.
    Failed steps are retried with halved ``dt`` (bounded); snapshots of the
    state are kept every ``snapshot_every`` accepted steps when requested.
    """
    if dt <= 0.0:
        raise ValueError("time step must be positive")
    state = initial.copy() if initial is not None else RodState(
        np.zeros(model.n_dof), np.zeros(model.n_dof))
    if state.v is None:
        state.v = np.zeros(model.n_dof)
    if prescribed is not None and len(model.fixed_dofs):
        # start prescribed dofs with schedule-consistent velocities, else the
        # trapezoidal update oscillates around the schedule rate forever
        v0 = (np.asarray(prescribed(state.time + dt), dtype=float)
              - np.asarray(prescribed(state.time), dtype=float)) / dt
        state.v[model.fixed_dofs] = v0
    report = SolveReport(label=label)
    snapshots = [state.copy()] if snapshot_every else []

    for step in range(1, n_steps + 1):
        t_end = state.time + dt
        records: list[StepRecord] = []
        try:
            state = _advance(model, state, t_end, ramp, prescribed, config,
                             records, level=0)
        except ConvergenceError as exc:
            report.steps.append(_merge_records(step, records))
            report.steps[-1].converged = False
            exc.report = report
            raise
        report.steps.append(_merge_records(step, records))
        if on_step is not None:
            on_step(step, state)
        if snapshot_every and step % snapshot_every == 0:
            snapshots.append(state.copy())
    return state, report, snapshots


def _advance(model: RodModel, state: RodState, t_end: float, ramp, prescribed,
             config: NewtonConfig, records: list[StepRecord], level: int) -> RodState:
    dt = t_end - state.time
    t_mid = state.time + 0.5 * dt
    factor = 1.0 if ramp is None else float(ramp(t_mid))
    trial = state.copy()
    trial.time = t_end
    trial.q = state.q.copy()
    if prescribed is not None:
        trial.q[model.fixed_dofs] = np.asarray(prescribed(t_end), dtype=float)
    new_state, rec = newton_solve(model, "dynamic", trial, q_old=state.q,
                                  v_old=state.v, dt=dt, ramp=factor,
                                  config=config)
    rec.halvings = level
    records.append(rec)
    if rec.converged:
        new_state.v = 2.0 * (new_state.q - state.q) / dt - state.v
        new_state.time = t_end
        return new_state
    if level >= config.max_step_halvings:
        raise ConvergenceError(
            f"dynamic step to t={t_end:.6g} failed after {level} halvings "
            f"(condition estimate {rec.condition_estimate})")
    mid_state = _advance(model, state, state.time + 0.5 * dt, ramp, prescribed,
                         config, records, level + 1)
    return _advance(model, mid_state, t_end, ramp, prescribed, config,
                    records, level + 1)
