"""Energies, momenta, stress sampling, error norms, and run statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import mechanics as mech
from .assembly import RodModel, _gp_fields, assemble_mass, evaluate_centerline
from .solve import SolveReport

__all__ = [
    "EnergyBreakdown",
    "ErrorNorms",
    "energies",
    "momenta",
    "stress_resultants",
    "error_norms",
    "condition_estimate",
    "symmetry_audit",
    "run_stats",
]


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic: float
    strain: float
    gravity: float
    barrier: float

    @property
    def total(self) -> float:
        return self.kinetic + self.strain + self.gravity + self.barrier


@dataclass(frozen=True)
class ErrorNorms:
    l2: float
    h1: float
    h2: float


def energies(model: RodModel, q: np.ndarray,
             v: np.ndarray | None = None) -> EnergyBreakdown:
    """Energy content of a state; every term is the exact potential whose
    negative gradient is the corresponding assembled force."""
    disc = model.disc
    val, d1, d2 = _gp_fields(disc, q)
    kin = mech.kinematics_at(d1, d2, model.min_speed)
    w = disc.weights
    strain = float(np.sum(w * mech.strain_energy_density(model.props, kin)))

    kinetic = 0.0
    if v is not None and (model.props.mass_per_length > 0.0
                          or model.props.rotary_inertia > 0.0):
        mass = assemble_mass(model, q)
        kinetic = 0.5 * float(np.asarray(v) @ (mass @ np.asarray(v)))

    gravity = 0.0
    if model.loads.gravity is not None:
        g_vec = np.asarray(model.loads.gravity, dtype=float)
        gravity = -float(np.sum(w * np.einsum("egc,c->eg", val, g_vec)))

    barrier = 0.0
    if model.loads.barrier is not None:
        dens = mech.barrier_energy_density(model.loads.barrier, val[..., 2])
        barrier = float(np.sum(w * dens))
    return EnergyBreakdown(kinetic, strain, gravity, barrier)


def momenta(model: RodModel, q: np.ndarray,
            v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Linear and angular momentum consistent with the kinetic metric.

    Linear: ``int A_rho phi_dot ds``.  Angular: ``int A_rho phi x phi_dot ds``
    plus the rotary term ``int I_rho / |phi'|^2 phi' x phi_dot' ds`` that the
    projector structure of the metric induces.
    """
    disc = model.disc
    val, d1, _ = _gp_fields(disc, q)
    vel, vel1, _ = _gp_fields(disc, v)
    w = disc.weights
    a_rho = model.props.mass_per_length
    linear = a_rho * np.einsum("eg,egc->c", w, vel)
    angular = a_rho * np.einsum("eg,egc->c", w, np.cross(val, vel))
    if model.props.rotary_inertia > 0.0:
        speed2 = np.einsum("egc,egc->eg", d1, d1)
        angular = angular + model.props.rotary_inertia * np.einsum(
            "eg,egc->c", w / speed2, np.cross(d1, vel1))
    return linear, angular


def stress_resultants(model: RodModel, q: np.ndarray,
                      sample_points: np.ndarray) -> dict[str, np.ndarray]:
    """Axial and bending resultants at the sample arclengths.

    The axial value is signed by the stretch (positive in tension); the
    bending value is the moment magnitude.
    """
    ders = evaluate_centerline(model.disc, q, sample_points, max_deriv=2)
    kin = mech.kinematics_at(ders[1], ders[2], model.min_speed)
    n_vec, m_vec = mech.stress(model.props, kin.axial_strain, kin.curvature)
    axial = model.props.axial_stiffness * (kin.speed - 1.0)
    return {
        "s": np.asarray(sample_points, dtype=float),
        "axial": axial,
        "axial_norm": np.linalg.norm(n_vec, axis=-1),
        "bending_norm": np.linalg.norm(m_vec, axis=-1),
    }


def error_norms(model: RodModel, q: np.ndarray, reference) -> ErrorNorms:
    """Relative L2/H1/H2 errors against a reference curve.

    ``reference(s)`` must return value, first, and second derivative arrays
    of shape ``(3, n, 3)`` at the query arclengths.  Derivative jumps at the
    C1 breakpoints are not sampled (quadrature points are interior), so the
    H2 norm is the broken norm the discrete space can express.
    """
    disc = model.disc
    val, d1, d2 = _gp_fields(disc, q)
    s = disc.points
    ref = np.asarray(reference(s.ravel()), dtype=float).reshape(3, *s.shape, 3)
    w = disc.weights

    def seminorm(a, b):
        return float(np.sum(w * np.einsum("egc,egc->eg", a - b, a - b)))

    def norm_of(b):
        return float(np.sum(w * np.einsum("egc,egc->eg", b, b)))

    e0, e1, e2 = (seminorm(val, ref[0]), seminorm(d1, ref[1]),
                  seminorm(d2, ref[2]))
    r0, r1, r2 = norm_of(ref[0]), norm_of(ref[1]), norm_of(ref[2])
    if r0 <= 0.0:
        raise ValueError("reference curve has zero norm")
    l2 = np.sqrt(e0 / r0)
    h1 = np.sqrt((e0 + e1) / (r0 + r1))
    h2 = np.sqrt((e0 + e1 + e2) / (r0 + r1 + r2))
    return ErrorNorms(l2, h1, h2)


def condition_estimate(matrix: sp.spmatrix, dense_threshold: int = 1500) -> tuple[float, str]:
    """2-norm condition via dense SVD for small systems, or a power-iteration
    estimate through a sparse factorization above the threshold.

    Returns ``(estimate, method)``; a singular matrix reports ``inf``.
    """
    mat = sp.csc_matrix(matrix)
    n = mat.shape[0]
    if n == 0:
        return 1.0, "empty"
    if n <= dense_threshold:
        sv = np.linalg.svd(mat.toarray(), compute_uv=False)
        if sv[-1] <= 0.0 or not np.isfinite(sv[0]):
            return np.inf, "svd"
        return float(sv[0] / sv[-1]), "svd"
    try:
        lu = spla.splu(mat, permc_spec="COLAMD")
    except RuntimeError:
        return np.inf, "power"
    rng = np.random.default_rng(0)

    def largest_singular(matvec, rmatvec, iters=30):
        x = rng.standard_normal(n)
        x /= np.linalg.norm(x)
        sigma = 0.0
        for _ in range(iters):
            y = matvec(x)
            x = rmatvec(y)
            norm = np.linalg.norm(x)
            if norm == 0.0 or not np.isfinite(norm):
                return np.inf
            sigma = np.sqrt(norm)
            x /= norm
        return sigma

    sigma_max = largest_singular(mat.dot, lambda y: mat.T.dot(y))
    inv_max = largest_singular(lu.solve, lambda y: lu.solve(y, trans="T"))
    if not np.isfinite(sigma_max) or not np.isfinite(inv_max):
        return np.inf, "power"
    return float(sigma_max * inv_max), "power"


def symmetry_audit(matrix: sp.spmatrix, declared: bool,
                   rtol: float = 1e-10) -> tuple[bool, float]:
    """Check a matrix's symmetry defect against the declared flag."""
    diff = (matrix - matrix.T).tocoo()
    scale = np.max(np.abs(matrix.tocoo().data)) if matrix.nnz else 1.0
    defect = float(np.max(np.abs(diff.data)) / scale) if diff.nnz else 0.0
    is_symmetric = defect <= rtol
    return is_symmetric == declared, defect


def run_stats(reports: dict[tuple[str, int], SolveReport]) -> list[dict]:
    """Per-(formulation, mesh) iteration and timing table rows."""
    rows = []
    for (label, n_elements), report in sorted(reports.items()):
        rows.append({
            "formulation": label,
            "n_elements": n_elements,
            "converged": report.converged,
            "clean": report.clean,
            "max_iterations": report.max_iterations,
            "total_iterations": report.total_iterations,
            "mean_time_per_iter_s": report.mean_seconds_per_iteration,
        })
    return rows
