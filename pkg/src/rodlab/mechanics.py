"""Pointwise mechanics of shear- and torsion-free rods.

All kernels are vectorized over arbitrary leading axes: inputs of shape
``(..., 3)`` produce outputs with matching batch shape, so element/quadrature
loops can be evaluated in one shot.

The centerline tangent ``t = phi'`` must never vanish; the unit director is
``d = t / |t|``, the axial strain ``eps = t - d`` and the bending strain
``kappa = (t x phi'') / |t|^2``.  Stress resultants follow the linear law
``n = EA eps``, ``m = EI kappa``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "RodProperties",
    "PointKinematics",
    "SingularConfigurationError",
    "BarrierPenetrationError",
    "kinematics_at",
    "stress",
    "projector",
    "householder",
    "skew",
    "mass_point_blocks",
    "strain_variation_blocks",
    "internal_force_point",
    "tangent_point_blocks",
    "strain_energy_density",
    "BarrierModel",
    "barrier_energy_density",
    "barrier_force_and_stiffness",
    "FlowProfile",
    "linear_flow_profile",
    "log_flow_profile",
]


class SingularConfigurationError(RuntimeError):
    """Raised when the centerline tangent norm drops below tolerance."""


class BarrierPenetrationError(RuntimeError):
    """Raised when a material point reaches or crosses the barrier plane."""


@dataclass(frozen=True)
class RodProperties:
    """Sectional constants of an initially straight rod.

    Attributes
    ----------
    axial_stiffness : float
        ``EA`` in N.
    bending_stiffness : float
        ``EI`` in N m^2.
    mass_per_length : float
        ``A_rho`` in kg/m.
    rotary_inertia : float
        ``I_rho`` in kg m (per unit length).
    length : float
        Reference length in m.
    """

    axial_stiffness: float
    bending_stiffness: float
    mass_per_length: float = 0.0
    rotary_inertia: float = 0.0
    length: float = 1.0

    def __post_init__(self):
        if self.axial_stiffness <= 0.0 or self.bending_stiffness <= 0.0:
            raise ValueError("EA and EI must be positive")
        if self.mass_per_length < 0.0 or self.rotary_inertia < 0.0:
            raise ValueError("inertia densities must be nonnegative")
        if self.length <= 0.0:
            raise ValueError("reference length must be positive")


@dataclass(frozen=True)
class PointKinematics:
    """Per-point kinematic quantities (arrays share a common batch shape)."""

    tangent: np.ndarray        # phi'
    second: np.ndarray         # phi''
    speed: np.ndarray          # |phi'|
    director: np.ndarray       # phi' / |phi'|, unit
    axial_strain: np.ndarray   # phi' - d
    curvature: np.ndarray      # d x d' = (phi' x phi'') / |phi'|^2


def _norm(v: np.ndarray) -> np.ndarray:
    return np.sqrt(np.einsum("...i,...i->...", v, v))


def skew(v: np.ndarray) -> np.ndarray:
    """Skew matrix ``[v]_x`` with ``[v]_x w = v x w`` (batched)."""
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


def projector(d: np.ndarray) -> np.ndarray:
    """Orthogonal projector ``I - d (x) d`` onto the plane normal to ``d``."""
    d = np.asarray(d, dtype=float)
    return np.eye(3) - np.einsum("...i,...j->...ij", d, d)


def householder(d: np.ndarray) -> np.ndarray:
    """Householder reflection ``I - 2 d (x) d``."""
    d = np.asarray(d, dtype=float)
    return np.eye(3) - 2.0 * np.einsum("...i,...j->...ij", d, d)


def kinematics_at(tangent: np.ndarray, second: np.ndarray,
                  min_speed: float = 1e-12) -> PointKinematics:
    """Strains and director from centerline derivatives.

    Raises ``SingularConfigurationError`` when ``|phi'|`` falls below
    ``min_speed`` at any point.
    """
    t = np.asarray(tangent, dtype=float)
    c = np.asarray(second, dtype=float)
    speed = _norm(t)
    if np.any(speed <= min_speed) or not np.all(np.isfinite(speed)):
        worst = float(np.min(speed)) if np.all(np.isfinite(speed)) else float("nan")
        raise SingularConfigurationError(
            f"tangent norm {worst:.3e} below tolerance {min_speed:.3e}")
    d = t / speed[..., None]
    eps = t - d
    kappa = np.cross(t, c) / (speed**2)[..., None]
    return PointKinematics(t, c, speed, d, eps, kappa)


def stress(props: RodProperties, axial_strain: np.ndarray,
           curvature: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Linear constitutive law: ``n = EA eps``, ``m = EI kappa``."""
    return (props.axial_stiffness * np.asarray(axial_strain, dtype=float),
            props.bending_stiffness * np.asarray(curvature, dtype=float))


def mass_point_blocks(props: RodProperties,
                      kin: PointKinematics) -> tuple[float, np.ndarray]:
    """Coefficients of the kinetic metric at a point.

    Returns ``(a0, R)`` such that the mass contribution of a test/trial pair
    ``(a, b)`` is ``a0 * N_a N_b * I + N_a' N_b' * R`` with
    ``R = I_rho / |phi'|^2 * P_d`` (symmetric PSD).
    """
    rot = (props.rotary_inertia / kin.speed**2)[..., None, None] * projector(kin.director)
    return props.mass_per_length, rot


def strain_variation_blocks(kin: PointKinematics) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Blocks of the linearized strain operator at a point.

    Returns ``(B_eps, B_kap1, B_kap2)`` with
    ``delta eps = B_eps . delta phi'`` and
    ``delta kappa = B_kap1 . delta phi' + B_kap2 . delta phi''``:

    * ``B_eps  = I - P_d / |phi'|``
    * ``B_kap1 = -[phi'']_x H_d / |phi'|^2``
    * ``B_kap2 = [d]_x / |phi'|``
    """
    inv = 1.0 / kin.speed
    b_eps = np.eye(3) - inv[..., None, None] * projector(kin.director)
    b_kap1 = -(inv**2)[..., None, None] * np.einsum(
        "...ij,...jk->...ik", skew(kin.second), householder(kin.director))
    b_kap2 = inv[..., None, None] * skew(kin.director)
    return b_eps, b_kap1, b_kap2


def internal_force_point(props: RodProperties,
                         kin: PointKinematics) -> tuple[np.ndarray, np.ndarray]:
    """Generalized internal force densities ``(F1, F2)`` at a point.

    The weak-form integrand is ``delta phi' . F1 + delta phi'' . F2`` with
    ``[F1; F2] = B^T sigma``.
    """
    n_vec, m_vec = stress(props, kin.axial_strain, kin.curvature)
    b_eps, b_kap1, b_kap2 = strain_variation_blocks(kin)
    f1 = (np.einsum("...ji,...j->...i", b_eps, n_vec)
          + np.einsum("...ji,...j->...i", b_kap1, m_vec))
    f2 = np.einsum("...ji,...j->...i", b_kap2, m_vec)
    return f1, f2


def tangent_point_blocks(props: RodProperties, kin: PointKinematics):
    """Exact linearization of the internal force density at a point.

    Returns ``(K11, K12, K21, K22)`` (each ``(..., 3, 3)``) pairing test and
    trial derivatives: ``K11`` couples ``delta phi' / Delta phi'``, ``K12``
    couples ``delta phi' / Delta phi''``, etc.  Material and geometric parts
    are included; the blocks satisfy ``K21 = K12^T`` and the assembled matrix
    is symmetric (the force is an exact energy gradient).
    """
    ea = props.axial_stiffness
    ei = props.bending_stiffness
    d = kin.director
    nu = kin.speed
    m_vec = ei * kin.curvature
    kap2 = np.einsum("...i,...i->...", kin.curvature, kin.curvature)

    b_eps, b_kap1, b_kap2 = strain_variation_blocks(kin)
    k11 = ea * np.einsum("...ij,...jk->...ik", b_eps, b_eps)
    k11 += ei * np.einsum("...ji,...jk->...ik", b_kap1, b_kap1)
    k12 = ei * np.einsum("...ji,...jk->...ik", b_kap1, b_kap2)
    k22 = ei * np.einsum("...ji,...jk->...ik", b_kap2, b_kap2)

    pd = projector(d)
    ddt = np.einsum("...i,...j->...ij", d, d)

    # geometric part, axial: n . D(delta eps) = EA (nu-1)/nu^2 P_d
    k11 += (ea * (nu - 1.0) / nu**2)[..., None, None] * pd

    # geometric part, bending: m . D(delta kappa)
    u = np.cross(kin.second, m_vec)
    k11 += (6.0 * ei * kap2 / nu**2)[..., None, None] * ddt
    k11 -= (2.0 * ei * kap2 / nu**2)[..., None, None] * pd
    du = np.einsum("...i,...j->...ij", d, u)
    k11 -= (2.0 / nu**3)[..., None, None] * (du + np.swapaxes(du, -1, -2))

    mxd = np.cross(m_vec, d)
    k12 -= (2.0 / nu**2)[..., None, None] * np.einsum("...i,...j->...ij", d, mxd)
    k12 -= (1.0 / nu**2)[..., None, None] * skew(m_vec)

    k21 = np.swapaxes(k12, -1, -2)
    return k11, k12, k21, k22


def strain_energy_density(props: RodProperties, kin: PointKinematics) -> np.ndarray:
    """``(EA |eps|^2 + EI |kappa|^2) / 2`` per unit length."""
    e2 = np.einsum("...i,...i->...", kin.axial_strain, kin.axial_strain)
    k2 = np.einsum("...i,...i->...", kin.curvature, kin.curvature)
    return 0.5 * (props.axial_stiffness * e2 + props.bending_stiffness * k2)


# --------------------------------------------------------------------------
# external load building blocks
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BarrierModel:
    """Reciprocal barrier keeping material points above a plane.

    The energy per unit length is ``strength / gap`` with
    ``gap = z - height``; it blows up as the gap closes, producing an upward
    force ``strength / gap^2`` and a positive stiffness
    ``2 strength / gap^3`` on the vertical block.
    """

    height: float
    strength: float

    def __post_init__(self):
        if self.strength <= 0.0:
            raise ValueError("barrier strength must be positive")


def _barrier_gap(barrier: BarrierModel, z: np.ndarray) -> np.ndarray:
    gap = np.asarray(z, dtype=float) - barrier.height
    if np.any(gap <= 0.0):
        raise BarrierPenetrationError(
            f"barrier penetrated: min gap {float(np.min(gap)):.3e} <= 0")
    return gap


def barrier_energy_density(barrier: BarrierModel, z: np.ndarray) -> np.ndarray:
    return barrier.strength / _barrier_gap(barrier, z)


def barrier_force_and_stiffness(barrier: BarrierModel,
                                z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vertical force density and stiffness density at heights ``z``.

    Force is the exact negative gradient of the barrier energy; stiffness is
    its exact derivative (both per unit length, acting on the z component).
    """
    gap = _barrier_gap(barrier, z)
    force = barrier.strength / gap**2
    stiffness = 2.0 * barrier.strength / gap**3
    return force, stiffness


@dataclass(frozen=True)
class FlowProfile:
    """Height-dependent flow speed with a quadratic drag law.

    The line load is ``drag_coefficient * v(z)^2 * direction`` per unit
    length.  Heights outside ``[z_min, z_max]`` are clamped to the domain
    ends (a diagnostic counter is kept by the caller).
    """

    kind: str                   # "linear" or "log"
    scale: float                # speed scale in m/s
    reference_height: float     # profile reference height in m
    drag_coefficient: float     # N s^2 / m^3, per unit rod length
    direction: tuple[float, float, float] = (1.0, 0.0, 0.0)
    z_min: float = 0.0
    z_max: float = np.inf

    def speed(self, z: np.ndarray) -> np.ndarray:
        z = np.clip(np.asarray(z, dtype=float), self.z_min, self.z_max)
        if self.kind == "linear":
            return self.scale * z / self.reference_height
        if self.kind == "log":
            return self.scale * np.log1p(9.0 * z / self.reference_height)
        raise ValueError(f"unknown flow profile kind {self.kind!r}")

    def speed_gradient(self, z: np.ndarray) -> np.ndarray:
        """d(speed)/dz of the clamped profile (zero outside the domain)."""
        z = np.asarray(z, dtype=float)
        inside = (z >= self.z_min) & (z <= self.z_max)
        zc = np.clip(z, self.z_min, self.z_max)
        if self.kind == "linear":
            grad = np.full_like(zc, self.scale / self.reference_height)
        elif self.kind == "log":
            grad = 9.0 * self.scale / (self.reference_height + 9.0 * zc)
        else:
            raise ValueError(f"unknown flow profile kind {self.kind!r}")
        return np.where(inside, grad, 0.0)

    def clamped_fraction(self, z: np.ndarray) -> float:
        z = np.asarray(z, dtype=float)
        out = np.mean((z < self.z_min) | (z > self.z_max))
        return float(out)

    def line_load(self, z: np.ndarray) -> np.ndarray:
        v = self.speed(z)
        e = np.asarray(self.direction, dtype=float)
        e = e / np.linalg.norm(e)
        return (self.drag_coefficient * v**2)[..., None] * e


def linear_flow_profile(speed_at_reference: float, reference_height: float,
                        drag_coefficient: float, **kw) -> FlowProfile:
    """Speed growing linearly with height: ``v(z) = v_ref * z / z_ref``."""
    return FlowProfile("linear", speed_at_reference, reference_height,
                       drag_coefficient, **kw)


def log_flow_profile(speed_scale: float, reference_height: float,
                     drag_coefficient: float, **kw) -> FlowProfile:
    """Open-water profile ``v(z) = v0 * log(1 + 9 z / z_ref)``."""
    return FlowProfile("log", speed_scale, reference_height,
                       drag_coefficient, **kw)
