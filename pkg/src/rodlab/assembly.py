"""Element quadrature, global assembly, and the five formulation systems.

Both discretization families are lowered to the same element tables (values
and first/second arclength derivatives of the active functions at the Gauss
points), so residual/tangent assembly is generic.  On top of the shared core
the module builds, per formulation, the linear system of one Newton
iteration:

* ``iga``               -- smooth B-spline basis, optional constant
                           extraction operator (boundary rows and
                           high-frequency mode removal), symmetric.
* ``nodal_r3``          -- cubic Hermite, free nodal directors, symmetric.
* ``nodal_spp``         -- unit nodal directors via Lagrange multipliers;
                           saddle-point system, non-symmetric in dynamics
                           (constraint blocks sit at different time
                           instances), symmetric in statics.
* ``nodal_spp_reduced`` -- multipliers eliminated through the nullspace of
                           the constraint Jacobian; square but
                           non-symmetric, nullspace rebuilt every iteration.
* ``nodal_penalty``     -- unit directors enforced by a penalty scaled with
                           ``2 EI / L``; symmetric.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from . import constraints as con
from . import mechanics as mech
from . import splines
from .mechanics import RodProperties

__all__ = [
    "SCHEMES",
    "Formulation",
    "Discretization",
    "PointLoad",
    "EndMoment",
    "LoadModel",
    "RodModel",
    "AssembledSystem",
    "gauss_rule",
    "build_discretization",
    "build_model",
    "dof_count",
    "straight_state",
    "evaluate_centerline",
    "assemble_gravity",
    "assemble_mass",
    "assemble_internal",
    "assemble_external",
    "assemble_system",
    "hermite_from_bspline_map",
    "matrix_bandwidth",
    "symmetry_defect",
]

SCHEMES = ("iga", "nodal_r3", "nodal_spp", "nodal_spp_reduced", "nodal_penalty")
_NODAL = ("nodal_r3", "nodal_spp", "nodal_spp_reduced", "nodal_penalty")


@dataclass(frozen=True)
class Formulation:
    """Choice of semi-discrete formulation and its parameters."""

    scheme: str
    degree: int = 3
    smoothness: int = 1
    outlier_removal: bool = False
    penalty_factor: float = 1e5
    director_scale: float = 1.0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if self.scheme != "iga" and (self.degree, self.smoothness) != (3, 1):
            raise ValueError("nodal schemes use the cubic Hermite basis")
        if self.director_scale <= 0.0:
            raise ValueError("director scale must be positive")

    @property
    def label(self) -> str:
        if self.scheme == "iga":
            tag = f"iga_p{self.degree}c{self.smoothness}"
            return tag + "_outlier" if self.outlier_removal else tag
        return self.scheme

    def symmetric_system(self, regime: str) -> bool:
        """Declared symmetry of the iteration matrix per regime."""
        if self.scheme == "nodal_spp":
            return regime == "static"
        if self.scheme == "nodal_spp_reduced":
            return False
        return True


def gauss_rule(n_points: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre points/weights on [0, 1]; exact to degree 2n-1."""
    x, w = np.polynomial.legendre.leggauss(n_points)
    return 0.5 * (x + 1.0), 0.5 * w


@dataclass(frozen=True)
class Discretization:
    """Unified element tables for a 3-component vector field on [0, L]."""

    kind: str                      # "bspline" or "hermite"
    n_functions: int
    length: float
    conn: np.ndarray               # (n_e, n_loc) global function indices
    shape: np.ndarray              # (3, n_e, n_q, n_loc): value, d/ds, d2/ds2
    weights: np.ndarray            # (n_e, n_q) quadrature weights (arclength)
    points: np.ndarray             # (n_e, n_q) arclength positions
    space: object = field(repr=False)       # underlying spline/hermite space
    director_scale: float = 1.0

    @property
    def n_elements(self) -> int:
        return self.conn.shape[0]

    @property
    def n_dof(self) -> int:
        return 3 * self.n_functions

    @property
    def n_nodes(self) -> int:
        if self.kind != "hermite":
            raise ValueError("nodes are defined for the hermite discretization only")
        return self.n_elements + 1


def build_discretization(form: Formulation, n_elements: int,
                         length: float) -> Discretization:
    """Element tables for the given formulation on a uniform mesh."""
    if form.scheme == "iga":
        space = splines.make_spline_space(form.degree, form.smoothness,
                                          n_elements, length)
        n_q = form.degree + 1
        xi, wq = gauss_rule(n_q)
        breaks = space.breakpoints
        n_loc = form.degree + 1
        conn = np.empty((n_elements, n_loc), dtype=int)
        shape = np.empty((3, n_elements, n_q, n_loc))
        weights = np.empty((n_elements, n_q))
        points = np.empty((n_elements, n_q))
        for e in range(n_elements):
            h = breaks[e + 1] - breaks[e]
            for g in range(n_q):
                s = breaks[e] + h * xi[g]
                first, ders = splines.eval_spline_basis(space, s, max_deriv=2)
                if g == 0:
                    conn[e] = first + np.arange(n_loc)
                shape[:, e, g, :] = ders
                weights[e, g] = h * wq[g]
                points[e, g] = s
        return Discretization("bspline", space.n_functions, float(length),
                              conn, shape, weights, points, space)

    space = splines.make_hermite_space(n_elements, length)
    n_q = 4
    xi, wq = gauss_rule(n_q)
    h_el = space.element_lengths
    conn = 2 * np.arange(n_elements)[:, None] + np.arange(4)
    shape = np.empty((3, n_elements, n_q, 4))
    weights = np.empty((n_elements, n_q))
    points = np.empty((n_elements, n_q))
    breaks = space.breakpoints
    for e in range(n_elements):
        for g in range(n_q):
            shape[:, e, g, :] = splines.eval_hermite_basis(h_el[e], xi[g], 2)
            weights[e, g] = h_el[e] * wq[g]
            points[e, g] = breaks[e] + h_el[e] * xi[g]
    if form.director_scale != 1.0:
        # unknowns carry scaled directors d_hat = alpha d; the interpolated
        # field divides them back, folded here into the slope columns
        shape = shape.copy()
        shape[:, :, :, 1::2] /= form.director_scale
    return Discretization("hermite", space.n_functions, float(length),
                          conn, shape, weights, points, space,
                          director_scale=form.director_scale)


def dof_count(scheme: str, n_elements: int, degree: int = 3,
              smoothness: int = 1) -> int:
    """Number of unknowns solved per iteration (before boundary conditions)."""
    if scheme == "iga":
        return 3 * (n_elements * (degree - smoothness) + smoothness + 1)
    if scheme in ("nodal_r3", "nodal_penalty", "nodal_spp_reduced"):
        return 6 * (n_elements + 1)
    if scheme == "nodal_spp":
        return 7 * (n_elements + 1)
    raise ValueError(f"unknown scheme {scheme!r}")


def straight_state(disc: Discretization, axis=(1.0, 0.0, 0.0),
                   origin=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Coefficients reproducing a straight rod ``origin + s * axis`` exactly."""
    axis = np.asarray(axis, dtype=float)
    origin = np.asarray(origin, dtype=float)
    q = np.zeros(disc.n_dof)
    if disc.kind == "bspline":
        g = splines.greville_points(disc.space)
        q = (origin[None, :] + g[:, None] * axis[None, :]).ravel()
    else:
        nodes = disc.space.breakpoints
        coeff = np.empty((disc.n_functions, 3))
        coeff[0::2] = origin[None, :] + nodes[:, None] * axis[None, :]
        coeff[1::2] = disc.director_scale * axis[None, :]
        q = coeff.ravel()
    return q


def evaluate_centerline(disc: Discretization, q: np.ndarray, s_values,
                        max_deriv: int = 2) -> np.ndarray:
    """Centerline value and derivatives at arbitrary arclength positions.

    Returns an array of shape ``(max_deriv + 1, len(s), 3)``.
    """
    q = np.asarray(q, dtype=float).reshape(-1, 3)
    s_values = np.atleast_1d(np.asarray(s_values, dtype=float))
    out = np.zeros((max_deriv + 1, len(s_values), 3))
    if disc.kind == "bspline":
        for i, s in enumerate(s_values):
            first, ders = splines.eval_spline_basis(disc.space, s, max_deriv)
            sel = q[first:first + disc.space.degree + 1]
            out[:, i, :] = ders[:max_deriv + 1] @ sel
    else:
        breaks = disc.space.breakpoints
        h = disc.space.element_lengths
        for i, s in enumerate(s_values):
            e = min(int(np.searchsorted(breaks, s, side="right")) - 1,
                    disc.n_elements - 1)
            e = max(e, 0)
            xi = (s - breaks[e]) / h[e]
            ders = splines.eval_hermite_basis(h[e], min(max(xi, 0.0), 1.0), max_deriv)
            if disc.director_scale != 1.0:
                ders = ders.copy()
                ders[:, 1::2] /= disc.director_scale
            sel = q[disc.conn[e]]
            out[:, i, :] = ders[:max_deriv + 1] @ sel
    return out


# --------------------------------------------------------------------------
# loads
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PointLoad:
    """Dead point load applied at arclength ``location`` (ramped)."""

    location: float
    force: tuple[float, float, float]


@dataclass(frozen=True)
class EndMoment:
    """Moment conjugate to the rotation of the end tangent/director.

    Two realizations of the generalized end load on the derivative dofs are
    available (both exactly linearized, both reducing to the pure moment for
    a unit end tangent):

    * ``"sphere"``: ``f = magnitude * (axis x w)`` with ``w`` the raw end
      tangent coefficient -- the work conjugate of a rotation on the unit
      sphere, applied identically in every scheme.  The effective torque
      scales with ``|w|^2``, so schemes that do not control the director
      length see a feedback through it.
    * ``"angle"``: gradient of the potential ``-magnitude * theta(w)`` with
      ``theta`` the in-plane angle of ``w``; length-invariant with a
      symmetric Hessian.
    """

    location: float
    magnitude: float
    axis1: tuple[float, float, float] = (1.0, 0.0, 0.0)
    axis2: tuple[float, float, float] = (0.0, 1.0, 0.0)
    pullback: str = "sphere"

    def __post_init__(self):
        if self.pullback not in ("sphere", "angle"):
            raise ValueError(f"unknown moment pullback {self.pullback!r}")


@dataclass(frozen=True)
class LoadModel:
    """Scenario loading: all parts except the barrier scale with the ramp.

    ``flow_update`` chooses how the height-dependent drag enters a solve:
    ``"staggered"`` (default) freezes the flow load at the step's starting
    configuration — the classic quasi-static coupling, which keeps the drag
    from feeding a circulatory (non-symmetric) term into the tangent —
    while ``"implicit"`` evaluates it at the current iterate and assembles
    its exact, non-symmetric load stiffness.
    """

    gravity: tuple[float, float, float] | None = None   # per unit length
    flow: mech.FlowProfile | None = None
    point_loads: tuple[PointLoad, ...] = ()
    end_moment: EndMoment | None = None
    barrier: mech.BarrierModel | None = None
    flow_update: str = "staggered"

    def __post_init__(self):
        if self.flow_update not in ("staggered", "implicit"):
            raise ValueError(f"unknown flow update {self.flow_update!r}")

    @property
    def symmetric_tangent(self) -> bool:
        """True when every load tangent is a Hessian (the implicit flow drag
        and the sphere-pullback moment are the non-conservative exceptions)."""
        if self.flow is not None and self.flow_update == "implicit":
            return False
        if self.end_moment is not None and self.end_moment.pullback == "sphere":
            return False
        return True


# --------------------------------------------------------------------------
# model
# --------------------------------------------------------------------------

@dataclass
class RodModel:
    """A rod discretized by one formulation, with loading and supports."""

    formulation: Formulation
    props: RodProperties
    disc: Discretization
    loads: LoadModel
    fixed_dofs: np.ndarray                       # eliminated scalar dofs
    reduction: sp.csc_matrix | None = None       # extraction operator on free dofs
    constrained_nodes: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))

    def __post_init__(self):
        self.fixed_dofs = np.asarray(self.fixed_dofs, dtype=int)
        self.free_dofs = np.setdiff1d(np.arange(self.disc.n_dof), self.fixed_dofs)
        self.min_speed = 1e-10 * self.disc.length / self.disc.n_elements
        self._pattern_cache = {}

    @property
    def n_dof(self) -> int:
        return self.disc.n_dof

    @property
    def n_free(self) -> int:
        return len(self.free_dofs)

    @property
    def n_constraints(self) -> int:
        return len(self.constrained_nodes)

    @property
    def constraint_target(self) -> float:
        return self.formulation.director_scale**2


def _left_end_rows(space: splines.SplineSpace, kind: str) -> np.ndarray:
    if kind == "none":
        return np.zeros((0, space.n_functions))
    orders = [0] if kind == "position" else [0, 1]
    return splines.derivative_rows(space, "left", orders)


def build_model(form: Formulation, props: RodProperties, n_elements: int,
                loads: LoadModel | None = None,
                fix_left: str = "none", fix_right: str = "none",
                outlier_bc: str | None = None) -> RodModel:
    """Assemble a ready-to-solve model.

    ``fix_left``/``fix_right`` are ``"none"``, ``"position"`` (pinned) or
    ``"clamped"``.  For the isogeometric scheme the left-end conditions are
    folded into the constant extraction operator together with the
    high-frequency removal rows (when enabled); the right end and all nodal
    supports use standard row/column elimination.
    """
    loads = loads or LoadModel()
    disc = build_discretization(form, n_elements, props.length)
    fixed: list[int] = []

    if form.scheme == "iga":
        space = disc.space
        rows = [_left_end_rows(space, fix_left)]
        if form.outlier_removal:
            kind_map = {"none": "free", "position": "fixed", "clamped": "clamped"}
            bc = outlier_bc or f"{kind_map[fix_left]}-{kind_map[fix_right]}"
            rows.append(splines.outlier_constraint_rows(space, bc))
        m = space.n_functions
        if fix_right == "position":
            fixed.extend(range(3 * (m - 1), 3 * m))
        elif fix_right == "clamped":
            fixed.extend(range(3 * (m - 2), 3 * m))
        rows = np.vstack([r for r in rows if r.size] or [np.zeros((0, m))])
        reduction = None
        if rows.shape[0]:
            free_funcs = sorted({i for i in range(m)
                                 if not set(range(3 * i, 3 * i + 3)) <= set(fixed)})
            rows_f = rows[:, free_funcs]
            rows_f = rows_f[np.any(rows_f != 0.0, axis=1)]
            op = splines.nullspace_extraction(len(free_funcs), rows_f)
            reduction = sp.kron(op.matrix, sp.identity(3), format="csc")
        model = RodModel(form, props, disc, loads, np.array(fixed, dtype=int),
                         reduction=reduction)
        return model

    n_nodes = n_elements + 1
    clamped_nodes = []
    if fix_left in ("position", "clamped"):
        fixed.extend(range(0, 3))
    if fix_left == "clamped":
        fixed.extend(range(3, 6))
        clamped_nodes.append(0)
    if fix_right in ("position", "clamped"):
        fixed.extend(range(6 * (n_nodes - 1), 6 * (n_nodes - 1) + 3))
    if fix_right == "clamped":
        fixed.extend(range(6 * (n_nodes - 1) + 3, 6 * n_nodes))
        clamped_nodes.append(n_nodes - 1)
    constrained = np.setdiff1d(np.arange(n_nodes), np.array(clamped_nodes, dtype=int))
    return RodModel(form, props, disc, loads, np.array(fixed, dtype=int),
                    constrained_nodes=constrained)


# --------------------------------------------------------------------------
# generic assembly over element tables
# --------------------------------------------------------------------------

def _element_coefficients(disc: Discretization, q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float).reshape(-1, 3)
    return q[disc.conn]                      # (n_e, n_loc, 3)


def _gp_fields(disc: Discretization, q: np.ndarray):
    coef = _element_coefficients(disc, q)
    val = np.einsum("ega,eac->egc", disc.shape[0], coef)
    d1 = np.einsum("ega,eac->egc", disc.shape[1], coef)
    d2 = np.einsum("ega,eac->egc", disc.shape[2], coef)
    return val, d1, d2


def _scatter_vector(disc: Discretization, f_el: np.ndarray) -> np.ndarray:
    out = np.zeros(disc.n_dof)
    idx = (3 * disc.conn[:, :, None] + np.arange(3)).ravel()
    np.add.at(out, idx, f_el.ravel())
    return out


def _matrix_pattern(disc: Discretization):
    n_loc = disc.conn.shape[1]
    dofs = 3 * disc.conn[:, :, None] + np.arange(3)          # (e, a, c)
    dofs = dofs.reshape(disc.n_elements, 3 * n_loc)
    rows = np.repeat(dofs[:, :, None], 3 * n_loc, axis=2)
    cols = np.repeat(dofs[:, None, :], 3 * n_loc, axis=1)
    return rows.ravel(), cols.ravel()


def _scatter_matrix(model: RodModel, k_el: np.ndarray) -> sp.csc_matrix:
    disc = model.disc
    key = "pattern"
    if key not in model._pattern_cache:
        model._pattern_cache[key] = _matrix_pattern(disc)
    rows, cols = model._pattern_cache[key]
    n_e, n_loc = disc.conn.shape
    data = k_el.reshape(n_e, 3 * n_loc, 3 * n_loc)
    mat = sp.coo_matrix((data.ravel(), (rows, cols)),
                        shape=(disc.n_dof, disc.n_dof))
    return mat.tocsc()


def _pair_contraction(disc, table_a, table_b, blocks):
    """Element matrices K[e, a, c, b, d] = sum_g w * Na * block_cd * Nb."""
    return np.einsum("eg,ega,egcd,egb->eacbd", disc.weights, table_a,
                     blocks, table_b, optimize=True)


def assemble_mass(model: RodModel, q: np.ndarray) -> sp.csc_matrix:
    """Kinetic metric at configuration ``q`` (symmetric PSD)."""
    disc = model.disc
    _, d1, d2 = _gp_fields(disc, q)
    kin = mech.kinematics_at(d1, d2, model.min_speed)
    a0, rot = mech.mass_point_blocks(model.props, kin)
    eye = np.broadcast_to(np.eye(3), rot.shape)
    k_el = a0 * _pair_contraction(disc, disc.shape[0], disc.shape[0], eye)
    if model.props.rotary_inertia > 0.0:
        k_el = k_el + _pair_contraction(disc, disc.shape[1], disc.shape[1], rot)
    # element blocks are (a,c,b,d); reorder to (a*,c*) pairs handled in scatter
    return _scatter_matrix(model, k_el)


def assemble_internal(model: RodModel, q: np.ndarray, need_tangent: bool = True):
    """Internal force vector and (optionally) its exact tangent."""
    disc = model.disc
    _, d1, d2 = _gp_fields(disc, q)
    kin = mech.kinematics_at(d1, d2, model.min_speed)
    f1, f2 = mech.internal_force_point(model.props, kin)
    w = disc.weights
    f_el = (np.einsum("eg,ega,egc->eac", w, disc.shape[1], f1)
            + np.einsum("eg,ega,egc->eac", w, disc.shape[2], f2))
    force = _scatter_vector(disc, f_el)
    if not need_tangent:
        return force, None
    k11, k12, k21, k22 = mech.tangent_point_blocks(model.props, kin)
    k_el = (_pair_contraction(disc, disc.shape[1], disc.shape[1], k11)
            + _pair_contraction(disc, disc.shape[1], disc.shape[2], k12)
            + _pair_contraction(disc, disc.shape[2], disc.shape[1], k21)
            + _pair_contraction(disc, disc.shape[2], disc.shape[2], k22))
    return force, _scatter_matrix(model, k_el)


def assemble_gravity(model: RodModel) -> np.ndarray:
    """Consistent nodal force of the gravity line load (unit ramp)."""
    if model.loads.gravity is None:
        return np.zeros(model.n_dof)
    disc = model.disc
    w_vec = np.asarray(model.loads.gravity, dtype=float)
    f_el = np.einsum("eg,ega,c->eac", disc.weights, disc.shape[0], w_vec)
    return _scatter_vector(disc, f_el)


def _point_values(disc: Discretization, s: float, deriv: int) -> tuple[np.ndarray, np.ndarray]:
    """(function indices, shape values) of the active functions at ``s``."""
    if disc.kind == "bspline":
        first, ders = splines.eval_spline_basis(disc.space, s, deriv)
        return first + np.arange(disc.space.degree + 1), ders[deriv]
    breaks = disc.space.breakpoints
    h = disc.space.element_lengths
    e = min(max(int(np.searchsorted(breaks, s, side="right")) - 1, 0),
            disc.n_elements - 1)
    xi = (s - breaks[e]) / h[e]
    ders = splines.eval_hermite_basis(h[e], min(max(xi, 0.0), 1.0), deriv)
    vals = ders[deriv].copy()
    if disc.director_scale != 1.0:
        vals[1::2] /= disc.director_scale
    return disc.conn[e], vals


def assemble_external(model: RodModel, q: np.ndarray, ramp: float = 1.0,
                      need_tangent: bool = True,
                      flow_reference: np.ndarray | None = None):
    """External force vector and the tangent of its conservative parts.

    Gravity, point loads, the end moment, and the flow drag scale with
    ``ramp``; the barrier does not (it is a geometric safeguard, not a
    load).  With ``flow_reference`` given (the staggered update), the drag
    heights come from that configuration and contribute no tangent;
    otherwise the drag follows the current iterate and its exact
    (non-symmetric) load stiffness is assembled.
    """
    disc = model.disc
    loads = model.loads
    force = ramp * assemble_gravity(model)
    k_rows, k_cols, k_data = [], [], []

    if loads.flow is not None or loads.barrier is not None:
        val, _, _ = _gp_fields(disc, q)
        z = val[..., 2]

    if loads.flow is not None:
        if flow_reference is not None:
            ref, _, _ = _gp_fields(disc, flow_reference)
            z_flow = ref[..., 2]
        else:
            z_flow = z
        f_flow = ramp * loads.flow.line_load(z_flow)         # (e, g, 3)
        f_el = np.einsum("eg,ega,egc->eac", disc.weights, disc.shape[0], f_flow)
        force += _scatter_vector(disc, f_el)
        if need_tangent and flow_reference is None:
            e_dir = np.asarray(loads.flow.direction, dtype=float)
            e_dir = e_dir / np.linalg.norm(e_dir)
            gain = (2.0 * ramp * loads.flow.drag_coefficient
                    * loads.flow.speed(z_flow) * loads.flow.speed_gradient(z_flow))
            blk = np.einsum("eg,ega,egb->eab", disc.weights * gain,
                            disc.shape[0], disc.shape[0])
            for comp in range(3):
                if e_dir[comp] == 0.0:
                    continue
                rows = (3 * disc.conn + comp)[:, :, None]
                cols = (3 * disc.conn + 2)[:, None, :]
                k_rows.append(np.broadcast_to(rows, blk.shape).ravel())
                k_cols.append(np.broadcast_to(cols, blk.shape).ravel())
                k_data.append(e_dir[comp] * blk.ravel())

    if loads.barrier is not None:
        fz, kz = mech.barrier_force_and_stiffness(loads.barrier, z)
        f_el = np.zeros((disc.n_elements, disc.conn.shape[1], 3))
        f_el[..., 2] = np.einsum("eg,ega->ea", disc.weights * fz, disc.shape[0])
        force += _scatter_vector(disc, f_el)
        if need_tangent:
            blk = np.einsum("eg,ega,egb->eab", disc.weights * kz,
                            disc.shape[0], disc.shape[0])
            rows = (3 * disc.conn + 2)[:, :, None]
            cols = (3 * disc.conn + 2)[:, None, :]
            k_rows.append(np.broadcast_to(rows, blk.shape).ravel())
            k_cols.append(np.broadcast_to(cols, blk.shape).ravel())
            k_data.append(-blk.ravel())     # dF/dz = -stiffness

    for pl in loads.point_loads:
        funcs, vals = _point_values(disc, pl.location, 0)
        fvec = ramp * np.asarray(pl.force, dtype=float)
        for a, na in zip(funcs, vals):
            force[3 * a:3 * a + 3] += na * fvec

    if loads.end_moment is not None:
        em = loads.end_moment
        funcs, vals = _point_values(disc, em.location, 1)
        coef = np.asarray(q, dtype=float).reshape(-1, 3)
        w_vec = vals @ coef[funcs]                      # end tangent phi'(s)
        a1 = np.asarray(em.axis1, dtype=float)
        a2 = np.asarray(em.axis2, dtype=float)
        a3 = np.cross(a1, a2)
        mag = ramp * em.magnitude
        if em.pullback == "sphere":
            grad = np.cross(a3, w_vec)
            hess = mech.skew(a3) * mag
        else:
            c1, c2 = w_vec @ a1, w_vec @ a2
            rho2 = c1**2 + c2**2
            if rho2 <= 0.0:
                raise mech.SingularConfigurationError(
                    "end tangent orthogonal to the moment plane")
            grad = np.cross(a3, w_vec) / rho2
            hess = mech.skew(a3) / rho2
            hess = hess - 2.0 * np.outer(np.cross(a3, w_vec),
                                         c1 * a1 + c2 * a2) / rho2**2
            hess = hess * mag
        for a, na in zip(funcs, vals):
            force[3 * a:3 * a + 3] += na * mag * grad
        if need_tangent:
            dof3 = (3 * funcs[:, None] + np.arange(3))
            rows = np.repeat(dof3[:, None, :, None], len(funcs), axis=1)
            rows = np.broadcast_to(rows, (len(funcs), len(funcs), 3, 3))
            cols = np.broadcast_to(dof3[None, :, None, :],
                                   (len(funcs), len(funcs), 3, 3))
            blk = np.einsum("a,b,cd->abcd", vals, vals, hess)
            k_rows.append(rows.ravel())
            k_cols.append(cols.ravel())
            k_data.append(blk.ravel())

    k_ext = None
    if need_tangent and k_data:
        k_ext = sp.coo_matrix(
            (np.concatenate(k_data),
             (np.concatenate(k_rows), np.concatenate(k_cols))),
            shape=(disc.n_dof, disc.n_dof)).tocsc()
    return force, k_ext


# --------------------------------------------------------------------------
# formulation systems
# --------------------------------------------------------------------------

@dataclass
class AssembledSystem:
    """One Newton iteration's linear system with layout metadata."""

    matrix: sp.csc_matrix
    rhs: np.ndarray
    symmetric: bool
    n_primal: int                 # leading unknowns that map to free dofs
    reduction: sp.csc_matrix | None = None   # maps solve space -> free dofs
    n_multipliers: int = 0

    @property
    def n_unknowns(self) -> int:
        return self.matrix.shape[1]


def _core_parts(model: RodModel, regime: str, q_new, lam=None, q_old=None,
                v_old=None, dt=None, ramp=1.0, need_matrix=True,
                flow_reference=None):
    """Shared residual/tangent of the unconstrained weak form.

    Static:  rhs = F_ext(q) - F_int(q),            A = K_int - K_ext.
    Dynamic: force terms at the midpoint configuration, the inertia built
    from the trapezoidal velocity update:
             rhs = F_ext - M a - F_int(q_mid),
             A   = (2/dt^2) M + (K_int - K_ext)(q_mid) / 2.
    The translational block of the kinetic metric is configuration
    independent; its rotary block is evaluated at the known start-of-step
    configuration, so the tangent is the exact derivative of the residual
    and the symmetric formulations keep exactly symmetric matrices.
    """
    if regime == "static":
        q_eval, chain = np.asarray(q_new, dtype=float), 1.0
    elif regime == "dynamic":
        q_new = np.asarray(q_new, dtype=float)
        q_eval = 0.5 * (q_new + np.asarray(q_old, dtype=float))
        chain = 0.5
    else:
        raise ValueError(f"regime must be 'static' or 'dynamic', got {regime!r}")

    if (model.loads.flow is not None
            and model.loads.flow_update == "staggered" and flow_reference is None):
        flow_reference = np.asarray(q_old if q_old is not None else q_new,
                                    dtype=float)
    f_int, k_int = assemble_internal(model, q_eval, need_matrix)
    f_ext, k_ext = assemble_external(model, q_eval, ramp, need_matrix,
                                     flow_reference=flow_reference)
    rhs = f_ext - f_int
    mat = None
    if need_matrix:
        mat = chain * k_int
        if k_ext is not None:
            mat = mat - chain * k_ext
    if regime == "dynamic":
        mass = assemble_mass(model, np.asarray(q_old, dtype=float))
        accel = (2.0 * (q_new - np.asarray(q_old, dtype=float)) / dt**2
                 - 2.0 * np.asarray(v_old, dtype=float) / dt)
        rhs = rhs - mass @ accel
        if need_matrix:
            mat = mat + (2.0 / dt**2) * mass
    return q_eval, chain, rhs, mat


def assemble_system(model: RodModel, regime: str, q_new, lam=None, *,
                    q_old=None, v_old=None, dt=None, ramp: float = 1.0,
                    flow_reference=None) -> AssembledSystem:
    """Linear system of one Newton iteration for the model's formulation.

    ``q_new`` is the current iterate of the unknown configuration (at the
    new time level in dynamics); ``lam`` the multiplier iterate for the
    saddle-point scheme.  Fixed dofs see zero increments: their rows and
    columns are eliminated after assembly.
    """
    scheme = model.formulation.scheme
    q_eval, chain, rhs, mat = _core_parts(model, regime, q_new, lam, q_old,
                                          v_old, dt, ramp, True, flow_reference)
    free = model.free_dofs
    symmetric = (model.formulation.symmetric_system(regime)
                 and model.loads.symmetric_tangent)
    q_new = np.asarray(q_new, dtype=float)

    if scheme in ("iga", "nodal_r3"):
        a_ff = mat[free][:, free]
        r_f = rhs[free]
        red = model.reduction
        if red is not None:
            a_ff = (red.T @ a_ff @ red).tocsc()
            r_f = red.T @ r_f
        return AssembledSystem(a_ff.tocsc(), r_f, symmetric, a_ff.shape[0],
                               reduction=red)

    nodes = model.constrained_nodes
    n_nodes = model.disc.n_nodes
    target = model.constraint_target

    if scheme == "nodal_penalty":
        scale = (model.formulation.penalty_factor
                 * 2.0 * model.props.bending_stiffness / model.props.length)
        jac = con.constraint_jacobian(q_new, nodes)
        psi = con.unit_director_residual(q_new, nodes, target)
        rhs_pen = rhs - scale * (jac.T @ psi)
        a_pen = mat + con.penalty_tangent(q_new, nodes, scale, target)
        return AssembledSystem(a_pen[free][:, free].tocsc(), rhs_pen[free],
                               symmetric, len(free))

    if scheme == "nodal_spp":
        lam = np.zeros(len(nodes)) if lam is None else np.asarray(lam, dtype=float)
        j_eval = con.constraint_jacobian(q_eval, nodes)
        j_new = con.constraint_jacobian(q_new, nodes)
        psi = con.unit_director_residual(q_new, nodes, target)
        rhs1 = (rhs - j_eval.T @ lam)[free]
        a_ff = (mat + con.multiplier_coupling(lam, nodes, n_nodes, chain))[free][:, free]
        j_ef = j_eval[:, free]
        j_nf = j_new[:, free]
        sys_mat = sp.bmat([[a_ff, j_ef.T], [j_nf, None]], format="csc")
        sys_rhs = np.concatenate([rhs1, -psi])
        return AssembledSystem(sys_mat, sys_rhs, symmetric, len(free),
                               n_multipliers=len(nodes))

    if scheme == "nodal_spp_reduced":
        basis = con.constraint_nullspace(q_eval)
        j_new = con.constraint_jacobian(q_new, nodes)
        psi = con.unit_director_residual(q_new, nodes, target)
        lin = con.nullspace_linearization(-rhs, basis.pairs, chain)
        d_mat, w_mat = _restrict_nullspace(model, basis.matrix, lin)
        a_ff = mat[free][:, free]
        top = (d_mat.T @ a_ff + w_mat).tocsc()
        sys_mat = sp.vstack([top, j_new[:, free]], format="csc")
        sys_rhs = np.concatenate([d_mat.T @ rhs[free], -psi])
        return AssembledSystem(sys_mat, sys_rhs, symmetric, len(free))

    raise ValueError(f"unknown scheme {scheme!r}")


def _restrict_nullspace(model: RodModel, d_full: sp.csc_matrix,
                        w_full: sp.csc_matrix):
    """Slice the nullspace basis and its linearization to the free dofs.

    Rows follow the free dofs; columns drop eliminated position dofs and the
    dual pair of clamped nodes, so the stacked reduced system stays square.
    """
    n_nodes = model.disc.n_nodes
    fixed = set(model.fixed_dofs.tolist())
    keep_cols = []
    for j in range(n_nodes):
        for c in range(3):
            if 6 * j + c not in fixed:
                keep_cols.append(5 * j + c)
        if 6 * j + 3 not in fixed:          # director free -> keep dual pair
            keep_cols.extend([5 * j + 3, 5 * j + 4])
    keep_cols = np.array(keep_cols, dtype=int)
    d_mat = d_full[model.free_dofs][:, keep_cols]
    w_mat = w_full[keep_cols][:, model.free_dofs]
    return d_mat.tocsc(), w_mat.tocsc()


# --------------------------------------------------------------------------
# cross-discretization map and matrix audits
# --------------------------------------------------------------------------

def hermite_from_bspline_map(space: splines.SplineSpace) -> np.ndarray:
    """Basis change from cubic C1 B-splines to the Hermite coefficients.

    Row ``2j`` holds the values, row ``2j+1`` the slopes of all B-spline
    functions at node ``j``; both bases span the same space, so the map is
    square and invertible.
    """
    if space.degree != 3 or space.smoothness != 1:
        raise ValueError("the Hermite space matches cubic C1 splines only")
    nodes = space.breakpoints
    m = space.n_functions
    out = np.zeros((2 * len(nodes), m))
    for j, s in enumerate(nodes):
        first, ders = splines.eval_spline_basis(space, s, 1)
        out[2 * j, first:first + 4] = ders[0]
        out[2 * j + 1, first:first + 4] = ders[1]
    return out


def matrix_bandwidth(mat: sp.spmatrix) -> int:
    coo = mat.tocoo()
    if coo.nnz == 0:
        return 0
    return int(np.max(np.abs(coo.row - coo.col)))


def symmetry_defect(mat: sp.spmatrix) -> float:
    """``max |A - A^T|`` relative to ``max |A|`` (0 for empty matrices)."""
    diff = (mat - mat.T).tocoo()
    scale = np.max(np.abs(mat.tocoo().data)) if mat.nnz else 0.0
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(diff.data)) / scale) if diff.nnz else 0.0
