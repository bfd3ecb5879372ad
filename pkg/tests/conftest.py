"""Shared helpers: finite-difference oracles and small model factories."""

import numpy as np
import pytest

import rodlab as rl


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def make_test_model(scheme, n_elements=5, fix_left="clamped", loads=None,
                    props=None, **form_kw):
    props = props or rl.RodProperties(
        axial_stiffness=1.0e3, bending_stiffness=1.0e2,
        mass_per_length=1.5, rotary_inertia=5.0e-3, length=8.0)
    loads = loads or rl.LoadModel(gravity=(0.0, 0.0, -2.0))
    form = rl.Formulation(scheme, **form_kw)
    return rl.build_model(form, props, n_elements, loads, fix_left=fix_left)


def perturbed_state(model, rng, scale=0.02):
    """Random admissible configuration near the straight rod."""
    q0 = rl.straight_state(model.disc)
    q = q0 + scale * rng.standard_normal(model.n_dof)
    q[model.fixed_dofs] = q0[model.fixed_dofs]
    return q


def fd_system_matrix(model, regime, q, lam=None, q_old=None, v_old=None,
                     dt=None, ramp=1.0, step=1e-7):
    """Central finite difference of the assembled right-hand side.

    Columns follow the solve-space layout of the assembled system (reduced
    coordinates for the extraction-operator route, multipliers last).  The
    staggered flow reference is pinned to the base state so the residual
    stays a fixed function of the unknowns.
    """
    kw = dict(q_old=q_old, v_old=v_old, dt=dt, ramp=ramp,
              flow_reference=np.asarray(q, dtype=float).copy())
    base = rl.assemble_system(model, regime, q, lam, **kw)
    red = base.reduction
    n_primal = red.shape[1] if red is not None else len(model.free_dofs)
    h = step * model.disc.length
    cols = []
    for j in range(n_primal):
        dq = np.zeros(model.n_dof)
        if red is not None:
            dq[model.free_dofs] = red.toarray()[:, j]
        else:
            dq[model.free_dofs[j]] = 1.0
        rp = rl.assemble_system(model, regime, q + h * dq, lam, **kw).rhs
        rm = rl.assemble_system(model, regime, q - h * dq, lam, **kw).rhs
        cols.append(-(rp - rm) / (2.0 * h))
    if base.n_multipliers:
        for k in range(base.n_multipliers):
            lp, lm = lam.copy(), lam.copy()
            lp[k] += h
            lm[k] -= h
            rp = rl.assemble_system(model, regime, q, lp, **kw).rhs
            rm = rl.assemble_system(model, regime, q, lm, **kw).rhs
            cols.append(-(rp - rm) / (2.0 * h))
    return base, np.stack(cols, axis=1)


def fd_relative_error(base, fd_matrix):
    exact = base.matrix.toarray()
    return np.linalg.norm(fd_matrix - exact) / np.linalg.norm(exact)
