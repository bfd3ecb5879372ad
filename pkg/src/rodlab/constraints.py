"""Unit nodal director constraint machinery for the nodal schemes.

The nodal schemes carry per-node dofs ``(x, d)`` interleaved as
``[x1, d1, x2, d2, ...]`` (three scalar dofs each).  Keeping the nodal
directors on the unit sphere requires the constraint ``d_i . d_i = 1`` at
every unconstrained node.  This module provides the constraint residual, its
Jacobian, the nullspace basis built from dual vectors (with a
largest-norm pair selection that avoids the degenerate alignments of a
fixed choice), the coupling/penalty tangent blocks, and the director-scaling
transform used for conditioning studies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

__all__ = [
    "node_director_dofs",
    "node_position_dofs",
    "directors_from_state",
    "unit_director_residual",
    "constraint_jacobian",
    "select_dual_pairs",
    "constraint_nullspace",
    "nullspace_linearization",
    "multiplier_coupling",
    "penalty_tangent",
    "apply_director_scaling",
    "remove_director_scaling",
]

_EYE3 = np.eye(3)
# dual-vector derivative: d/dd_c of [d]_x E_j  =  E_c x E_j  (constant)
_DUAL_DERIV = np.array([[np.cross(_EYE3[c], _EYE3[j]) for j in range(3)]
                        for c in range(3)])


def node_position_dofs(n_nodes: int) -> np.ndarray:
    """Scalar dof indices of all nodal positions, shape (n_nodes, 3)."""
    base = 6 * np.arange(n_nodes)[:, None]
    return base + np.arange(3)


def node_director_dofs(n_nodes: int) -> np.ndarray:
    """Scalar dof indices of all nodal directors, shape (n_nodes, 3)."""
    base = 6 * np.arange(n_nodes)[:, None]
    return base + np.arange(3, 6)


def directors_from_state(q: np.ndarray) -> np.ndarray:
    """Nodal directors from the interleaved state vector, shape (n_nodes, 3)."""
    q = np.asarray(q, dtype=float)
    if q.size % 6:
        raise ValueError("nodal state length must be a multiple of 6")
    return q.reshape(-1, 6)[:, 3:]


def unit_director_residual(q: np.ndarray, nodes: np.ndarray | None = None,
                           target: float = 1.0) -> np.ndarray:
    """Constraint values ``d_i . d_i - target`` at the selected nodes."""
    d = directors_from_state(q)
    if nodes is not None:
        d = d[nodes]
    return np.einsum("ij,ij->i", d, d) - target


def constraint_jacobian(q: np.ndarray,
                        nodes: np.ndarray | None = None) -> sp.csr_matrix:
    """Jacobian of the constraint vector: row i holds ``2 d_i^T`` in the
    director columns of node i, zeros elsewhere."""
    d = directors_from_state(q)
    n_dof = np.asarray(q).size
    all_nodes = np.arange(d.shape[0]) if nodes is None else np.asarray(nodes)
    cols = node_director_dofs(d.shape[0])[all_nodes]
    rows = np.repeat(np.arange(len(all_nodes)), 3)
    data = 2.0 * d[all_nodes].ravel()
    return sp.csr_matrix((data, (rows, cols.ravel())),
                         shape=(len(all_nodes), n_dof))


def select_dual_pairs(directors: np.ndarray,
                      min_norm: float = 1e-8) -> np.ndarray:
    """Indices (j1, j2) of the two largest-norm dual vectors per node.

    The duals of a director ``d`` are ``[d]_x E_j``; any two are linearly
    independent unless ``d`` is (nearly) zero.  Picking the two of largest
    norm, with ties broken by index, keeps the pair well conditioned for all
    alignments.  Returns shape (n_nodes, 2) with j1 < j2.
    """
    d = np.asarray(directors, dtype=float)
    norms2 = np.stack([d[:, 1]**2 + d[:, 2]**2,
                       d[:, 0]**2 + d[:, 2]**2,
                       d[:, 0]**2 + d[:, 1]**2], axis=1)
    if np.any(np.einsum("ij,ij->i", d, d) < min_norm**2):
        raise ValueError("degenerate (near-zero) nodal director: "
                         "dual vectors are not independent")
    # stable: sort by (-norm, index), keep the two best, report sorted by index
    order = np.argsort(-norms2, axis=1, kind="stable")[:, :2]
    return np.sort(order, axis=1)


def dual_vectors(directors: np.ndarray, pairs: np.ndarray) -> np.ndarray:
    """Selected dual vectors ``[d]_x E_j = d x E_j``, shape (n, 2, 3)."""
    d = np.asarray(directors, dtype=float)
    full = np.stack([np.cross(d, _EYE3[j]) for j in range(3)], axis=1)
    idx = np.arange(d.shape[0])[:, None]
    return full[idx, pairs]


@dataclass(frozen=True)
class NullspaceBasis:
    """Nullspace basis of the constraint Jacobian with its pair selection.

    Column layout: five columns per node, positions first (identity blocks)
    then the two selected duals.  ``J @ matrix == 0`` exactly.
    """

    matrix: sp.csc_matrix
    pairs: np.ndarray          # (n_nodes, 2) selected dual indices


def constraint_nullspace(q: np.ndarray,
                         pairs: np.ndarray | None = None) -> NullspaceBasis:
    """Nullspace ``D`` of the constraint Jacobian.

    Per node the position columns carry the identity and the director
    columns carry the two selected dual vectors, which are orthogonal to the
    director, so ``J D = 0`` holds exactly.
    """
    d = directors_from_state(q)
    n_nodes = d.shape[0]
    if pairs is None:
        pairs = select_dual_pairs(d)
    duals = dual_vectors(d, pairs)

    n_dof = 6 * n_nodes
    n_cols = 5 * n_nodes
    # identity blocks on positions
    pos_rows = node_position_dofs(n_nodes).ravel()
    pos_cols = (5 * np.arange(n_nodes)[:, None] + np.arange(3)).ravel()
    pos_data = np.ones(3 * n_nodes)
    # dual blocks on directors: entry D[director dof c of node n, dual col k]
    dir_rows = np.repeat(node_director_dofs(n_nodes)[:, None, :], 2, axis=1)
    dir_cols = 5 * np.arange(n_nodes)[:, None] + 3 + np.arange(2)
    dir_cols = np.repeat(dir_cols[:, :, None], 3, axis=2)
    mat = sp.csr_matrix(
        (np.concatenate([pos_data, duals.ravel()]),
         (np.concatenate([pos_rows, dir_rows.ravel()]),
          np.concatenate([pos_cols, dir_cols.ravel()]))),
        shape=(n_dof, n_cols))
    return NullspaceBasis(mat.tocsc(), pairs)


def nullspace_linearization(residual: np.ndarray, pairs: np.ndarray,
                            chain_factor: float = 1.0) -> sp.csc_matrix:
    """Linearization of ``D(q)^T r`` with respect to the nodal state.

    Column ``i`` holds ``(d D^T / d q_i) r`` for the frozen pair selection;
    only director dofs produce nonzero columns since ``D`` does not depend on
    the positions.  ``chain_factor`` is 1 for evaluation at the unknown state
    and 1/2 when ``D`` is evaluated at the midpoint of a time step.
    """
    r = np.asarray(residual, dtype=float)
    n_nodes = r.size // 6
    pairs = np.asarray(pairs)
    r_dir = r.reshape(-1, 6)[:, 3:]                     # (n, 3)
    # deriv[c, j] = d(dual_j)/d(d_c) = E_c x E_j  -> block (3x2) per node
    # entry for (dual column k, director dof c): (E_c x E_{pair_k}) . r_dir
    rows = (5 * np.arange(n_nodes)[:, None, None] + 3 + np.arange(2)[None, :, None])
    rows = np.broadcast_to(rows, (n_nodes, 2, 3))
    cols = node_director_dofs(n_nodes)[:, None, :]
    cols = np.broadcast_to(cols, (n_nodes, 2, 3))
    deriv = _DUAL_DERIV[:, pairs, :]                    # (3, n, 2, 3)
    deriv = np.moveaxis(deriv, 0, 2)                    # (n, 2, 3(c), 3)
    data = chain_factor * np.einsum("nkcj,nj->nkc", deriv, r_dir)
    mat = sp.csr_matrix((data.ravel(), (rows.ravel(), cols.ravel())),
                        shape=(5 * n_nodes, 6 * n_nodes))
    mat.eliminate_zeros()
    return mat.tocsc()


def multiplier_coupling(multipliers: np.ndarray, nodes: np.ndarray,
                        n_nodes: int, chain_factor: float = 1.0) -> sp.csc_matrix:
    """Linearization of the constraint force ``J^T lambda``.

    Produces ``2 * chain_factor * lambda_i I`` on the director diagonal block
    of each constrained node (``chain_factor`` = 1/2 in a dynamic step where
    the force is evaluated at the midpoint, 1 in statics).
    """
    lam = np.asarray(multipliers, dtype=float)
    nodes = np.asarray(nodes)
    rows = node_director_dofs(n_nodes)[nodes].ravel()
    data = np.repeat(2.0 * chain_factor * lam, 3)
    mat = sp.csr_matrix((data, (rows, rows)),
                        shape=(6 * n_nodes, 6 * n_nodes))
    mat.eliminate_zeros()
    return mat.tocsc()


def penalty_tangent(q: np.ndarray, nodes: np.ndarray, scale: float,
                    target: float = 1.0) -> sp.csc_matrix:
    """Exact tangent of the penalty force ``scale * J^T Psi``.

    Per constrained node the director block is
    ``scale * (4 d d^T + 2 (d.d - target) I)``; the first term is
    ``scale * J^T J``, the second the residual-proportional block.  Symmetric
    by construction, PSD whenever all constraint values are nonnegative.
    """
    d = directors_from_state(q)
    nodes = np.asarray(nodes)
    n_nodes = d.shape[0]
    dn = d[nodes]
    psi = np.einsum("ij,ij->i", dn, dn) - target
    blocks = scale * (4.0 * np.einsum("ni,nj->nij", dn, dn)
                      + 2.0 * psi[:, None, None] * np.eye(3))
    dofs = node_director_dofs(n_nodes)[nodes]
    rows = np.repeat(dofs[:, :, None], 3, axis=2)
    cols = np.repeat(dofs[:, None, :], 3, axis=1)
    return sp.csr_matrix((blocks.ravel(), (rows.ravel(), cols.ravel())),
                         shape=(6 * n_nodes, 6 * n_nodes)).tocsc()


def apply_director_scaling(q: np.ndarray, director_scale: float) -> np.ndarray:
    """Replace nodal directors ``d`` by ``d_hat = alpha * d``.

    The scaled unknowns enforce ``d_hat . d_hat = alpha^2``; the physical
    directors recovered by :func:`remove_director_scaling` keep unit length
    at convergence.  ``alpha = 1`` is the identity.
    """
    if director_scale <= 0.0:
        raise ValueError("director scale must be positive")
    out = np.asarray(q, dtype=float).copy().reshape(-1, 6)
    out[:, 3:] *= director_scale
    return out.ravel()


def remove_director_scaling(q: np.ndarray, director_scale: float) -> np.ndarray:
    """Inverse of :func:`apply_director_scaling` (exact round trip)."""
    if director_scale <= 0.0:
        raise ValueError("director scale must be positive")
    out = np.asarray(q, dtype=float).copy().reshape(-1, 6)
    out[:, 3:] /= director_scale
    return out.ravel()
