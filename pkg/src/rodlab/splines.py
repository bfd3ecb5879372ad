"""One-dimensional spline bases for rod discretizations.

Two families are provided:

* B-spline spaces of degree ``p`` and inter-element continuity ``C^r`` on an
  open knot vector, used by the isogeometric scheme.  Values and derivatives
  up to second order are evaluated with the Cox-de Boor recursion.
* Cubic Hermite spaces, used by the nodal schemes.  The slope functions are
  scaled by the element length so that the slope coefficients carry the
  physical tangent (director) at the nodes.

The module also builds the constant extraction operator that bakes boundary
constraints (Dirichlet rows and higher-derivative rows used for removing
spurious high-frequency modes) into the spline space.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

__all__ = [
    "SplineSpace",
    "HermiteSpace",
    "ExtractionOperator",
    "make_spline_space",
    "make_hermite_space",
    "eval_spline_basis",
    "eval_hermite_basis",
    "greville_points",
    "derivative_rows",
    "value_rows",
    "outlier_constraint_rows",
    "build_outlier_extraction",
    "nullspace_extraction",
]


@dataclass(frozen=True)
class SplineSpace:
    """B-spline space of degree ``degree`` and continuity ``C^smoothness``.

    The knot vector is open (end knots repeated ``degree + 1`` times) with
    interior knots repeated ``degree - smoothness`` times, so the basis
    dimension is ``n_elements * (degree - smoothness) + smoothness + 1``.
    """

    degree: int
    smoothness: int
    n_elements: int
    length: float
    knots: np.ndarray = field(repr=False)

    @property
    def n_functions(self) -> int:
        return len(self.knots) - self.degree - 1

    @property
    def breakpoints(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.n_elements + 1)


@dataclass(frozen=True)
class HermiteSpace:
    """Cubic Hermite space over ``n_elements`` segments.

    Each node carries a value coefficient and a slope coefficient; slope
    functions are scaled by the element length, so slope coefficients are
    tangents in physical units.
    """

    element_lengths: np.ndarray = field(repr=False)

    @property
    def n_elements(self) -> int:
        return len(self.element_lengths)

    @property
    def n_nodes(self) -> int:
        return self.n_elements + 1

    @property
    def n_functions(self) -> int:
        # value + slope function per node
        return 2 * self.n_nodes

    @property
    def length(self) -> float:
        return float(np.sum(self.element_lengths))

    @property
    def breakpoints(self) -> np.ndarray:
        return np.concatenate(([0.0], np.cumsum(self.element_lengths)))


@dataclass(frozen=True)
class ExtractionOperator:
    """Constant basis-reduction operator ``C`` with full column rank.

    Columns span the nullspace of the supplied constraint rows; reduced
    systems are formed as ``C^T A C`` and keep symmetry and sparsity.
    """

    matrix: sp.csc_matrix
    n_constraints: int

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape


def make_spline_space(degree: int, smoothness: int, n_elements: int,
                      length: float) -> SplineSpace:
    """Create a uniform open-knot B-spline space on ``[0, length]``.

    Parameters
    ----------
    degree : int
        Polynomial degree ``p >= 2``.
    smoothness : int
        Continuity order ``r`` with ``1 <= r <= p - 1``.
    n_elements : int
        Number of (uniform) elements, ``>= 1``.
    length : float
        Domain length, ``> 0``.
    """
    if degree < 2:
        raise ValueError(f"degree must be >= 2, got {degree}")
    if not 1 <= smoothness <= degree - 1:
        raise ValueError(
            f"continuity must satisfy 1 <= r <= p-1, got r={smoothness}, p={degree}")
    if n_elements < 1:
        raise ValueError(f"n_elements must be >= 1, got {n_elements}")
    if length <= 0.0:
        raise ValueError(f"length must be positive, got {length}")

    breaks = np.linspace(0.0, length, n_elements + 1)
    mult = degree - smoothness
    knots = np.concatenate([
        np.full(degree + 1, 0.0),
        np.repeat(breaks[1:-1], mult),
        np.full(degree + 1, length),
    ])
    return SplineSpace(degree, smoothness, n_elements, float(length), knots)


def make_hermite_space(n_elements: int, length: float,
                       element_lengths: np.ndarray | None = None) -> HermiteSpace:
    """Create a cubic Hermite space, uniform unless lengths are given."""
    if element_lengths is None:
        if n_elements < 1:
            raise ValueError(f"n_elements must be >= 1, got {n_elements}")
        if length <= 0.0:
            raise ValueError(f"length must be positive, got {length}")
        element_lengths = np.full(n_elements, length / n_elements)
    element_lengths = np.asarray(element_lengths, dtype=float)
    if np.any(element_lengths <= 0.0):
        raise ValueError("element lengths must be positive")
    return HermiteSpace(element_lengths)


def _find_span(knots: np.ndarray, degree: int, s: float) -> int:
    """Knot span index ``i`` with ``knots[i] <= s < knots[i+1]`` (clamped)."""
    n_funcs = len(knots) - degree - 1
    if s >= knots[n_funcs]:
        return n_funcs - 1
    if s <= knots[degree]:
        return degree
    return int(np.searchsorted(knots, s, side="right") - 1)


def _ders_basis(knots: np.ndarray, degree: int, span: int, s: float,
                n_ders: int) -> np.ndarray:
    """Nonzero basis functions and derivatives at ``s`` (Cox-de Boor).

    Returns an array ``ders`` of shape ``(n_ders + 1, degree + 1)`` where
    ``ders[k, j]`` is the k-th derivative of function ``span - degree + j``.
    """
    p = degree
    ndu = np.empty((p + 1, p + 1))
    left = np.empty(p + 1)
    right = np.empty(p + 1)
    ndu[0, 0] = 1.0
    for j in range(1, p + 1):
        left[j] = s - knots[span + 1 - j]
        right[j] = knots[span + j] - s
        saved = 0.0
        for r in range(j):
            ndu[j, r] = right[r + 1] + left[j - r]
            temp = ndu[r, j - 1] / ndu[j, r]
            ndu[r, j] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        ndu[j, j] = saved

    ders = np.zeros((n_ders + 1, p + 1))
    ders[0, :] = ndu[:, p]
    a = np.empty((2, p + 1))
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[0, 0] = 1.0
        for k in range(1, n_ders + 1):
            d = 0.0
            rk = r - k
            pk = p - k
            if r >= k:
                a[s2, 0] = a[s1, 0] / ndu[pk + 1, rk]
                d = a[s2, 0] * ndu[rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[s2, j] = (a[s1, j] - a[s1, j - 1]) / ndu[pk + 1, rk + j]
                d += a[s2, j] * ndu[rk + j, pk]
            if r <= pk:
                a[s2, k] = -a[s1, k - 1] / ndu[pk + 1, r]
                d += a[s2, k] * ndu[r, pk]
            ders[k, r] = d
            s1, s2 = s2, s1
    fac = float(p)
    for k in range(1, n_ders + 1):
        ders[k, :] *= fac
        fac *= p - k
    return ders


def eval_spline_basis(space: SplineSpace, s: float,
                      max_deriv: int = 2) -> tuple[int, np.ndarray]:
    """Evaluate the active basis functions of ``space`` at ``s``.

    Returns ``(first, ders)`` where ``first`` is the index of the first
    active function and ``ders[k, j]`` holds the k-th derivative of function
    ``first + j`` for ``0 <= k <= max_deriv``.  At most ``degree + 1``
    functions are active.
    """
    if s < 0.0 or s > space.length:
        raise ValueError(f"evaluation point {s} outside [0, {space.length}]")
    span = _find_span(space.knots, space.degree, s)
    ders = _ders_basis(space.knots, space.degree, span, float(s), max_deriv)
    return span - space.degree, ders


def eval_hermite_basis(element_length: float, xi: float,
                       max_deriv: int = 2) -> np.ndarray:
    """Cubic Hermite functions on one element, in arclength derivatives.

    ``xi`` is the local coordinate in ``[0, 1]``; slope functions are scaled
    by the element length so their coefficients are physical tangents.
    Returns an array of shape ``(max_deriv + 1, 4)`` ordered
    (value-left, slope-left, value-right, slope-right).
    """
    h = float(element_length)
    if h <= 0.0:
        raise ValueError(f"element length must be positive, got {h}")
    if xi < 0.0 or xi > 1.0:
        raise ValueError(f"local coordinate {xi} outside [0, 1]")
    x = float(xi)
    out = np.zeros((max_deriv + 1, 4))
    out[0] = [1 - 3 * x**2 + 2 * x**3,
              h * (x - 2 * x**2 + x**3),
              3 * x**2 - 2 * x**3,
              h * (-x**2 + x**3)]
    if max_deriv >= 1:
        out[1] = np.array([-6 * x + 6 * x**2,
                           h * (1 - 4 * x + 3 * x**2),
                           6 * x - 6 * x**2,
                           h * (-2 * x + 3 * x**2)]) / h
    if max_deriv >= 2:
        out[2] = np.array([-6 + 12 * x,
                           h * (-4 + 6 * x),
                           6 - 12 * x,
                           h * (-2 + 6 * x)]) / h**2
    return out


def greville_points(space: SplineSpace) -> np.ndarray:
    """Greville abscissae (knot averages) of all basis functions.

    Placing control points at ``axis * greville`` reproduces a straight rod
    exactly, by linear precision of the basis.
    """
    p = space.degree
    m = space.n_functions
    pts = np.array([np.mean(space.knots[i + 1:i + p + 1]) for i in range(m)])
    return pts


def value_rows(space: SplineSpace, end: str) -> np.ndarray:
    """Constraint row enforcing a zero value at the chosen end ('left'/'right')."""
    return derivative_rows(space, end, [0])


def derivative_rows(space: SplineSpace, end: str, orders) -> np.ndarray:
    """Rows of basis derivatives of the given orders at one domain end.

    Each row holds ``N_i^(k)`` at ``s = 0`` or ``s = L`` over all ``m``
    functions; only ``degree + 1`` entries per row are nonzero.
    """
    s = 0.0 if end == "left" else space.length
    if end not in ("left", "right"):
        raise ValueError(f"end must be 'left' or 'right', got {end!r}")
    orders = list(orders)
    if not orders:
        return np.zeros((0, space.n_functions))
    first, ders = eval_spline_basis(space, s, max_deriv=max(orders))
    rows = np.zeros((len(orders), space.n_functions))
    for i, k in enumerate(orders):
        rows[i, first:first + space.degree + 1] = ders[k]
    return rows


#: Derivative orders constrained per end to suppress spurious boundary modes,
#: keyed by the kinematic support type of that end.  Pinned ends ("fixed")
#: constrain even derivatives, clamped ends odd ones; only orders that the
#: space can express (<= p - 1) are used.  The builder below is pluggable so
#: alternative recipes can be swapped in.
_OUTLIER_ORDERS = {
    "fixed": lambda p: [k for k in range(2, p) if k % 2 == 0],
    "clamped": lambda p: [k for k in range(3, p) if k % 2 == 1],
    "free": lambda p: [],
}


def outlier_constraint_rows(space: SplineSpace, bc_kind: str) -> np.ndarray:
    """Boundary-derivative rows used for high-frequency mode removal.

    ``bc_kind`` is one of ``clamped-free``, ``fixed-fixed``,
    ``clamped-clamped``; the per-end derivative orders follow the kinematic
    support of that end.
    """
    try:
        left, right = bc_kind.split("-")
    except ValueError as exc:
        raise ValueError(f"unknown boundary kind {bc_kind!r}") from exc
    if left not in _OUTLIER_ORDERS or right not in _OUTLIER_ORDERS:
        raise ValueError(f"unknown boundary kind {bc_kind!r}")
    rows = [derivative_rows(space, "left", _OUTLIER_ORDERS[left](space.degree)),
            derivative_rows(space, "right", _OUTLIER_ORDERS[right](space.degree))]
    return np.vstack(rows)


def nullspace_extraction(n_functions: int, rows: np.ndarray,
                         tol: float = 1e-12) -> ExtractionOperator:
    """Nullspace basis of the constraint rows, kept local to their support.

    Functions not touched by any row keep identity columns; the touched block
    is completed with an orthonormal local nullspace.  Rejects rank-deficient
    (degenerate) row sets.
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.size == 0 or rows.shape[0] == 0:
        return ExtractionOperator(sp.identity(n_functions, format="csc"), 0)
    if rows.shape[1] != n_functions:
        raise ValueError(
            f"constraint rows have {rows.shape[1]} columns, expected {n_functions}")
    n_rows = rows.shape[0]
    touched = np.flatnonzero(np.any(rows != 0.0, axis=0))
    if touched.size == 0:
        raise ValueError("degenerate constraint rows: all rows are zero")
    local = rows[:, touched]
    u, sv, vt = np.linalg.svd(local)
    scale = max(sv[0], 1.0) if sv.size else 1.0
    rank = int(np.sum(sv > tol * scale))
    if rank < n_rows:
        raise ValueError(
            f"degenerate constraint rows: rank {rank} < {n_rows} rows")
    local_null = vt[rank:].T  # (n_touched, n_touched - rank)

    untouched = np.setdiff1d(np.arange(n_functions), touched)
    n_cols = untouched.size + local_null.shape[1]
    mat = sp.lil_matrix((n_functions, n_cols))
    for j, i in enumerate(untouched):
        mat[i, j] = 1.0
    mat[touched, untouched.size:] = local_null
    return ExtractionOperator(mat.tocsc(), n_rows)


def build_outlier_extraction(space: SplineSpace, bc_kind: str,
                             extra_rows: np.ndarray | None = None) -> ExtractionOperator:
    """Extraction operator for the given boundary kind (one scalar field).

    Combines the mode-removal rows of :func:`outlier_constraint_rows` with
    any caller-supplied rows (e.g. Dirichlet value/slope rows).  The result
    is constant per mesh and computed once.
    """
    rows = outlier_constraint_rows(space, bc_kind)
    if extra_rows is not None and len(extra_rows):
        rows = np.vstack([np.atleast_2d(extra_rows), rows]) if rows.size else np.atleast_2d(extra_rows)
    return nullspace_extraction(space.n_functions, rows)
