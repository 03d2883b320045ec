"""Discrete operators for the bulk-surface heat system.

Assembles, with linear Lagrange elements and lumped (diagonal) mass:

- M: the mass matrix of the product space L2(bulk) x L2(boundary), i.e. the
  bulk lumped mass plus the surface lumped mass added on the trace degrees
  of freedom (one dof per bulk node; boundary dofs carry both measures),
- K: the symmetric form  gamma * (grad u, grad v)_bulk
  + delta * (grad_S u, grad_S v)_boundary + (beta u, v)_boundary,
- B: the boundary injection carrying the surface mass weights, mapping a
  boundary signal to the right-hand side of the surface equation.

In 1D the surface measure is the counting measure (each endpoint has mass 1)
and the surface stiffness is empty; on closed 2D boundary curves the surface
operators are 1D linear elements in arclength on the boundary polygon, with
corner nodes receiving half of each adjacent edge weight.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import BulkSurfaceMesh

__all__ = [
    "StatePair",
    "DiscreteSystem",
    "ConvergenceError",
    "assemble",
    "inner_X2",
    "norm_X2",
    "estimate_coercivity",
    "smallest_eigenpair",
    "export_matrix_coo",
]


class ConvergenceError(RuntimeError):
    """An iterative eigenvalue solve failed to reach its tolerance."""


@dataclass
class StatePair:
    """A bulk field together with a boundary field.

    With trace-coupled degrees of freedom the two fields share the boundary
    nodes; ``to_vector`` realizes the pair as a single coupled vector by
    overwriting the boundary entries of the bulk field with the surface
    values (the surface datum wins when the two disagree).
    """

    bulk: np.ndarray
    surface: np.ndarray

    def to_vector(self, mesh: BulkSurfaceMesh) -> np.ndarray:
        if self.bulk.shape[0] != mesh.n_nodes:
            raise ValueError(
                f"bulk field has {self.bulk.shape[0]} entries, "
                f"mesh has {mesh.n_nodes} nodes"
            )
        if self.surface.shape[0] != mesh.n_boundary:
            raise ValueError(
                f"surface field has {self.surface.shape[0]} entries, "
                f"mesh has {mesh.n_boundary} boundary nodes"
            )
        vec = np.asarray(self.bulk, dtype=float).copy()
        vec[mesh.boundary_nodes] = self.surface
        return vec

    @staticmethod
    def from_vector(mesh: BulkSurfaceMesh, vec: np.ndarray) -> "StatePair":
        vec = np.asarray(vec, dtype=float)
        if vec.shape[0] != mesh.n_nodes:
            raise ValueError("vector length does not match mesh node count")
        return StatePair(bulk=vec.copy(), surface=vec[mesh.boundary_nodes].copy())

    def is_trace_coupled(self, mesh: BulkSurfaceMesh, tol: float = 1e-14) -> bool:
        return bool(
            np.max(np.abs(self.bulk[mesh.boundary_nodes] - self.surface)) <= tol
        )


@dataclass
class DiscreteSystem:
    """Matrices and coefficients of the discretized system.

    M, K, B are as in the module docstring.  ``m_bulk`` and ``m_surf`` are
    the lumped bulk and surface masses; ``K_bulk`` and ``K_surf`` are the
    coefficient-free bulk and surface stiffness matrices (K_surf is zero in
    1D).  ``beta0`` is the nodal minimum of beta.
    """

    mesh: BulkSurfaceMesh
    gamma: float
    delta: float
    beta: np.ndarray
    beta0: float
    M: sp.csr_matrix
    K: sp.csr_matrix
    B: sp.csr_matrix
    M_diag: np.ndarray
    m_bulk: np.ndarray
    m_surf: np.ndarray
    K_bulk: sp.csr_matrix
    K_surf: sp.csr_matrix

    @property
    def ndof(self) -> int:
        return self.mesh.n_nodes

    @property
    def n_boundary(self) -> int:
        return self.mesh.n_boundary

    @property
    def boundary_nodes(self) -> np.ndarray:
        return self.mesh.boundary_nodes


def assemble(
    mesh: BulkSurfaceMesh,
    gamma: float,
    delta: float,
    beta,
) -> DiscreteSystem:
    """Assemble the discrete system on a mesh.

    Parameters
    ----------
    gamma : bulk diffusivity, > 0.
    delta : surface diffusivity, >= 0.
    beta : boundary reaction; a scalar, an array over boundary nodes, or a
        callable evaluated at the boundary node coordinates.
    """
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if delta < 0:
        raise ValueError(f"delta must be nonnegative, got {delta}")
    beta_vals = _beta_values(mesh, beta)
    if np.any(beta_vals < 0):
        raise ValueError("beta must be nonnegative at every boundary node")

    m_bulk, K_bulk = _bulk_operators(mesh)
    m_surf, K_surf = _surface_operators(mesh)

    n = mesh.n_nodes
    bnodes = mesh.boundary_nodes
    M_diag = m_bulk.copy()
    M_diag[bnodes] += m_surf
    M = sp.diags(M_diag, format="csr")

    K_beta = sp.csr_matrix(
        (m_surf * beta_vals, (bnodes, bnodes)), shape=(n, n)
    )
    K = (gamma * K_bulk + delta * K_surf + K_beta).tocsr()
    K.sum_duplicates()

    B = sp.csr_matrix(
        (m_surf, (bnodes, np.arange(mesh.n_boundary))),
        shape=(n, mesh.n_boundary),
    )

    return DiscreteSystem(
        mesh=mesh,
        gamma=float(gamma),
        delta=float(delta),
        beta=beta_vals,
        beta0=float(beta_vals.min()),
        M=M,
        K=K,
        B=B,
        M_diag=M_diag,
        m_bulk=m_bulk,
        m_surf=m_surf,
        K_bulk=K_bulk,
        K_surf=K_surf,
    )


def inner_X2(sys: DiscreteSystem, U: np.ndarray, V: np.ndarray) -> float:
    """Mass inner product U^T M V of coupled state vectors."""
    U = np.asarray(U, dtype=float)
    V = np.asarray(V, dtype=float)
    if U.shape != (sys.ndof,) or V.shape != (sys.ndof,):
        raise ValueError(
            f"state vectors must have shape ({sys.ndof},), "
            f"got {U.shape} and {V.shape}"
        )
    return float(U @ (sys.M_diag * V))


def norm_X2(sys: DiscreteSystem, U: np.ndarray) -> float:
    """Norm induced by the mass inner product."""
    return float(np.sqrt(max(inner_X2(sys, U, U), 0.0)))


def smallest_eigenpair(
    sys: DiscreteSystem,
    tol: float = 1e-10,
    maxit: int = 10_000,
) -> tuple[float, np.ndarray]:
    """Smallest generalized eigenvalue of (K, M) by inverse power iteration.

    Requires K positive definite (beta bounded below by a positive
    constant).  Returns (c, x) with K x = c M x and x of unit M-norm.
    Raises ConvergenceError after ``maxit`` iterations without the relative
    eigenvalue change dropping below ``tol``.
    """
    if sys.beta0 <= 0:
        raise ValueError(
            "coercivity estimate requires beta >= beta0 > 0 on the boundary"
        )
    lu = spla.splu(sys.K.tocsc())
    rng = np.random.default_rng(0)
    x = rng.standard_normal(sys.ndof)
    x /= norm_X2(sys, x)
    lam_old = np.inf
    for _ in range(maxit):
        y = lu.solve(sys.M_diag * x)
        y /= norm_X2(sys, y)
        lam = float(y @ (sys.K @ y))  # Rayleigh quotient; y has unit M-norm
        x = y
        # eigenvalue settles quadratically, the vector only linearly; demand both
        resid = np.linalg.norm(sys.K @ x - lam * (sys.M_diag * x))
        if (
            abs(lam - lam_old) <= tol * max(1.0, abs(lam))
            and resid <= np.sqrt(tol) * max(1.0, abs(lam))
        ):
            return lam, x
        lam_old = lam
    raise ConvergenceError(
        f"inverse power iteration did not converge in {maxit} iterations"
    )


def estimate_coercivity(sys: DiscreteSystem, tol: float = 1e-10) -> float:
    """Best constant c with x^T K x >= c x^T M x for all x."""
    c, _ = smallest_eigenpair(sys, tol=tol)
    return c


def export_matrix_coo(matrix: sp.spmatrix, path) -> None:
    """Write a matrix in coordinate text format: one 'row col value' per line."""
    coo = sp.coo_matrix(matrix)
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as fh:
        for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            fh.write(f"{r} {c} {v:.17g}\n")


def _beta_values(mesh: BulkSurfaceMesh, beta) -> np.ndarray:
    if callable(beta):
        vals = np.asarray(
            beta(mesh.bulk_nodes[mesh.boundary_nodes]), dtype=float
        )
    elif np.isscalar(beta):
        vals = np.full(mesh.n_boundary, float(beta))
    else:
        vals = np.asarray(beta, dtype=float)
    if vals.shape != (mesh.n_boundary,):
        raise ValueError(
            f"beta must give one value per boundary node "
            f"({mesh.n_boundary}), got shape {vals.shape}"
        )
    return vals


def _bulk_operators(mesh: BulkSurfaceMesh) -> tuple[np.ndarray, sp.csr_matrix]:
    """Lumped bulk mass vector and bulk stiffness (coefficient-free)."""
    n = mesh.n_nodes
    m = np.zeros(n)
    rows, cols, vals = [], [], []
    if mesh.dim == 1:
        x = mesh.bulk_nodes[:, 0]
        for i, j in mesh.bulk_cells:
            hc = x[j] - x[i]
            m[i] += hc / 2.0
            m[j] += hc / 2.0
            k = 1.0 / hc
            rows += [i, i, j, j]
            cols += [i, j, i, j]
            vals += [k, -k, -k, k]
    else:
        pts = mesh.bulk_nodes
        for tri in mesh.bulk_cells:
            a, b, c = pts[tri[0]], pts[tri[1]], pts[tri[2]]
            area2 = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
            area = 0.5 * area2
            # gradients of the barycentric basis functions
            g = (
                np.array(
                    [
                        [b[1] - c[1], c[0] - b[0]],
                        [c[1] - a[1], a[0] - c[0]],
                        [a[1] - b[1], b[0] - a[0]],
                    ]
                )
                / area2
            )
            for li in range(3):
                m[tri[li]] += area / 3.0
                for lj in range(3):
                    rows.append(tri[li])
                    cols.append(tri[lj])
                    vals.append(area * float(g[li] @ g[lj]))
    K = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    K.sum_duplicates()
    return m, K


def _surface_operators(mesh: BulkSurfaceMesh) -> tuple[np.ndarray, sp.csr_matrix]:
    """Lumped surface mass per boundary node and surface stiffness.

    1D: counting measure, no stiffness.  2D: linear elements in arclength on
    the boundary polygon.
    """
    n = mesh.n_nodes
    nb = mesh.n_boundary
    if mesh.dim == 1:
        return np.ones(nb), sp.csr_matrix((n, n))
    pos_in_boundary = {int(node): k for k, node in enumerate(mesh.boundary_nodes)}
    m = np.zeros(nb)
    rows, cols, vals = [], [], []
    pts = mesh.bulk_nodes
    for i, j in mesh.boundary_edges:
        ell = float(np.linalg.norm(pts[j] - pts[i]))
        m[pos_in_boundary[int(i)]] += ell / 2.0
        m[pos_in_boundary[int(j)]] += ell / 2.0
        k = 1.0 / ell
        rows += [i, i, j, j]
        cols += [i, j, i, j]
        vals += [k, -k, -k, k]
    K = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    K.sum_duplicates()
    return m, K
