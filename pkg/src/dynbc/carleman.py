"""Carleman weights and empirical evaluation of the weighted inequality.

The weights, for a parameter lambda > 0, an exponent shift m > 1 and the
auxiliary field eta (positive inside, zero on the boundary), are

    theta(t) = 1 / (t (T - t)),
    xi(x)    = exp(lambda (m ||eta||_inf + eta(x))),
    p(x)     = exp(2 lambda m ||eta||_inf) - xi(x),
    alpha    = theta(t) p(x),

and the damping factor is exp(-2 R alpha), which vanishes faster than any
power of theta as t -> 0+ or t -> T-.  Both sides of the weighted inequality

    lambda^3 R^2 I_bulk(theta^3 xi^3 phi^2)
      + lambda I_bulk(theta xi |grad phi|^2)
      + lambda^2 R^2 I_surf(theta^3 xi^3 phi_G^2)
    <= C I_surf(theta xi |d_t phi_G + delta LB(phi_G) - gamma d_nu phi|^2)

are evaluated on discrete adjoint trajectories with mass-lumped space
quadrature and trapezoidal time quadrature; the weighted integrands are
taken to vanish at t in {0, T}.  The sweep records the empirical ratio
LHS / RHS over seeded random final data for a grid of (lambda, R).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .assembly import DiscreteSystem, norm_X2
from .evolution import Trajectory, recover_normal_flux, solve_backward
from .mesh import BulkSurfaceMesh, EtaField

__all__ = [
    "CarlemanParams",
    "WeightEval",
    "SweepResult",
    "eval_weights",
    "carleman_lhs",
    "carleman_rhs",
    "carleman_sweep",
    "weight_bounds",
    "pointwise_lambda_floor",
]


@dataclass(frozen=True)
class CarlemanParams:
    """Weight parameters: lam (the lambda parameter), R, m > 1, horizon T, and eta."""

    lam: float
    R: float
    m: float
    T: float
    eta: EtaField

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if not self.R > 0:
            raise ValueError(f"R must be positive, got {self.R}")
        if not self.m > 1:
            raise ValueError(f"m must exceed 1, got {self.m}")
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")


@dataclass
class WeightEval:
    """Weights evaluated on a set of interior times and all mesh nodes."""

    times: np.ndarray
    theta: np.ndarray  # (n_times,)
    xi: np.ndarray  # (n_nodes,)
    alpha: np.ndarray  # (n_times, n_nodes)
    exp_factor: np.ndarray  # (n_times, n_nodes), exp(-2 R alpha)


@dataclass
class SweepResult:
    """Rows (lam, R, sample_id, lhs, rhs, ratio) plus per-cell max ratios."""

    rows: list[tuple[float, float, int, float, float, float]]
    max_ratio: dict[tuple[float, float], float]

    def write_csv(self, path, header_lines: list[str] | None = None) -> None:
        with open(path, "w") as fh:
            for line in header_lines or []:
                fh.write(f"# {line}\n")
            fh.write("lambda,R,sample_id,lhs,rhs,ratio\n")
            for lam, R, sid, lhs, rhs, ratio in self.rows:
                fh.write(
                    f"{lam:.17g},{R:.17g},{sid},"
                    f"{lhs:.17g},{rhs:.17g},{ratio:.17g}\n"
                )


def eval_weights(
    params: CarlemanParams, mesh: BulkSurfaceMesh, times: np.ndarray
) -> WeightEval:
    """Evaluate theta, xi, alpha and exp(-2 R alpha) at the given times.

    Times must lie strictly inside (0, T); theta is singular at the
    endpoints.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times <= 0.0) or np.any(times >= params.T):
        raise ValueError("weight evaluation requires times strictly inside (0, T)")
    s = params.eta.sup_norm
    theta = 1.0 / (times * (params.T - times))
    xi = np.exp(params.lam * (params.m * s + params.eta.values))
    p = np.exp(2.0 * params.lam * params.m * s) - xi
    alpha = np.outer(theta, p)
    return WeightEval(
        times=times,
        theta=theta,
        xi=xi,
        alpha=alpha,
        exp_factor=np.exp(-2.0 * params.R * alpha),
    )


def _interior_weights(
    params: CarlemanParams, sys: DiscreteSystem, traj: Trajectory
) -> WeightEval:
    if traj.states.shape[1] != sys.ndof:
        raise ValueError("trajectory does not match the discrete system")
    if traj.times.shape[0] < 3:
        raise ValueError("trajectory has no interior time nodes")
    if abs(traj.times[-1] - params.T) > 1e-12 * max(1.0, params.T):
        raise ValueError("trajectory horizon differs from the weight horizon T")
    return eval_weights(params, sys.mesh, traj.times[1:-1])


def carleman_lhs(
    sys: DiscreteSystem, adj: Trajectory, params: CarlemanParams
) -> float:
    """Weighted left-hand side evaluated on an adjoint trajectory."""
    w = _interior_weights(params, sys, adj)
    phi = adj.states[1:-1]
    dt = adj.dt
    bnodes = sys.boundary_nodes

    th3 = w.theta**3
    xi3 = w.xi**3
    bulk_sq = (
        th3[:, None] * xi3[None, :] * w.exp_factor * phi**2 * sys.m_bulk[None, :]
    )
    term_sq = dt * bulk_sq.sum()

    grad_sq = _nodal_grad_sq(sys, phi)
    bulk_gr = (
        w.theta[:, None]
        * w.xi[None, :]
        * w.exp_factor
        * grad_sq
        * sys.m_bulk[None, :]
    )
    term_gr = dt * bulk_gr.sum()

    surf = (
        th3[:, None]
        * xi3[None, bnodes]
        * w.exp_factor[:, bnodes]
        * phi[:, bnodes] ** 2
        * sys.m_surf[None, :]
    )
    term_surf = dt * surf.sum()

    lam, R = params.lam, params.R
    return float(lam**3 * R**2 * term_sq + lam * term_gr + lam**2 * R**2 * term_surf)


def carleman_rhs(
    sys: DiscreteSystem,
    adj: Trajectory,
    params: CarlemanParams,
    path: str = "equation",
) -> float:
    """Weighted right-hand side on an adjoint trajectory.

    path="equation" substitutes the boundary equation, so the integrand is
    theta xi exp(-2 R alpha) (beta phi_G)^2 exactly; path="direct" assembles
    d_t phi_G + delta LB(phi_G) - gamma d_nu phi from discrete time
    differences, the surface stiffness, and the variational flux recovery.
    The two agree up to discretization error.
    """
    w = _interior_weights(params, sys, adj)
    bnodes = sys.boundary_nodes
    phi_g = adj.states[1:-1][:, bnodes]
    dt = adj.dt

    if path == "equation":
        comb = sys.beta[None, :] * phi_g
    elif path == "direct":
        flux = recover_normal_flux(sys, adj)
        # equation recovery is d_t phi_G + delta LB(phi_G) - beta phi_G, so
        # adding beta phi_G back isolates d_t phi_G + delta LB(phi_G).
        comb = (flux.equation + sys.beta[None, :] * adj.states[:, bnodes])[1:-1]
        comb = comb - flux.variational[1:-1]
    else:
        raise ValueError(f"path must be 'equation' or 'direct', got {path!r}")

    surf = (
        w.theta[:, None]
        * w.xi[None, bnodes]
        * w.exp_factor[:, bnodes]
        * comb**2
        * sys.m_surf[None, :]
    )
    return float(dt * surf.sum())


def carleman_sweep(
    sys: DiscreteSystem,
    params_grid,
    nt: int,
    theta: float,
    samples: int,
    seed: int,
) -> SweepResult:
    """Evaluate both sides over a (lambda, R) grid and seeded random final data.

    Each sample is a standard normal final datum normalized to unit M-norm
    (the zero draw is rejected).  One backward solve per sample and horizon
    serves every grid cell; results are merged in grid order, so a fixed
    seed reproduces the table bit for bit.
    """
    params_list = list(params_grid)
    if samples < 1:
        raise ValueError(f"need at least one sample, got {samples}")
    rng = np.random.default_rng(seed)
    data = []
    for _ in range(samples):
        v = rng.standard_normal(sys.ndof)
        nv = norm_X2(sys, v)
        while nv == 0.0:
            v = rng.standard_normal(sys.ndof)
            nv = norm_X2(sys, v)
        data.append(v / nv)

    trajectories: dict[float, list[Trajectory]] = {}
    rows = []
    max_ratio: dict[tuple[float, float], float] = {}
    for params in params_list:
        if params.T not in trajectories:
            trajectories[params.T] = [
                solve_backward(sys, v, params.T, nt, theta) for v in data
            ]
        cell_max = 0.0
        for sid, adj in enumerate(trajectories[params.T]):
            lhs = carleman_lhs(sys, adj, params)
            rhs = carleman_rhs(sys, adj, params, path="equation")
            # rhs underflows to 0 when lam*m*sup(eta) pushes exp(-2 R alpha)
            # below double precision everywhere; record nan, don't raise
            ratio = lhs / rhs if rhs > 0.0 else float("nan")
            rows.append((params.lam, params.R, sid, lhs, rhs, ratio))
            cell_max = max(cell_max, ratio)
        max_ratio[(params.lam, params.R)] = cell_max
    return SweepResult(rows=rows, max_ratio=max_ratio)


def weight_bounds(
    params: CarlemanParams, mesh: BulkSurfaceMesh, times: np.ndarray
) -> dict:
    """Grid extrema of the weight combinations used by the estimates.

    Returns min over the grid of theta xi, the min of theta^3 xi^3
    exp(-2 R alpha) restricted to [T/4, 3T/4], the max of theta xi
    exp(-2 R alpha), and the empirical constant
    varsigma1 = max |alpha_t| / (theta^2 xi^2) with the analytic
    alpha_t = theta'(t) p(x).
    """
    w = eval_weights(params, mesh, times)
    theta_xi = w.theta[:, None] * w.xi[None, :]
    t3x3e = w.theta[:, None] ** 3 * w.xi[None, :] ** 3 * w.exp_factor
    txe = theta_xi * w.exp_factor

    mid = (w.times >= params.T / 4.0) & (w.times <= 3.0 * params.T / 4.0)
    s = params.eta.sup_norm
    p = np.exp(2.0 * params.lam * params.m * s) - w.xi
    theta_t = (2.0 * w.times - params.T) / (w.times * (params.T - w.times)) ** 2
    alpha_t = np.outer(theta_t, p)
    varsigma1 = float(np.max(np.abs(alpha_t) / theta_xi**2))

    return {
        "min_theta_xi": float(theta_xi.min()),
        "min_theta3_xi3_exp_mid": float(t3x3e[mid].min()) if mid.any() else np.inf,
        "max_theta_xi_exp": float(txe.max()),
        "varsigma1": varsigma1,
        "theta_xi_floor_analytic": float(
            4.0 * np.exp(params.lam * params.m * s) / params.T**2
        ),
    }


def pointwise_lambda_floor(mesh: BulkSurfaceMesh, eta: EtaField) -> np.ndarray:
    """Per-node value of 2 |Laplacian(eta)| / |grad eta|^2.

    The pointwise lower bound on lambda blows up where grad eta vanishes
    (the interior critical point eta must have); such nodes report inf.
    The sweep only records this diagnostic, it does not enforce it.
    """
    if mesh.kind == "interval":
        lap = np.full(mesh.n_nodes, -2.0)
    elif mesh.kind == "disk":
        lap = np.full(mesh.n_nodes, -4.0)
    elif mesh.kind == "rect":
        lx, ly = mesh.extents["lx"], mesh.extents["ly"]
        scale = (lx / 2.0) ** 2 * (ly / 2.0) ** 2
        x, y = mesh.bulk_nodes[:, 0], mesh.bulk_nodes[:, 1]
        lap = -2.0 * (y * (ly - y) + x * (lx - x)) / scale
    else:
        raise ValueError(f"unsupported mesh kind {mesh.kind!r}")
    grad_sq = np.sum(eta.gradient**2, axis=1)
    out = np.full(mesh.n_nodes, np.inf)
    nz = grad_sq > 0
    out[nz] = 2.0 * np.abs(lap[nz]) / grad_sq[nz]
    return out


def _cell_gradient_ops(mesh: BulkSurfaceMesh):
    """Sparse cell-gradient operators and the volume-weighted scatter to nodes."""
    cells = mesh.bulk_cells
    ncells = cells.shape[0]
    n = mesh.n_nodes
    if mesh.dim == 1:
        x = mesh.bulk_nodes[:, 0]
        hc = x[cells[:, 1]] - x[cells[:, 0]]
        rows = np.repeat(np.arange(ncells), 2)
        cols = cells.ravel()
        vals = np.column_stack([-1.0 / hc, 1.0 / hc]).ravel()
        grads = [sp.csr_matrix((vals, (rows, cols)), shape=(ncells, n))]
        vol = hc
    else:
        pts = mesh.bulk_nodes
        a, b, c = pts[cells[:, 0]], pts[cells[:, 1]], pts[cells[:, 2]]
        area2 = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (
            b[:, 1] - a[:, 1]
        ) * (c[:, 0] - a[:, 0])
        gx = np.column_stack(
            [b[:, 1] - c[:, 1], c[:, 1] - a[:, 1], a[:, 1] - b[:, 1]]
        ) / area2[:, None]
        gy = np.column_stack(
            [c[:, 0] - b[:, 0], a[:, 0] - c[:, 0], b[:, 0] - a[:, 0]]
        ) / area2[:, None]
        rows = np.repeat(np.arange(ncells), 3)
        cols = cells.ravel()
        grads = [
            sp.csr_matrix((gx.ravel(), (rows, cols)), shape=(ncells, n)),
            sp.csr_matrix((gy.ravel(), (rows, cols)), shape=(ncells, n)),
        ]
        vol = 0.5 * area2
    nodes_per_cell = mesh.dim + 1
    rows = cells.ravel()
    cols = np.repeat(np.arange(ncells), nodes_per_cell)
    vals = np.repeat(vol / nodes_per_cell, nodes_per_cell)
    scatter = sp.csr_matrix((vals, (rows, cols)), shape=(n, ncells))
    return grads, scatter


def _nodal_grad_sq(sys: DiscreteSystem, states: np.ndarray) -> np.ndarray:
    """Volume-weighted nodal recovery of |grad phi|^2 from cellwise gradients.

    states has shape (n_times, n_nodes); the result matches it.
    """
    grads, scatter = _cell_gradient_ops(sys.mesh)
    cell_sq = np.zeros((states.shape[0], scatter.shape[1]))
    for G in grads:
        cell_sq += (G @ states.T).T ** 2
    return (scatter @ cell_sq.T).T / sys.m_bulk[None, :]
