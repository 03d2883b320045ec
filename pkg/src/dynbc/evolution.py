"""Time integration of the forward and backward (adjoint) systems.

The forward system is stepped with the theta-scheme

    (M + theta dt K) U^{n+1} = (M - (1 - theta) dt K) U^n + dt B g_hat^n,

with theta = 0.5 (Crank-Nicolson) or 1 (implicit Euler) and the linear
solves done by a sparse factorization computed once.  Since M and K are
symmetric, the one-step propagator S = (M + theta dt K)^{-1} (M - (1-theta)
dt K) is self-adjoint in the M inner product, so the backward solve is the
same recursion run on the reversed time index and is the exact transpose of
the forward step.  The resulting discrete duality identity

    <U^N, Phi^N>_M - <U^0, Phi^0>_M = sum_n dt g_hat^n . B^T Psi^n,
    Psi^n = theta Phi^n + (1 - theta) Phi^{n+1},

holds to roundoff.

Boundary signals may be sampled at the time nodes (nt + 1 rows; the scheme
uses the theta-average of the endpoint samples of each step) or directly at
the per-step theta-levels (nt rows; used as given).  The second layout is
what the control synthesis produces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .assembly import DiscreteSystem, inner_X2, norm_X2

__all__ = [
    "Trajectory",
    "BoundarySignal",
    "FluxPair",
    "solve_forward",
    "solve_backward",
    "duality_residual",
    "duhamel_final",
    "recover_normal_flux",
    "trajectory_to_csv",
    "trajectory_norms",
]

_VALID_THETAS = (0.5, 1.0)
_DENSE_DIM_LIMIT = 200


@dataclass
class Trajectory:
    """States at the uniform time nodes 0 = t_0 < ... < t_N = T."""

    times: np.ndarray
    states: np.ndarray  # (N + 1, ndof)
    theta: float
    dt: float

    @property
    def nt(self) -> int:
        return self.times.shape[0] - 1

    def theta_level(self, n: int) -> np.ndarray:
        """Adjoint-consistent sample on step n: theta U^n + (1-theta) U^{n+1}."""
        return self.theta * self.states[n] + (1.0 - self.theta) * self.states[n + 1]


@dataclass
class BoundarySignal:
    """Per-time, per-boundary-node samples of a boundary source.

    ``values`` has shape (nt + 1, n_boundary) for node samples or
    (nt, n_boundary) for per-step theta-level samples.
    """

    values: np.ndarray

    @property
    def n_times(self) -> int:
        return self.values.shape[0]


@dataclass
class FluxPair:
    """Two recoveries of the weighted normal flux along a trajectory."""

    variational: np.ndarray  # (N + 1, n_boundary)
    equation: np.ndarray  # (N + 1, n_boundary)
    rel_discrepancy: float


def _check_theta(theta: float) -> float:
    if theta not in _VALID_THETAS:
        raise ValueError(f"theta must be one of {_VALID_THETAS}, got {theta}")
    return float(theta)


def _step_matrices(sys: DiscreteSystem, dt: float, theta: float):
    A = (sys.M + theta * dt * sys.K).tocsc()
    C = (sys.M - (1.0 - theta) * dt * sys.K).tocsr()
    return spla.splu(A), C


def _step_sources(
    sys: DiscreteSystem, g, nt: int, theta: float
) -> np.ndarray | None:
    """Resolve a boundary signal to per-step samples g_hat^n, shape (nt, nb)."""
    if g is None:
        return None
    vals = g.values if isinstance(g, BoundarySignal) else np.asarray(g, dtype=float)
    if vals.ndim != 2 or vals.shape[1] != sys.n_boundary:
        raise ValueError(
            f"boundary signal must have {sys.n_boundary} columns, "
            f"got shape {vals.shape}"
        )
    if vals.shape[0] == nt + 1:
        return (1.0 - theta) * vals[:-1] + theta * vals[1:]
    if vals.shape[0] == nt:
        return vals.copy()
    raise ValueError(
        f"boundary signal must have nt={nt} or nt+1={nt + 1} rows, "
        f"got {vals.shape[0]}"
    )


def solve_forward(
    sys: DiscreteSystem,
    U0: np.ndarray,
    g,
    T: float,
    nt: int,
    theta: float = 0.5,
) -> Trajectory:
    """Integrate the controlled system from U0 over [0, T] in nt uniform steps."""
    theta = _check_theta(theta)
    if nt < 1:
        raise ValueError(f"need nt >= 1 steps, got {nt}")
    if not T > 0:
        raise ValueError(f"need T > 0, got {T}")
    U0 = np.asarray(U0, dtype=float)
    if U0.shape != (sys.ndof,):
        raise ValueError(f"U0 must have shape ({sys.ndof},), got {U0.shape}")
    dt = T / nt
    lu, C = _step_matrices(sys, dt, theta)
    ghat = _step_sources(sys, g, nt, theta)

    states = np.empty((nt + 1, sys.ndof))
    states[0] = U0
    for n in range(nt):
        rhs = C @ states[n]
        if ghat is not None:
            rhs = rhs + dt * (sys.B @ ghat[n])
        states[n + 1] = lu.solve(rhs)
    times = np.linspace(0.0, T, nt + 1)
    return Trajectory(times=times, states=states, theta=theta, dt=dt)


def solve_backward(
    sys: DiscreteSystem,
    PhiT: np.ndarray,
    T: float,
    nt: int,
    theta: float = 0.5,
) -> Trajectory:
    """Integrate the adjoint system backward from final data PhiT.

    Returns the trajectory stored forward-indexed: states[n] is the adjoint
    state at t_n, states[-1] = PhiT.  The step is the transpose of the
    forward step, so the duality identity holds exactly.
    """
    theta = _check_theta(theta)
    if nt < 1:
        raise ValueError(f"need nt >= 1 steps, got {nt}")
    if not T > 0:
        raise ValueError(f"need T > 0, got {T}")
    PhiT = np.asarray(PhiT, dtype=float)
    if PhiT.shape != (sys.ndof,):
        raise ValueError(f"PhiT must have shape ({sys.ndof},), got {PhiT.shape}")
    dt = T / nt
    lu, C = _step_matrices(sys, dt, theta)

    states = np.empty((nt + 1, sys.ndof))
    states[nt] = PhiT
    for n in range(nt - 1, -1, -1):
        states[n] = lu.solve(C @ states[n + 1])
    times = np.linspace(0.0, T, nt + 1)
    return Trajectory(times=times, states=states, theta=theta, dt=dt)


def duality_residual(
    sys: DiscreteSystem,
    fwd: Trajectory,
    adj: Trajectory,
    g,
) -> float:
    """Absolute defect of the discrete duality identity.

    Returns |<U^N, Phi^N>_M - <U^0, Phi^0>_M - sum_n dt g_hat^n . B^T Psi^n|
    with Psi^n the theta-level adjoint sample.  For matched discretizations
    this is a roundoff-level quantity.
    """
    if fwd.nt != adj.nt or fwd.theta != adj.theta:
        raise ValueError(
            "forward and adjoint trajectories use different discretizations: "
            f"nt {fwd.nt} vs {adj.nt}, theta {fwd.theta} vs {adj.theta}"
        )
    if not np.array_equal(fwd.times, adj.times):
        raise ValueError("forward and adjoint time grids differ")
    nt, dt = fwd.nt, fwd.dt
    ghat = _step_sources(sys, g, nt, fwd.theta)
    boundary_sum = 0.0
    if ghat is not None:
        for n in range(nt):
            psi = adj.theta_level(n)
            boundary_sum += dt * float(ghat[n] @ (sys.B.T @ psi))
    lhs = inner_X2(sys, fwd.states[-1], adj.states[-1]) - inner_X2(
        sys, fwd.states[0], adj.states[0]
    )
    return abs(lhs - boundary_sum)


def _dense_propagator(sys: DiscreteSystem):
    """Eigendecomposition of the pencil (K, M): K V = M V diag(w), V^T M V = I."""
    Kd = sys.K.toarray()
    Md = sys.M.toarray()
    w, V = sla.eigh(Kd, Md)
    return w, V


def duhamel_final(
    sys: DiscreteSystem,
    U0: np.ndarray,
    g,
    T: float,
    nt: int,
) -> np.ndarray:
    """Dense variation-of-constants evaluation of the state at time T.

    Computes exp(T A) U0 + integral of exp((T-s) A) M^{-1} B g(s) ds with
    A = -M^{-1} K, using the exact dense propagator (via the generalized
    eigendecomposition of (K, M)) and the midpoint rule with nt panels for
    the source integral.  Intended as an oracle on small systems.

    ``g`` may be None, a callable t -> (n_boundary,) array, or a
    BoundarySignal sampled at uniform time nodes on [0, T] (interpolated
    linearly in time at the midpoints).
    """
    if sys.ndof > _DENSE_DIM_LIMIT:
        raise ValueError(
            f"dense oracle limited to {_DENSE_DIM_LIMIT} dofs, got {sys.ndof}"
        )
    U0 = np.asarray(U0, dtype=float)
    if T < 0:
        raise ValueError(f"need T >= 0, got {T}")
    if T == 0:
        return U0.copy()
    w, V = _dense_propagator(sys)

    def propagate(tau: float, vec: np.ndarray) -> np.ndarray:
        # exp(tau A) vec = V exp(-tau w) V^T M vec
        return V @ (np.exp(-tau * w) * (V.T @ (sys.M_diag * vec)))

    out = propagate(T, U0)
    if g is None:
        return out

    if callable(g):
        sample = g
    else:
        vals = g.values if isinstance(g, BoundarySignal) else np.asarray(g)
        tnodes = np.linspace(0.0, T, vals.shape[0])

        def sample(t: float) -> np.ndarray:
            out = np.empty(vals.shape[1])
            for j in range(vals.shape[1]):
                out[j] = np.interp(t, tnodes, vals[:, j])
            return out

    dt = T / nt
    for k in range(nt):
        s = (k + 0.5) * dt
        src = sys.B @ np.asarray(sample(s), dtype=float)
        out += dt * propagate(T - s, src / sys.M_diag)
    return out


def recover_normal_flux(sys: DiscreteSystem, traj: Trajectory) -> FluxPair:
    """Two recoveries of gamma times the normal derivative on the boundary.

    variational: boundary rows of (gamma K_bulk Phi - M_bulk dPhi/dt) divided
        by the surface lumped mass (the weak flux of the interior equation
        phi_t + gamma Laplacian phi = 0).
    equation: dPhi_Gamma/dt + delta Laplace-Beltrami(Phi_Gamma)
        - beta Phi_Gamma, i.e. the flux the boundary equation implies.

    Time derivatives are centered differences (one-sided at the ends), so at
    least three time levels are required.  The relative discrepancy is the
    space-time L2 distance between the two, normalized by the equation
    recovery.
    """
    if traj.times.shape[0] < 3:
        raise ValueError("flux recovery needs at least 3 time levels")
    states = traj.states
    dt = traj.dt
    nT = states.shape[0]
    bnodes = sys.boundary_nodes

    dstates = np.empty_like(states)
    dstates[1:-1] = (states[2:] - states[:-2]) / (2.0 * dt)
    dstates[0] = (states[1] - states[0]) / dt
    dstates[-1] = (states[-1] - states[-2]) / dt

    var = np.empty((nT, bnodes.size))
    eqn = np.empty((nT, bnodes.size))
    for n in range(nT):
        resid = sys.gamma * (sys.K_bulk @ states[n]) - sys.m_bulk * dstates[n]
        var[n] = resid[bnodes] / sys.m_surf
        phi_g = states[n][bnodes]
        lb = -(sys.K_surf @ states[n])[bnodes] / sys.m_surf
        eqn[n] = dstates[n][bnodes] + sys.delta * lb - sys.beta * phi_g

    w = sys.m_surf
    diff = np.sqrt(np.sum((var - eqn) ** 2 * w) * dt)
    base = np.sqrt(np.sum(eqn**2 * w) * dt)
    rel = diff / base if base > 0 else 0.0
    return FluxPair(variational=var, equation=eqn, rel_discrepancy=float(rel))


def trajectory_norms(sys: DiscreteSystem, traj: Trajectory) -> np.ndarray:
    """M-norm of the state at each time node."""
    return np.array([norm_X2(sys, s) for s in traj.states])


def trajectory_to_csv(traj: Trajectory, path, header_lines: list[str] | None = None) -> None:
    """Write a trajectory as CSV with columns t, node_id, value."""
    with open(path, "w") as fh:
        for line in header_lines or []:
            fh.write(f"# {line}\n")
        fh.write("t,node_id,value\n")
        for t, state in zip(traj.times, traj.states):
            for i, v in enumerate(state):
                fh.write(f"{t:.17g},{i},{v:.17g}\n")
