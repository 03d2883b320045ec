import numpy as np
import pytest
import scipy.linalg as sla

from dynbc import (
    StatePair,
    assemble,
    build_disk_mesh,
    build_interval_mesh,
    build_rect_mesh,
    estimate_coercivity,
    export_matrix_coo,
    inner_X2,
    norm_X2,
    smallest_eigenpair,
)


def interval_sys(n=2, gamma=1.0, delta=0.0, beta=1.0):
    return assemble(build_interval_mesh(0, 1, n), gamma, delta, beta)


def test_hand_assembled_interval():
    # h = 0.5, endpoint surface masses 1
    s = interval_sys()
    np.testing.assert_allclose(s.M_diag, [1.25, 0.5, 1.25])
    expected_K = np.array(
        [[2.0, -2.0, 0.0], [-2.0, 4.0, -2.0], [0.0, -2.0, 2.0]]
    ) + np.diag([1.0, 0.0, 1.0])
    np.testing.assert_allclose(s.K.toarray(), expected_K)


def test_constants_in_kernel_when_beta_zero():
    for mesh in (build_interval_mesh(0, 1, 7), build_disk_mesh(1, 3, 12)):
        s = assemble(mesh, gamma=1.3, delta=0.7, beta=0.0)
        c = np.full(s.ndof, 3.7)
        np.testing.assert_allclose(s.K @ c, 0.0, atol=1e-12)


def test_disk_surface_stiffness_is_periodic_second_difference():
    mesh = build_disk_mesh(1, 2, 8)
    s = assemble(mesh, gamma=1.0, delta=1.0, beta=0.0)
    nb = mesh.n_boundary
    ell = 2 * np.sin(np.pi / 8)
    expected = (
        2 * np.eye(nb) - np.roll(np.eye(nb), 1, axis=1) - np.roll(np.eye(nb), -1, axis=1)
    ) / ell
    got = s.K_surf.toarray()[np.ix_(mesh.boundary_nodes, mesh.boundary_nodes)]
    np.testing.assert_allclose(got, expected, atol=1e-12)


def test_inner_and_norm():
    s = interval_sys()
    z = np.zeros(3)
    assert inner_X2(s, z, z) == 0.0
    ones = np.ones(3)
    assert inner_X2(s, ones, ones) == pytest.approx(3.0)
    assert norm_X2(s, ones) == pytest.approx(np.sqrt(3.0))


def test_inner_bilinearity():
    s = interval_sys(n=9)
    rng = np.random.default_rng(0)
    U, W, V = (rng.standard_normal(s.ndof) for _ in range(3))
    left = inner_X2(s, U + W, V)
    right = inner_X2(s, U, V) + inner_X2(s, W, V)
    assert abs(left - right) <= 1e-13 * max(abs(left), 1.0)


def test_inner_dimension_mismatch():
    s = interval_sys()
    with pytest.raises(ValueError):
        inner_X2(s, np.ones(4), np.ones(3))


def test_matrices_exactly_symmetric():
    for mesh in (
        build_interval_mesh(0, 1, 9),
        build_rect_mesh(1, 2, 3, 4),
        build_disk_mesh(1, 3, 12),
    ):
        s = assemble(mesh, gamma=0.8, delta=0.3, beta=1.5)
        assert (abs(s.K - s.K.T)).max() == 0.0
        assert (abs(s.M - s.M.T)).max() == 0.0


def test_generator_self_adjoint_in_M():
    s = interval_sys(n=16)
    rng = np.random.default_rng(1)
    for _ in range(10):
        U = rng.standard_normal(s.ndof)
        V = rng.standard_normal(s.ndof)
        AU = -(s.K @ U) / s.M_diag
        AV = -(s.K @ V) / s.M_diag
        a = inner_X2(s, AU, V)
        b = inner_X2(s, U, AV)
        assert abs(a - b) <= 1e-12 * max(abs(a), abs(b), 1.0)


def test_generalized_eigenvalues_nonnegative_and_coercive():
    s = assemble(build_rect_mesh(1, 1, 3, 3), gamma=1.0, delta=0.2, beta=1.0)
    w = sla.eigh(s.K.toarray(), s.M.toarray(), eigvals_only=True)
    assert w.min() >= -1e-12
    assert w.min() > 0  # beta >= 1 > 0


def test_spd_mass():
    s = interval_sys(n=5)
    assert np.all(s.M_diag > 0)


def test_coercivity_against_dense_eigensolve():
    s = interval_sys()
    c = estimate_coercivity(s)
    w = sla.eigh(s.K.toarray(), s.M.toarray(), eigvals_only=True)
    assert c == pytest.approx(w[0], rel=1e-8)


def test_coercivity_monotone_in_beta():
    c1 = estimate_coercivity(interval_sys(n=8, beta=1.0))
    c2 = estimate_coercivity(interval_sys(n=8, beta=2.0))
    assert c2 >= c1 > 0


def test_coercivity_requires_positive_beta():
    s = interval_sys(beta=0.0)
    with pytest.raises(ValueError):
        estimate_coercivity(s)


def test_smallest_eigenpair_residual():
    s = interval_sys(n=12)
    c, x = smallest_eigenpair(s)
    resid = s.K @ x - c * (s.M_diag * x)
    assert np.linalg.norm(resid) <= 1e-5 * max(1.0, c)
    assert norm_X2(s, x) == pytest.approx(1.0)


def test_injection_rows_only_at_boundary():
    mesh = build_rect_mesh(1, 1, 3, 3)
    s = assemble(mesh, gamma=1.0, delta=0.0, beta=1.0)
    row_mass = np.asarray(abs(s.B).sum(axis=1)).ravel()
    nonzero = np.flatnonzero(row_mass)
    assert set(nonzero.tolist()) == set(mesh.boundary_nodes.tolist())


def test_assemble_rejects_bad_coefficients():
    mesh = build_interval_mesh(0, 1, 4)
    with pytest.raises(ValueError):
        assemble(mesh, gamma=0.0, delta=0.0, beta=1.0)
    with pytest.raises(ValueError):
        assemble(mesh, gamma=1.0, delta=-0.1, beta=1.0)
    with pytest.raises(ValueError):
        assemble(mesh, gamma=1.0, delta=0.0, beta=np.array([1.0, -1.0]))


def test_beta_from_callable():
    mesh = build_interval_mesh(0, 1, 4)
    s = assemble(mesh, gamma=1.0, delta=0.0, beta=lambda x: 1.0 + x[:, 0])
    np.testing.assert_allclose(sorted(s.beta), [1.0, 2.0])
    assert s.beta0 == 1.0


def test_state_pair_round_trip_and_coupling():
    mesh = build_interval_mesh(0, 1, 4)
    bulk = np.arange(5.0)
    surface = np.array([10.0, 20.0])
    pair = StatePair(bulk=bulk, surface=surface)
    vec = pair.to_vector(mesh)
    # boundary entries overwritten by the surface datum
    np.testing.assert_allclose(vec[mesh.boundary_nodes], surface)
    np.testing.assert_allclose(vec[1:4], bulk[1:4])
    back = StatePair.from_vector(mesh, vec)
    assert back.is_trace_coupled(mesh)
    with pytest.raises(ValueError):
        StatePair(bulk=np.ones(3), surface=surface).to_vector(mesh)


def test_export_coordinate_format(tmp_path):
    s = interval_sys()
    path = tmp_path / "K.txt"
    export_matrix_coo(s.K, path)
    triples = [line.split() for line in path.read_text().splitlines()]
    dense = np.zeros((3, 3))
    for r, c, v in triples:
        dense[int(r), int(c)] = float(v)
    np.testing.assert_allclose(dense, s.K.toarray())
