import numpy as np
import pytest

from piezo_lab import (BeamParameters, ContinuousState, assemble, assemble_scalar, boundary_traces,
                       build_mesh, energy, generator, project_initial_data, state_energy)
from piezo_lab.discretization import cutoff_frequency, energy_table, to_continuous

from conftest import make_generator, make_system

PARAM_SETS = [
    {},
    {"gamma": 0.0},
    {"xi1": 0.0, "xi2": 0.0},
    {"m1": 0.0, "m2": 0.0, "xi1": 0.3},
    {"rho": 2.0, "mu": 0.5, "alpha1": 3.0, "beta": 0.7, "gamma": 1.7, "xi1": 0.2, "xi2": 4.0,
     "m1": 0.1, "m2": 5.0, "L": 2.5},
]


def test_build_mesh_examples():
    m = build_mesh(2, 1.0)
    np.testing.assert_allclose(m.nodes, [0, 0.5, 1])
    assert m.h == 0.5
    assert build_mesh(4, 2.0).h == 0.5
    with pytest.raises(ValueError):
        build_mesh(1, 1.0)
    with pytest.raises(ValueError):
        build_mesh(4, 0.0)


def test_element_matrices_n2():
    s = make_system(2)
    np.testing.assert_allclose(s.K1, [[4, -2], [-2, 2]], atol=1e-15)
    np.testing.assert_allclose(s.M1, [[1 / 3, 1 / 12], [1 / 12, 1 / 6]], atol=1e-15)


def test_gamma_zero_decouples_stiffness():
    s = make_system(6, gamma=0.0)
    n = 6
    assert np.all(s.K[:n, n:] == 0) and np.all(s.K[n:, :n] == 0)


def test_tip_mass_placement():
    a = make_system(5, m1=0.0)
    b = make_system(5, m1=5.0)
    diff = b.M - a.M
    assert diff[4, 4] == 5.0
    diff[4, 4] = 0.0
    assert np.all(diff == 0)


def test_damping_structure():
    s = make_system(5, xi1=2.0, xi2=3.0)
    assert np.count_nonzero(s.D) == 2
    assert s.D[4, 4] == 2.0 and s.D[9, 9] == 3.0


@pytest.mark.parametrize("changes", PARAM_SETS)
@pytest.mark.parametrize("n", [2, 7, 30])
def test_matrix_invariants(changes, n):
    s = make_system(n, **changes)
    for A in (s.M, s.K):
        assert np.max(np.abs(A - A.T)) <= 1e-14 * np.max(np.abs(A))
        assert np.linalg.eigvalsh(A).min() > 0
    assert np.all(s.D == np.diag(np.diag(s.D)))
    assert np.all(np.diag(s.D) >= 0)


def test_block_structure(p0):
    p = BeamParameters(gamma=0.6, beta=2.0, alpha1=1.5, rho=3.0, mu=0.4)
    s = assemble(build_mesh(4), p)
    n = 4
    np.testing.assert_allclose(s.K[:n, :n], p.alpha * s.K1)
    np.testing.assert_allclose(s.K[:n, n:], -p.gamma * p.beta * s.K1)
    np.testing.assert_allclose(s.K[n:, n:], p.beta * s.K1)
    M = s.M.copy()
    M[n - 1, n - 1] -= p.m1
    M[2 * n - 1, 2 * n - 1] -= p.m2
    np.testing.assert_allclose(M[:n, :n], p.rho * s.M1)
    np.testing.assert_allclose(M[n:, n:], p.mu * s.M1)


def test_generator_shape_and_form():
    g = make_generator(10)
    assert g.A.shape == (40, 40)
    s = g.system
    N = s.n_dofs
    np.testing.assert_allclose(g.A[:N, N:], np.eye(N))
    np.testing.assert_allclose(s.M @ g.A[N:, :N], -s.K, atol=1e-10)


@pytest.mark.parametrize("changes", PARAM_SETS)
def test_dissipativity_identity(changes, rng):
    g = make_generator(12, **changes)
    for _ in range(100):
        x = rng.standard_normal(g.A.shape[0])
        lhs, rhs = g.dissipativity(x)
        assert abs(lhs - rhs) <= 1e-12 * g.norm(x) ** 2


def test_conservative_generator_is_skew(rng):
    g = make_generator(12, xi1=0.0, xi2=0.0)
    for _ in range(20):
        x = rng.standard_normal(g.A.shape[0])
        assert abs(g.inner(g.A @ x, x).real) <= 1e-12 * g.norm(x) ** 2


def test_unit_params_dissipation_value(rng):
    g = make_generator(9)
    x = rng.standard_normal(g.A.shape[0])
    _, v = g.system.split(x)
    lhs, _ = g.dissipativity(x)
    assert lhs == pytest.approx(-(v[8] ** 2 + v[17] ** 2), rel=1e-12)


def test_transformed_is_similar(rng):
    g = make_generator(8, gamma=0.4, xi1=0.7)
    F = g.weight_factor
    np.testing.assert_allclose(g.transformed @ F, F @ g.A, atol=1e-10)
    x = rng.standard_normal(g.A.shape[0])
    assert np.linalg.norm(F @ x) == pytest.approx(g.norm(x), rel=1e-12)


def test_presets():
    s = make_system(8)
    x = project_initial_data("static_displacement", s)
    q, v = s.split(x)
    assert np.all(v == 0) and np.all(q[8:] == 0) and np.any(q[:8] != 0)
    np.testing.assert_allclose(q[:8], s.mesh.nodes[1:] / s.mesh.L)
    x = project_initial_data("gaussian_velocity", s)
    _, v = s.split(x)
    _, _, u, eta = boundary_traces(x, s)
    assert u == pytest.approx(np.exp(-50 * 0.25))
    assert eta == 0
    x = project_initial_data("mode_mix", s)
    assert np.all(np.isfinite(x)) and np.any(x != 0)
    with pytest.raises(ValueError):
        project_initial_data("nope", s)


def test_explicit_data_clamp_violation():
    s = make_system(4)
    x = s.mesh.nodes
    z = np.zeros_like(x)
    with pytest.raises(ValueError):
        project_initial_data(ContinuousState(x + 1, z, z, z), s)
    with pytest.raises(ValueError):
        project_initial_data(ContinuousState(np.zeros(3), np.zeros(3), np.zeros(3), np.zeros(3)), s)


def test_mode_mix_bounded_under_refinement():
    """D(A)-type data: ||x||_W and ||A x||_W stay bounded as the mesh is refined."""
    vals = []
    for n in (25, 50, 100):
        g = generator(make_system(n))
        x = project_initial_data("mode_mix", g.system)
        vals.append((g.norm(x), g.norm(g.A @ x)))
    vals = np.array(vals)
    assert np.all(vals[:, 1] < 10)
    assert np.ptp(vals[:, 0]) / vals[:, 0].max() < 0.05


def test_boundary_traces_examples():
    s = make_system(2)
    x = np.zeros(8)
    assert boundary_traces(x, s) == (0, 0, 0, 0)
    x[:2] = [0.5, 1.0]  # V = x
    assert boundary_traces(x, s)[0] == pytest.approx(1.0)
    x[:2] = [0.25, 1.0]
    assert boundary_traces(x, s)[0] == pytest.approx(1.5)


def test_state_energy_matches_weight_and_continuous(rng):
    s = make_system(9, gamma=0.8, m1=2.0, m2=0.5)
    g = generator(s)
    x = rng.standard_normal(4 * 9)
    e = state_energy(x, s)
    assert e.total == pytest.approx(0.5 * g.norm(x) ** 2, rel=1e-12)
    assert e.total == pytest.approx(s.energy(x), rel=1e-12)
    ec = energy(to_continuous(x, s), s.params)
    np.testing.assert_allclose(list(ec.as_dict().values()), list(e.as_dict().values()), rtol=1e-12)
    np.testing.assert_allclose(energy_table(x[None, :], s)[0], list(e.as_dict().values())[:6], rtol=1e-12)


def test_energy_refinement_second_order():
    """W-energy of interpolated smooth fields converges at second order."""
    p = BeamParameters(gamma=0.5)
    k = np.pi / 2

    def exact():
        # V = sin(kx), P = x^2, Phi = cos(x) - 1 + x, Theta = x, L = 1
        from scipy.integrate import quad
        f = lambda x: (p.rho * (np.cos(x) - 1 + x) ** 2 + p.mu * x ** 2
                       + p.alpha1 * (k * np.cos(k * x)) ** 2
                       + p.beta * (p.gamma * k * np.cos(k * x) - 2 * x) ** 2)
        return 0.5 * quad(f, 0, 1, epsabs=1e-14)[0] + 0.5 * p.m1 * np.cos(1.0) ** 2 + 0.5 * p.m2

    errs = []
    for n in (10, 20, 40, 80):
        s = assemble(build_mesh(n), p)
        x = s.mesh.nodes
        cs = ContinuousState(np.sin(k * x), np.cos(x) - 1 + x, x ** 2, x)
        e = state_energy(project_initial_data(cs, s), s).total
        errs.append(abs(e - exact()))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.8)


def test_cutoff_frequency(p0):
    m = build_mesh(100)
    assert cutoff_frequency(m, p0) == pytest.approx(0.5 * np.pi * 100 * p0.wave_speeds()[0])


def test_assemble_scalar():
    s = assemble_scalar(build_mesh(4), 2.0, 3.0, 0.5, 1.5)
    assert s.fields == ("V",)
    assert s.D[3, 3] == 0.5
    assert s.M[3, 3] == pytest.approx(2.0 * s.M1[3, 3] + 1.5)
    with pytest.raises(ValueError):
        assemble_scalar(build_mesh(4), 0.0, 1.0)


def test_mesh_length_mismatch():
    with pytest.raises(ValueError):
        assemble(build_mesh(4, 2.0), BeamParameters())
