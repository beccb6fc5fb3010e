import numpy as np
import pytest

from piezo_lab import BeamParameters, assemble, build_mesh, generator, project_initial_data
from piezo_lab.spectral import spectrum
from piezo_lab.timestepper import run, run_conservative
from piezo_lab.verification import (Forcing, OracleError, TailGuardError, characteristic_function,
                                    characteristic_roots_oracle, decay_fit, identity_constant,
                                    multiplier_check, multiplier_constant, random_forcing,
                                    resolvent_identity_check, resolvent_solve, static_solve)

from conftest import make_system

# --- multiplier -----------------------------------------------------------


def test_multiplier_constant_value():
    p = BeamParameters(rho=2.0, gamma=1.0, alpha1=1.0, mu=0.5, beta=4.0)
    # max{2, 3, 0.5, 0.5} = 3 and ||q|| = 2 on [0, 1] for q = 2x
    assert multiplier_constant(p, (2.0, 0.0), (0.0, 1.0)) == pytest.approx(12.0)


def test_multiplier_zero_trajectory():
    s = make_system(20)
    r = multiplier_check(run(s, np.zeros(80), n_steps=50))
    assert r.lhs == 0 and r.bound == 0 and r.satisfied


@pytest.mark.parametrize("damped", [True, False])
def test_multiplier_default_params(damped):
    s = make_system(50)
    s = s if damped else s.conservative()
    tr = run(s, project_initial_data("static_displacement", s), t_end=10.0)
    r = multiplier_check(tr)
    assert r.satisfied and r.lhs < r.bound
    assert r.T >= 10.0


def test_multiplier_subinterval_and_affine_q():
    s = make_system(20)
    tr = run(s, project_initial_data("gaussian_velocity", s), t_end=2.0)
    r = multiplier_check(tr, q_spec=(2.0, -0.5), interval=(0.25, 0.75))
    assert r.satisfied
    assert r.interval == (0.25, 0.75)


def test_multiplier_rejects_bad_inputs():
    s = make_system(20)
    x0 = project_initial_data("gaussian_velocity", s)
    with pytest.raises(ValueError, match="coarse"):
        multiplier_check(run(s, x0, n_steps=20, record_every=2))
    tr = run(s, x0, n_steps=20)
    with pytest.raises(ValueError):
        multiplier_check(tr, interval=(0.0, 0.33))
    with pytest.raises(ValueError):
        multiplier_check(tr, interval=(0.5, 0.25))


# --- resolvent identity ---------------------------------------------------


def test_forcing_validation():
    z = np.zeros(5)
    with pytest.raises(ValueError):
        Forcing(np.ones(5), z, z, z)
    with pytest.raises(ValueError):
        Forcing(z, z[:-1], z, z)
    f = Forcing.zeros(4)
    assert f.n == 4 and f.norm(BeamParameters(), 0.25) == 0


def test_identity_zero_forcing():
    s = make_system(20)
    r = resolvent_identity_check(s, 5.0, Forcing.zeros(20))
    assert r.residual == 0 and r.N2 == 0 and r.I_V == 0 and r.I_P == 0
    assert r.bound_holds and r.dissipation_holds


def test_resolvent_solve_satisfies_equation(rng):
    s = make_system(20)
    g = generator(s)
    F = random_forcing(s.mesh, rng)
    U = resolvent_solve(s, 3.0, F)
    Fv = F.vector(s)
    assert g.norm(3j * U - g.A @ U - Fv) <= 1e-10 * g.norm(Fv)


@pytest.mark.parametrize("seed", range(3))
def test_identity_refinement(seed):
    res = []
    for n in (50, 100, 200):
        s = make_system(n)
        r = resolvent_identity_check(generator(s), 5.0, random_forcing(s.mesh, np.random.default_rng(seed)))
        assert r.bound_holds and r.dissipation_holds
        res.append(r.residual)
    assert res[0] > res[1] > res[2]
    assert res[0] / res[2] > 3.0  # first order or better


def test_identity_constant_value():
    p = BeamParameters(rho=4.0, alpha1=1.0, mu=9.0, beta=1.0, gamma=0.0, L=0.5)
    assert identity_constant(p) == pytest.approx(4 * 0.5 * (2 + 3))


# --- static problem -------------------------------------------------------


def test_static_zero():
    s = make_system(20)
    r = static_solve(s, Forcing.zeros(20))
    assert np.all(r.state == 0) and r.residual == 0


def test_static_requires_one_input():
    s = make_system(4)
    with pytest.raises(ValueError):
        static_solve(s)
    with pytest.raises(ValueError):
        static_solve(s, Forcing.zeros(4), F=np.zeros(16))


@pytest.mark.parametrize("n", [4, 17, 64])
def test_static_closed_form(n):
    p = BeamParameters(gamma=0.0, rho=2.0, alpha1=3.0, L=1.5)
    s = assemble(build_mesh(n, p.L), p)
    c = 0.7
    x = s.mesh.nodes
    z = np.zeros_like(x)
    r = static_solve(s, Forcing(z, c + z, z, z))
    V = r.state[:n]
    exact = (p.rho * c / p.alpha1) * (x[1:] ** 2 / 2 - p.L * x[1:])
    np.testing.assert_allclose(V, exact, atol=1e-10 * np.max(np.abs(exact)))
    assert np.all(r.state[n:2 * n] == 0)


def test_static_state_vector_input(rng):
    s = make_system(30)
    g = generator(s)
    F = rng.standard_normal(120)
    r = static_solve(s, F=F)
    assert g.norm(g.A @ r.state - F) <= 1e-8 * g.norm(F)
    assert r.residual <= 1e-10


def test_static_ratio_stable():
    ratios = []
    for n in (25, 50, 100):
        s = make_system(n)
        r = static_solve(s, random_forcing(s.mesh, np.random.default_rng(1)))
        ratios.append(r.ratio)
        assert r.residual <= 1e-10
    assert (max(ratios) - min(ratios)) / max(ratios) <= 0.1


# --- characteristic-root oracle -------------------------------------------


def test_oracle_conservative_no_mass():
    p = BeamParameters(gamma=0.0, xi1=0.0, m1=0.0, rho=4.0, alpha1=1.0, L=2.0)
    roots = characteristic_roots_oracle(p, "V", 4)
    c = 0.5
    np.testing.assert_allclose(roots, 1j * (np.arange(4) + 0.5) * np.pi * c / 2.0, atol=1e-13)


def test_oracle_tip_mass_first_root():
    p = BeamParameters(gamma=0.0, xi1=0.0)
    w = characteristic_roots_oracle(p, "V", 1)[0].imag
    assert w == pytest.approx(0.8603335890193798, abs=1e-12)
    assert abs(np.tan(w) - 1 / w) <= 1e-12


def test_oracle_roots_are_zeros():
    p = BeamParameters(gamma=0.0, xi2=2.5, m2=0.3, mu=2.0, beta=0.5)
    args = (p.mu, p.beta, p.xi2, p.m2, p.L)
    for lam in characteristic_roots_oracle(p, "P", 8):
        assert abs(characteristic_function(lam, *args)) <= 1e-9 * abs(np.cosh(lam * 2.0))


def test_oracle_high_mode_asymptotics():
    p = BeamParameters(gamma=0.0)
    roots = characteristic_roots_oracle(p, "V", 60)
    for k in (40, 50, 59):
        approx = -p.xi1 / (p.m1 ** 2 * np.pi ** 2 * k ** 2)
        assert roots[k].real == pytest.approx(approx, rel=0.05)


def test_oracle_no_mass_damped():
    p = BeamParameters(gamma=0.0, xi1=0.5, m1=0.0)
    roots = characteristic_roots_oracle(p, "V", 5)
    np.testing.assert_allclose(roots.real, -0.5 * np.log(3), atol=1e-13)


def test_oracle_conjugates_and_errors():
    p = BeamParameters(gamma=0.0)
    r = characteristic_roots_oracle(p, "V", 6, conjugates=True)
    assert len(r) == 6
    np.testing.assert_allclose(np.sort_complex(r), np.sort_complex(r.conj()))
    with pytest.raises(ValueError):
        characteristic_roots_oracle(BeamParameters(), "V")
    with pytest.raises(ValueError):
        characteristic_roots_oracle(p, "X")
    with pytest.raises(OracleError):
        characteristic_roots_oracle(BeamParameters(gamma=0.0, m1=0.0, xi1=1.0), "V")


def test_oracle_matches_fem():
    p = BeamParameters(gamma=0.0)
    ev = spectrum(generator(assemble(build_mesh(200), p)), band=None).upper()[:6]
    roots = np.sort_complex(np.concatenate([characteristic_roots_oracle(p, f, 3) for f in "VP"]))
    for z in ev:
        assert np.min(np.abs(roots - z)) / abs(z) <= 1e-3


# --- decay fit ------------------------------------------------------------


def test_decay_fit_power_law():
    t = np.linspace(0, 400, 40001)
    E = 1.0 / np.maximum(t, 1.0)
    fit = decay_fit((t, E), (10, 200))
    assert fit.exponent == pytest.approx(-1.0, abs=1e-12)
    assert fit.tE_ratio == pytest.approx(1.0, abs=1e-12)
    assert not fit.exponential_like


def test_decay_fit_exponential_flagged():
    t = np.linspace(0, 60, 6001)
    E = np.exp(-t)
    fit = decay_fit((t, E), (20, 50))
    assert fit.exponent < -10
    assert fit.exponential_like
    with pytest.raises(TailGuardError):
        decay_fit((t, E), (20, 50), abscissa=-1.0)


def test_decay_fit_errors():
    t = np.linspace(0, 10, 101)
    E = np.ones_like(t)
    with pytest.raises(ValueError):
        decay_fit((t, E), (5, 20))
    with pytest.raises(ValueError):
        decay_fit((t, E), (5, 1))
    with pytest.raises(ValueError):
        decay_fit((t, -E), (2, 8))


def test_decay_fit_trajectory_small():
    s = make_system(40)
    tr = run(s, project_initial_data("mode_mix", s), t_end=30, record_every=10)
    fit = decay_fit(tr, (5, 30))
    assert fit.exponent < 0
    assert fit.samples <= 200
