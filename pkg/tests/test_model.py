import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from piezo_lab import (BeamParameters, ContinuousState, ParameterError, dissipation_rate,
                       effective_stiffness, energy, validate)
from piezo_lab.model import check, stress_identity_gap

finite = st.floats(-1e3, 1e3, allow_nan=False)


@pytest.mark.parametrize("alpha1,gamma,beta,expected", [(1, 1, 1, 2), (3, 0, 7, 3), (2, 2, 0.5, 4)])
def test_effective_stiffness_examples(alpha1, gamma, beta, expected):
    p = BeamParameters(alpha1=alpha1, gamma=gamma, beta=beta)
    assert effective_stiffness(p) == expected
    assert p.alpha == expected


def test_material_matrix_positive_definite():
    for gamma in (0.0, 0.5, 3.0):
        p = BeamParameters(gamma=gamma, alpha1=0.2, beta=5.0)
        assert np.all(np.linalg.eigvalsh(p.material_matrix()) > 0)


def test_validate_ok_and_errors():
    assert validate(BeamParameters()).ok
    r = validate(BeamParameters(rho=0))
    assert "rho must be > 0" in r.errors
    r = validate(BeamParameters(m1=-1))
    assert "m1 must be ≥ 0" in r.errors


def test_validate_reports_every_violation():
    r = validate(BeamParameters(rho=0, mu=-1, L=0, xi2=-3, gamma=-0.1))
    names = {e.split()[0] for e in r.errors}
    assert names == {"rho", "mu", "L", "xi2", "gamma"}
    with pytest.raises(ParameterError):
        check(BeamParameters(beta=0))


def test_zero_feedback_mass_coupling_only_warn():
    r = validate(BeamParameters(gamma=0, xi1=0, xi2=0, m1=0, m2=0))
    assert r.ok
    assert len(r.warnings) == 5


def test_validate_non_finite_never_raises():
    r = validate(BeamParameters(rho=float("nan"), mu=float("inf")))
    assert not r.ok and len(r.errors) == 2


@pytest.mark.parametrize("u,eta,xi1,xi2,expected", [(0, 0, 1, 1, 0), (1, 2, 2, 3, -14), (5, -7, 0, 0, 0)])
def test_dissipation_rate_examples(u, eta, xi1, xi2, expected):
    assert dissipation_rate(u, eta, BeamParameters(xi1=xi1, xi2=xi2)) == expected


@given(finite, finite, st.floats(0, 10), st.floats(0, 10))
def test_dissipation_sign_flip_invariant_and_nonpositive(u, eta, xi1, xi2):
    p = BeamParameters(xi1=xi1, xi2=xi2)
    d = dissipation_rate(u, eta, p)
    assert d <= 0
    assert d == dissipation_rate(-u, -eta, p)


def test_energy_zero_state():
    e = energy(ContinuousState.zeros(11), BeamParameters())
    assert e.total == 0
    assert all(v == 0 for v in e.as_dict().values())


@pytest.mark.parametrize("m", [0.0, 1.0, 3.5])
def test_energy_linear_displacement(m):
    x = np.linspace(0, 1, 9)
    z = np.zeros_like(x)
    e = energy(ContinuousState(x, z, z, z), BeamParameters(m1=m, m2=m))
    assert e.elastic == pytest.approx(0.5, abs=1e-14)
    assert e.magnetic_coupling == pytest.approx(0.5, abs=1e-14)
    assert e.total == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("m", [0.0, 2.0])
def test_energy_constant_velocity(m):
    x = np.linspace(0, 1, 6)
    z = np.zeros_like(x)
    p = BeamParameters(rho=2, mu=1, alpha1=1, beta=1, gamma=0, xi1=0, xi2=0, m1=m, m2=0)
    e = energy(ContinuousState(z, np.ones_like(x), z, z), p)
    assert e.total == pytest.approx(1 + m / 2, abs=1e-14)


def test_energy_errors():
    x = np.linspace(0, 1, 5)
    z = np.zeros_like(x)
    with pytest.raises(ValueError):
        energy(ContinuousState(x + 1, z, z, z), BeamParameters())
    with pytest.raises(ValueError):
        energy(ContinuousState(x, z, z, z, u=1.0), BeamParameters())
    with pytest.raises(ValueError):
        energy(ContinuousState(x, z, z, z), BeamParameters(), h=0.3)
    with pytest.raises(ValueError):
        ContinuousState(x, z[:-1], z, z)


@settings(max_examples=50)
@given(st.lists(finite, min_size=4, max_size=4), st.floats(0, 5), st.floats(0.1, 5), st.floats(0.1, 5))
def test_stress_identity(vals, gamma, alpha1, beta):
    vx = vals[0] + 1j * vals[1]
    px = vals[2] + 1j * vals[3]
    p = BeamParameters(gamma=gamma, alpha1=alpha1, beta=beta)
    scale = 1 + p.alpha * abs(vx) ** 2 + p.beta * abs(px) ** 2
    assert abs(stress_identity_gap(vx, px, p)) <= 1e-12 * scale


@settings(max_examples=30)
@given(st.integers(0, 2 ** 32 - 1))
def test_energy_nonnegative_and_definite(seed):
    rng = np.random.default_rng(seed)
    n = 8
    fields = [np.concatenate([[0.0], rng.standard_normal(n)]) for _ in range(4)]
    fields[1][0] = rng.standard_normal()  # velocities need not vanish at the clamp
    st_ = ContinuousState(*fields)
    e = energy(st_, BeamParameters(gamma=rng.uniform(0, 2)))
    assert all(v >= 0 for v in e.as_dict().values())
    assert e.total > 0
