import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.special import airy

import propagator
from errors import PropagationError
from potential import PolyPiece, PotentialSpec, constant_spec, kronig_penney_spec
from propagator import (
    J,
    HamiltonianAt,
    defect_E_derivative,
    defect_transfer,
    defect_x_derivative,
    kp_closed_form,
    monodromy_periodic,
    phi_matrix,
    propagate,
    propagate_with_phi,
    symplectic_defect,
    theta_matrix,
    transfer_E_derivative,
)

PHI = (1 + math.sqrt(5)) / 2


def test_symplecticity_sweep(random_specs):
    # Energies stay above every random level so entries remain O(1); below the potential
    # the products grow like cosh and rounding alone exceeds the 1e-9 threshold
    energies = np.linspace(25.0, 225.0, 200)
    for spec in random_specs:
        for E in energies:
            assert symplectic_defect(monodromy_periodic(spec, float(E))) < 1e-9
            assert symplectic_defect(defect_transfer(spec, float(E))) < 1e-9


@pytest.mark.parametrize("a", [1.0, PHI, 2.5])
def test_free_particle_trace(a):
    spec = constant_spec(a, 0.0, 0.0)
    for E in np.linspace(1e-3, 200.0, 400):
        k = np.trace(monodromy_periodic(spec, float(E)))
        assert abs(k - 2 * math.cos(a * math.sqrt(E))) < 1e-8


def test_kronig_penney_closed_form_matches_composition():
    spec = kronig_penney_spec(40.0, PHI, 0.0)
    for E in np.linspace(-60.0, 400.0, 500):
        closed = np.trace(kp_closed_form(40.0, PHI, float(E)))
        composed = np.trace(monodromy_periodic(spec, float(E)))
        assert abs(closed - composed) < 1e-9


def test_kronig_penney_closed_form_is_unimodular():
    for E in (-30.0, 0.0, 39.0, 41.0, 150.0):
        assert np.linalg.det(kp_closed_form(40.0, PHI, E)) == pytest.approx(1.0, abs=1e-9)


def test_shear_at_potential_level():
    spec = constant_spec(2.0, 3.0, 3.0)
    assert_allclose(monodromy_periodic(spec, 3.0), [[1.0, 2.0], [0.0, 1.0]])
    assert_allclose(phi_matrix(spec, 3.0), [[2.0, 2.0], [2.0, 8.0 / 3.0]])


@pytest.mark.parametrize("E", [-2.0, 0.5, 5.0])
def test_linear_potential_matches_airy(E):
    pieces = [PolyPiece(0.0, 1.0, (0.0, 1.0))]  # q(x) = x, so u'' = (x - E) u

    def wronskian_matrix(x):
        ai, aip, bi, bip = airy(x - E)
        return np.array([[ai, bi], [aip, bip]])

    expected = wronskian_matrix(1.0) @ np.linalg.inv(wronskian_matrix(0.0))
    assert_allclose(propagate(pieces, E, 0.0, 1.0), expected, atol=1e-6)


def test_integrated_piece_agrees_with_closed_form():
    # A vanishing slope forces the Runge-Kutta path on what is really a constant piece
    sloped = [PolyPiece(0.0, 1.5, (3.0, 1e-13))]
    flat = [PolyPiece(0.0, 1.5, (3.0,))]
    for E in (-4.0, 2.9, 20.0):
        U_ode, phi_ode = propagate_with_phi(sloped, E, 0.0, 1.5)
        U_cf, phi_cf = propagate_with_phi(flat, E, 0.0, 1.5)
        assert_allclose(U_ode, U_cf, atol=1e-6)
        assert_allclose(phi_ode, phi_cf, atol=1e-6)


def test_positive_definite_phi_and_theta(random_specs):
    rng = np.random.default_rng(7)
    for spec in random_specs:
        for _ in range(100):
            E = float(rng.uniform(25.0, 225.0))
            x = float(rng.uniform(0.1, 1.0))
            assert np.linalg.eigvalsh(phi_matrix(spec, E)).min() > 0
            assert np.linalg.eigvalsh(theta_matrix(spec, E, x)).min() > 0


def test_energy_derivative_is_m_j_phi():
    spec = kronig_penney_spec(40.0, PHI, 60.0)
    h = 1e-6
    for E in (5.0, 45.0, 130.0):
        fd = (monodromy_periodic(spec, E + h) - monodromy_periodic(spec, E - h)) / (2 * h)
        assert_allclose(transfer_E_derivative(spec, E), fd, rtol=1e-5, atol=1e-6)
        fd_def = (defect_transfer(spec, E + h) - defect_transfer(spec, E - h)) / (2 * h)
        assert_allclose(defect_E_derivative(spec, E), fd_def, rtol=1e-5, atol=1e-6)


def test_position_derivative_follows_equation_of_motion():
    spec = kronig_penney_spec(40.0, PHI, 60.0)
    E, x, h = 80.0, 0.5, 1e-6
    fd = (defect_transfer(spec, E, x + h) - defect_transfer(spec, E, x - h)) / (2 * h)
    assert_allclose(defect_x_derivative(spec, E, x), fd, rtol=1e-5, atol=1e-6)


def test_defect_transfer_at_zero_is_identity():
    spec = kronig_penney_spec(40.0, PHI, 60.0)
    assert_allclose(defect_transfer(spec, 12.0, 0.0), np.eye(2))


def test_hamiltonian_classically_allowed():
    assert HamiltonianAt(5.0, 2.0).classically_allowed
    assert not HamiltonianAt(1.0, 2.0).classically_allowed
    assert_allclose(HamiltonianAt(5.0, 2.0).matrix(), [[3.0, 0.0], [0.0, 1.0]])
    assert_allclose(J @ J, -np.eye(2))


def test_argument_errors():
    pieces = [PolyPiece(0.0, 1.0, (0.0,))]
    with pytest.raises(PropagationError):
        propagate(pieces, 1.0, 0.0, 1.0, tol=0.0)
    with pytest.raises(PropagationError):
        propagate(pieces, 1.0, 1.0, 0.0)
    with pytest.raises(PropagationError):
        propagate(pieces, 1.0, 0.0, 2.0)
    spec = constant_spec(1.0, 0.0, 0.0)
    with pytest.raises(PropagationError):
        defect_transfer(spec, 1.0, 1.5)


def test_hyperbolic_overflow_is_reported():
    spec = PotentialSpec(1.0, (PolyPiece(0.0, 1.0, (1e12,)),), (PolyPiece(0.0, 1.0, (0.0,)),))
    with pytest.raises(PropagationError):
        monodromy_periodic(spec, 0.0)


def test_integrator_absolute_tolerance_is_tighter_than_relative(monkeypatch):
    seen = []
    real_solve_ivp = propagator.solve_ivp

    def recording_solve_ivp(*args, **kwargs):
        seen.append((kwargs["rtol"], kwargs["atol"]))
        return real_solve_ivp(*args, **kwargs)

    monkeypatch.setattr(propagator, "solve_ivp", recording_solve_ivp)
    propagate([PolyPiece(0.0, 1.0, (0.0, 1.0))], 2.0, 0.0, 1.0, tol=1e-8)
    assert seen == [(1e-8, pytest.approx(1e-10))]
