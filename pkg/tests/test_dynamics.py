"""CR3BP geometry, propagation, STM and differential correction."""
from __future__ import annotations

import numpy as np
import pytest
from scipy.optimize import brentq

from cislunar_nf.dynamics import (SystemParams, correct_periodic, jacobi_constant, jacobian_matrix,
                                  linear_frequencies, lyapunov_guess, potential_gradient, propagate,
                                  solve_gamma, stm_rtb, vector_field, vertical_guess, _quintic)

MU = 0.0121505856

# a northern L1 halo near C = 3.11 (seed rounded from the inverse transform)
HALO_SEED = np.array([0.8947, 0.0, -0.0716, 0.0, -0.2713, 0.0])


def gamma_oracle(mu, point):
    """Zero of the x-axis force, located by bisection on the rotating x axis."""
    def fx(x):
        return potential_gradient(np.array([x, 0.0, 0.0]), mu)[0]
    eps = 1e-9
    if point == "L1":
        x = brentq(fx, -mu + eps, 1 - mu - eps, xtol=1e-15)
        return 1 - mu - x
    x = brentq(fx, 1 - mu + eps, 2.0, xtol=1e-15)
    return x - (1 - mu)


@pytest.fixture(scope="module")
def lyapunov(l1):
    return correct_periodic(lyapunov_guess(l1, 0.01), "Lyapunov", l1.mu)


# --------------------------------------------------------------------------
# libration geometry

def test_gamma_l1():
    g = solve_gamma(MU, "L1")
    assert abs(g - 0.150935) < 1e-6
    assert abs(g - gamma_oracle(MU, "L1")) < 1e-12


def test_gamma_l2():
    g = solve_gamma(MU, "L2")
    assert abs(g - 0.167833) < 1e-6
    assert abs(g - gamma_oracle(MU, "L2")) < 1e-12


@pytest.mark.parametrize("point", ["L1", "L2", "L3"])
def test_quintic_residual(point):
    g = solve_gamma(MU, point)
    assert abs(_quintic(MU, point)(g)) < 1e-14


def test_gamma_hill_limit():
    errs = [abs(solve_gamma(mu, "L1") / (mu / 3) ** (1 / 3) - 1) for mu in (1e-6, 1e-9, 1e-12)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-4


def test_params_invariants():
    for point, delta in (("L1", 1.0), ("L2", 1.0), ("L3", -1.0)):
        p = SystemParams.from_mu(MU, point)
        assert p.delta == delta and p.gamma > 0
    assert SystemParams.from_mu(MU, "L1").a == pytest.approx(1 - solve_gamma(MU, "L1"))
    assert SystemParams.from_mu(MU, "L2").a == pytest.approx(1 + solve_gamma(MU, "L2"))
    with pytest.raises(ValueError):
        SystemParams.from_mu(0.6, "L1")


@pytest.mark.parametrize("point", ["L1", "L2", "L3"])
def test_equilibrium_has_zero_field(point):
    p = SystemParams.from_mu(MU, point)
    assert np.abs(vector_field(0.0, p.equilibrium(), MU)).max() < 1e-13


# --------------------------------------------------------------------------
# Jacobi constant and propagation

def test_jacobi_at_l1(l1):
    r = l1.equilibrium()[:3]
    d1, d2 = np.linalg.norm(r - [-MU, 0, 0]), np.linalg.norm(r - [1 - MU, 0, 0])
    omega = 0.5 * (r[0] ** 2 + r[1] ** 2) + (1 - MU) / d1 + MU / d2
    assert jacobi_constant(l1.equilibrium(), MU) == pytest.approx(2 * omega, abs=1e-14)
    assert jacobi_constant(l1.equilibrium(), MU) == pytest.approx(3.18834, abs=5e-6)


def test_jacobi_reflection_symmetry():
    s = np.array([0.84, 0.02, 0.01, 0.03, -0.1, 0.02])
    m = s * np.array([1, -1, 1, -1, 1, -1])
    assert jacobi_constant(s, MU) == jacobi_constant(m, MU)


def _random_drift(l1, rng, **tol):
    s = l1.equilibrium() + np.concatenate([rng.uniform(-0.02, 0.02, 3), rng.uniform(-0.05, 0.05, 3)])
    tr = propagate(s, (0, 10), MU, t_eval=np.linspace(0, 10, 41), **tol)
    C = np.array([jacobi_constant(x, MU) for x in tr.states])
    return np.abs(C - C[0]).max()


def test_jacobi_drift_random_states(l1, rng):
    for _ in range(5):
        assert _random_drift(l1, rng, rtol=3e-14, atol=1e-16) < 1e-12


def test_jacobi_drift_default_tolerance(l1, rng):
    for _ in range(5):
        assert _random_drift(l1, rng) < 1e-10


def test_zero_duration_is_identity(l1):
    s = l1.equilibrium() + 0.01
    assert np.array_equal(propagate(s, 0.0, MU).final, s)


def test_lyapunov_closes_after_one_period(lyapunov):
    tr = propagate(lyapunov.x0, lyapunov.period, MU)
    assert np.abs(tr.final - lyapunov.x0).max() < 1e-9
    C = [jacobi_constant(x, MU) for x in lyapunov.sample(20).states]
    assert np.ptp(C) < 1e-10


# --------------------------------------------------------------------------
# STM

def test_stm_zero_span():
    assert np.array_equal(stm_rtb(np.array([0.8, 0, 0.01, 0, 0.1, 0]), 0.0, MU), np.eye(6))


def test_stm_determinant(lyapunov):
    Phi = stm_rtb(lyapunov.x0, lyapunov.period, MU)
    assert abs(np.linalg.det(Phi) - 1) < 1e-9


def test_stm_matches_finite_differences(l1):
    s0 = l1.equilibrium() + np.array([0.01, 0.005, 0.004, 0.0, 0.02, -0.01])
    T = 2.0
    Phi = stm_rtb(s0, T, MU)
    h = 1e-6
    for j in range(6):
        e = np.zeros(6)
        e[j] = h
        col = (propagate(s0 + e, T, MU).final - propagate(s0 - e, T, MU).final) / (2 * h)
        assert np.linalg.norm(col - Phi[:, j]) <= 1e-6 * np.linalg.norm(Phi[:, j])


def test_monodromy_reciprocal_pair(lyapunov):
    ev = np.linalg.eigvals(stm_rtb(lyapunov.x0, lyapunov.period, MU))
    real = ev[np.abs(ev.imag) < 1e-8].real
    lam = real.max()
    assert lam > 1
    assert np.min(np.abs(real - 1 / lam)) < 1e-6 * lam


def test_linear_frequencies_match_jacobian(l1):
    lam, w, wz = linear_frequencies(l1)
    ev = np.linalg.eigvals(jacobian_matrix(l1.equilibrium(), MU))
    assert np.min(np.abs(ev - lam)) < 1e-10
    assert np.min(np.abs(ev - 1j * w)) < 1e-10
    assert np.min(np.abs(ev - 1j * wz)) < 1e-10


# --------------------------------------------------------------------------
# differential correction

def test_lyapunov_at_requested_energy(l1):
    orb = correct_periodic(lyapunov_guess(l1, 0.005), "Lyapunov", MU, jacobi=3.18)
    assert orb.jacobi == pytest.approx(3.18, abs=1e-12)
    assert np.abs(propagate(orb.x0, orb.period, MU).final - orb.x0).max() < 1e-9


def test_corrector_fixed_point(lyapunov):
    again = correct_periodic(lyapunov.x0, "Lyapunov", MU)
    assert np.array_equal(again.x0, lyapunov.x0)


def test_vertical_at_validity_edge(l1):
    orb = correct_periodic(vertical_guess(l1, 0.02), "Vertical", MU, jacobi=3.1755)
    assert orb.jacobi == pytest.approx(3.1755, abs=1e-12)
    assert np.abs(propagate(orb.x0, orb.period, MU).final - orb.x0).max() < 1e-8


def test_halo_near_3_11():
    orb = correct_periodic(HALO_SEED, "Halo", MU, jacobi=3.11)
    assert orb.jacobi == pytest.approx(3.11, abs=1e-12)
    end = propagate(orb.x0, orb.period, MU).final
    assert np.abs(end - orb.x0).max() < 1e-8
    # the half period is the first return to y = 0 with a reversed y velocity
    half = propagate(orb.x0, orb.period / 2, MU).final
    assert abs(half[1]) < 1e-9 and np.sign(half[4]) != np.sign(orb.x0[4])


def test_refinement_invariance(l1):
    a = correct_periodic(lyapunov_guess(l1, 0.01), "Lyapunov", MU)
    b = correct_periodic(lyapunov_guess(l1, 0.01), "Lyapunov", MU, rtol=1e-13, atol=1e-15)
    assert np.abs(a.x0 - b.x0).max() < 1e-10
    assert abs(a.period - b.period) < 1e-10


def test_unknown_family_rejected():
    with pytest.raises(ValueError):
        correct_periodic(HALO_SEED, "Butterfly", MU)
