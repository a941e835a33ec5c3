"""Hamiltonian expansion, diagonalization and normal-form reduction."""
from __future__ import annotations

import numpy as np
import pytest

from cislunar_nf.dynamics import SystemParams, linear_frequencies
from cislunar_nf.nfbuild import (B_INV, B_MATRIX, J6, CacheMismatch, NormalFormPackage,
                                 SmallDivisorError, build_generating_function, complex_hamiltonian,
                                 complexify, diagonalize_quadratic, divisors, expand_hamiltonian,
                                 expansion_coefficients, hamiltonian_rtb_scaled, legendre_terms,
                                 realify, reduce, retention_mask, retention_rule)
from cislunar_nf.polyalg import (SparsePoly, conjugate_symmetry_residual, lie_series_apply,
                                 poisson_bracket, substitute_linear)
from cislunar_nf._monomials import unpack_array

MU = 0.0121505856


def c_closed_form(mu, gamma, n, point):
    """Collinear-point coefficients for L1 (upper signs) and L2 (lower signs)."""
    if point == "L1":
        return (mu + (-1) ** n * (1 - mu) * gamma ** (n + 1) / (1 - gamma) ** (n + 1)) / gamma ** 3
    return ((-1) ** n * mu + (-1) ** n * (1 - mu) * gamma ** (n + 1) / (1 + gamma) ** (n + 1)) / gamma ** 3


@pytest.fixture(scope="module")
def expansion(l1):
    return expand_hamiltonian(l1, 8)


@pytest.fixture(scope="module")
def linear(expansion):
    return diagonalize_quadratic(expansion.H.homogeneous(2))


# --------------------------------------------------------------------------
# expansion

@pytest.mark.parametrize("point", ["L1", "L2"])
def test_coefficients_closed_form(point):
    p = SystemParams.from_mu(MU, point)
    c = expansion_coefficients(p, 10)
    for n in range(2, 11):
        assert c[n] == pytest.approx(c_closed_form(MU, p.gamma, n, point), rel=1e-13)


def test_c2_earth_moon_l1(l1):
    c2 = expansion_coefficients(l1, 2)[2]
    assert c2 == pytest.approx(5.147590, abs=5e-6)


def test_linear_rates_match_dynamics(l1, linear):
    lam, w, wz = linear_frequencies(l1)
    assert abs(linear.lam - lam) < 1e-10
    assert abs(linear.omega1 - w) < 1e-10
    assert abs(linear.omega2 - wz) < 1e-10


def test_quadratic_part_symbolic(l1, expansion):
    c2 = expansion.c[2]
    e = np.eye(6, dtype=int)

    def t(*idx):
        return tuple(sum(e[i] for i in idx))
    expected = SparsePoly.from_terms({
        t(0, 0): -c2, t(1, 1): c2 / 2, t(2, 2): c2 / 2,
        t(3, 3): 0.5, t(4, 4): 0.5, t(5, 5): 0.5, t(1, 3): 1.0, t(0, 4): -1.0}, 8)
    assert (expansion.H.homogeneous(2) - expected).max_abs() < 1e-14


def test_legendre_p2():
    X = SparsePoly.variable(0, 4)
    rho2 = sum((SparsePoly.variable(i, 4) * SparsePoly.variable(i, 4) for i in range(3)), SparsePoly.zero(4))
    T = legendre_terms(X, rho2, 4)
    expected = (X * X).scale(1.5) - rho2.scale(0.5)
    assert (T[2] - expected).max_abs() < 1e-15


def test_parts_are_homogeneous(expansion):
    for d, part in expansion.H_parts.items():
        assert part.degrees == [d]


def test_expansion_matches_exact_hamiltonian(l1):
    """The truncation error against the closed-form Hamiltonian falls with ``N``."""
    rng = np.random.default_rng(3)
    d = rng.normal(size=6)
    d /= np.linalg.norm(d)
    errs = []
    for N in (4, 6, 8, 10):
        H = expand_hamiltonian(l1, N).H
        errs.append(abs(H(0.2 * d).real - hamiltonian_rtb_scaled(0.2 * d, l1)))
    assert all(a > b for a, b in zip(errs, errs[1:]))
    H8 = expand_hamiltonian(l1, 8).H
    assert abs(H8(0.1 * d).real - hamiltonian_rtb_scaled(0.1 * d, l1)) < 1e-10


def test_expansion_requires_cubic_order(l1):
    with pytest.raises(ValueError):
        expand_hamiltonian(l1, 2)


# --------------------------------------------------------------------------
# diagonalization and complexification

def test_C_symplectic(linear):
    C = linear.C
    assert np.abs(C.T @ J6 @ C - J6).max() < 1e-12
    assert np.abs(linear.C_inv @ C - np.eye(6)).max() < 1e-12


def test_H2_diagonal_form(expansion, linear):
    H2 = substitute_linear(expansion.H.homogeneous(2), linear.C)
    e = np.eye(6, dtype=int)
    expected = {tuple(e[0] + e[3]): linear.lam,
                tuple(2 * e[1]): linear.omega1 / 2, tuple(2 * e[4]): linear.omega1 / 2,
                tuple(2 * e[2]): linear.omega2 / 2, tuple(2 * e[5]): linear.omega2 / 2}
    got = H2.to_dict()
    for k, v in expected.items():
        assert got.pop(k) == pytest.approx(v, abs=1e-12)
    assert all(abs(v) < 1e-12 for v in got.values())


def test_complexified_H2(expansion, linear):
    H2c = complexify(substitute_linear(expansion.H.homogeneous(2), linear.C))
    e = np.eye(6, dtype=int)
    expected = {tuple(e[0] + e[3]): linear.lam, tuple(e[1] + e[4]): 1j * linear.omega1,
                tuple(e[2] + e[5]): 1j * linear.omega2}
    got = H2c.to_dict()
    for k, v in expected.items():
        assert abs(got.pop(k) - v) < 1e-13
    assert all(abs(v) < 1e-13 for v in got.values())


def test_complexify_round_trip(expansion, linear):
    H = substitute_linear(expansion.H, linear.C)
    assert (realify(complexify(H)) - H).max_abs() < 1e-13


def test_complexified_real_polynomial_is_conjugate_symmetric(l1):
    Hc, _ = complex_hamiltonian(l1, 8)
    assert conjugate_symmetry_residual(Hc) < 1e-12


def test_B_is_symplectic():
    assert np.abs(B_MATRIX.T @ J6 @ B_MATRIX - J6).max() < 1e-15
    assert np.abs(B_MATRIX @ B_INV - np.eye(6)).max() < 1e-15


# --------------------------------------------------------------------------
# retention and generating functions

def test_retention_examples():
    assert retention_rule("birkhoff", (1, 1, 0, 1, 1, 0))
    assert retention_rule("resonant", (1, 1, 0, 1, 1, 0))
    assert not retention_rule("birkhoff", (0, 2, 0, 0, 0, 2))
    assert retention_rule("resonant", (0, 2, 0, 0, 0, 2))
    # q2 p3 pairs to i(w2 - w1): removed by Birkhoff, the 1:1 resonant term
    assert not retention_rule("birkhoff", (0, 1, 0, 0, 0, 1))
    assert retention_rule("resonant", (0, 1, 0, 0, 0, 1))
    # q2 q3: the center sums differ
    assert not retention_rule("birkhoff", (0, 1, 1, 0, 0, 0))
    assert not retention_rule("resonant", (0, 1, 1, 0, 0, 0))


def test_retention_rejects_unknown_kind():
    with pytest.raises(ValueError):
        retention_rule("lindstedt", (1, 0, 0, 1, 0, 0))


def test_generating_function_formula(linear):
    h = 0.37 - 0.11j
    H_bad = SparsePoly.from_terms({(2, 0, 0, 0, 1, 0): h}, 3)
    G = build_generating_function(H_bad, linear.zeta).G
    expected = -h / (-2 * linear.lam + 1j * linear.omega1)
    assert abs(G.coefficient((2, 0, 0, 0, 1, 0)) - expected) < 1e-15


def test_small_divisor_aborts(linear):
    with pytest.raises(SmallDivisorError):
        build_generating_function(SparsePoly.from_terms({(1, 1, 0, 1, 1, 0): 1.0}, 4), linear.zeta)


@pytest.mark.parametrize("kind", ["birkhoff", "resonant"])
def test_homological_equation_termwise(l1, package, kind):
    """``{H2, G_n} + H_n_removed = 0`` at ``n = 3, 4``."""
    pkg = package("L1", kind, 6)
    H, _ = complex_hamiltonian(l1, 6)
    H2 = H.homogeneous(2)
    for n in (3, 4):
        Hn = H.homogeneous(n)
        removed = Hn.select(lambda e: ~retention_mask(kind, e))
        residual = poisson_bracket(H2, pkg.G[n], 6) + removed
        assert residual.max_abs() < 1e-12 * max(1.0, removed.max_abs())
        H = lie_series_apply(H, pkg.G[n], 6)


@pytest.mark.parametrize("kind", ["birkhoff", "resonant"])
def test_retention_audit(package, kind):
    pkg = package("L1", kind, 10)
    keys, _ = pkg.H_nf.arrays()
    assert retention_mask(kind, unpack_array(keys)).all()


def test_birkhoff_normal_form_in_products(package):
    keys, _ = package("L1", "birkhoff", 10).H_nf.arrays()
    e = unpack_array(keys)
    assert np.array_equal(e[:, :3], e[:, 3:])


def test_resonant_depends_on_cos_theta2(package):
    terms = package("L1", "resonant", 10).action_terms
    assert np.any(terms.k != 0)
    assert np.all(terms.k % 2 == 0)
    # H(theta2) = H(-theta2): only cosines of multiples of theta2
    I = [0.0, 0.1, 0.05]
    for th in (0.3, 1.1, 2.5):
        assert abs(terms.value(I, th) - terms.value(I, -th)) < 1e-14
        assert abs(terms.complex_value(I, th).imag) < 1e-14


@pytest.mark.parametrize("kind", ["birkhoff", "resonant"])
def test_generating_functions_homogeneous_and_symmetric(package, kind):
    pkg = package("L1", kind, 10)
    for n, G in pkg.G.items():
        assert G.degrees == [n]
        assert conjugate_symmetry_residual(G) < 1e-10 * max(1.0, G.max_abs())
    assert conjugate_symmetry_residual(pkg.H_nf) < 1e-10


def test_birkhoff_rates_at_origin(package):
    pkg = package("L1", "birkhoff", 10)
    grad, _ = pkg.action_terms.gradient([0.0, 0.0, 0.0])
    assert grad[1] == pytest.approx(pkg.linear.omega1, abs=1e-14)
    assert grad[2] == pytest.approx(pkg.linear.omega2, abs=1e-14)
    assert grad[0] == pytest.approx(pkg.linear.lam, abs=1e-14)


def test_resonant_retains_at_least_birkhoff(package):
    b = package("L1", "birkhoff", 10).H_nf.count_by_degree()
    r = package("L1", "resonant", 10).H_nf.count_by_degree()
    assert all(r.get(d, 0) >= n for d, n in b.items())
    assert sum(r.values()) > sum(b.values())


@pytest.mark.parametrize("kind", ["birkhoff", "resonant"])
def test_transform_round_trip(package, kind, rng):
    pkg = package("L1", kind, 10)
    worst = 0.0
    for _ in range(100):
        x = rng.normal(size=6)
        x *= rng.uniform(0, 0.1) / np.linalg.norm(x)
        c = B_INV @ x
        worst = max(worst, np.abs(pkg.fwd_map(pkg.inv_map(c)) - c).max())
    assert worst < 1e-9


def test_order_bounds(l1):
    with pytest.raises(ValueError):
        reduce(l1, "resonant", 2)


def test_divisors_pairing(linear):
    d = divisors(np.array([[2, 0, 0, 0, 1, 0]]), linear.zeta)
    assert d[0] == -2 * linear.lam + 1j * linear.omega1


# --------------------------------------------------------------------------
# cache files

def test_save_load_round_trip(package, tmp_path):
    pkg = package("L1", "resonant", 6)
    path = pkg.save(tmp_path / "pkg.npz")
    back = NormalFormPackage.load(path, expect=pkg.key())
    assert back.key() == pkg.key()
    assert (back.H_nf - pkg.H_nf).max_abs() == 0
    assert all((back.G[n] - pkg.G[n]).max_abs() == 0 for n in pkg.G)
    assert np.array_equal(back.linear.C, pkg.linear.C)
    x = B_INV @ np.full(6, 0.01)
    assert np.array_equal(back.fwd_map(x), pkg.fwd_map(x))


def test_save_is_deterministic(package, tmp_path):
    pkg = package("L1", "birkhoff", 6)
    a = pkg.save(tmp_path / "a.npz").read_bytes()
    b = pkg.save(tmp_path / "b.npz").read_bytes()
    assert a == b


@pytest.mark.parametrize("field,value", [("order", 7), ("kind", "birkhoff"), ("mu", 0.012)])
def test_load_rejects_mismatch(package, tmp_path, field, value):
    pkg = package("L1", "resonant", 6)
    path = pkg.save(tmp_path / "pkg.npz")
    with pytest.raises(CacheMismatch):
        NormalFormPackage.load(path, expect={**pkg.key(), field: value})
