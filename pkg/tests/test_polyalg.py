"""Sparse polynomial algebra: examples, oracles and algebraic properties."""
from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from cislunar_nf.polyalg import (SparsePoly, add, conjugate_symmetry_residual, evaluate,
                                 lie_series_apply, mul_truncated, poisson_bracket, realify_check,
                                 substitute_linear)

Q1, Q2, Q3, P1, P2, P3 = range(6)


def var(i, N=16):
    return SparsePoly.variable(i, N)


def mono(exps, c=1.0, N=16):
    return SparsePoly.from_terms({tuple(exps): c}, N)


def close(p: SparsePoly, q: SparsePoly, tol=1e-12) -> bool:
    return (p - q).max_abs() <= tol * max(1.0, p.max_abs(), q.max_abs())


# --------------------------------------------------------------------------
# dictionary oracles, independent of the packed-key kernels

def dict_mul(a: dict, b: dict, N: int) -> dict:
    out: dict = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            e = tuple(x + y for x, y in zip(ea, eb))
            if sum(e) <= N:
                out[e] = out.get(e, 0) + ca * cb
    return out


def dict_deriv(a: dict, i: int) -> dict:
    out = {}
    for e, c in a.items():
        if e[i]:
            f = list(e)
            f[i] -= 1
            out[tuple(f)] = out.get(tuple(f), 0) + c * e[i]
    return out


def dict_bracket(a: dict, b: dict, N: int) -> dict:
    out: dict = {}
    for k in range(3):
        for sign, (x, y) in ((1, (k, k + 3)), (-1, (k + 3, k))):
            for e, c in dict_mul(dict_deriv(a, x), dict_deriv(b, y), N).items():
                out[e] = out.get(e, 0) + sign * c
    return out


def dict_eval(a: dict, x) -> complex:
    return sum(c * np.prod([xi ** ei for xi, ei in zip(x, e)]) for e, c in a.items())


def as_poly(a: dict, N: int) -> SparsePoly:
    return SparsePoly.from_terms(a, N)


exps_strategy = st.tuples(*[st.integers(0, 2)] * 6).filter(lambda e: 1 <= sum(e) <= 4)
coef_strategy = st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False)
poly_strategy = st.dictionaries(exps_strategy, coef_strategy, min_size=1, max_size=8)


def random_homogeneous(rng, n_terms, degree):
    """Real coefficients on ``n_terms`` monomials of one degree."""
    out = {}
    while len(out) < n_terms:
        e = np.bincount(rng.integers(0, 6, degree), minlength=6)
        out[tuple(int(v) for v in e)] = rng.normal()
    return out


def random_dict(rng, n_terms, max_deg, real=False):
    out = {}
    while len(out) < n_terms:
        e = tuple(int(v) for v in rng.integers(0, 3, 6))
        if 1 <= sum(e) <= max_deg:
            c = rng.normal()
            out[e] = c if real else c + 1j * rng.normal()
    return out


# --------------------------------------------------------------------------
# add

def test_add_zero_is_identity():
    p = mono((1, 0, 0, 1, 0, 0), 2.5) + mono((0, 2, 0, 0, 0, 0), -1j)
    assert close(add(p, SparsePoly.zero()), p, 0)


def test_add_inverse_is_empty():
    p = mono((1, 0, 0, 1, 0, 0), 2.5) + mono((0, 2, 0, 0, 0, 0), -1j)
    assert add(p, -p).is_zero()
    assert add(p, -p).nterms == 0


def test_like_terms_merge():
    s = add(2 * var(Q1), 3 * var(Q1))
    assert s.to_dict() == {(1, 0, 0, 0, 0, 0): 5}


# --------------------------------------------------------------------------
# mul_truncated

def test_mul_by_one():
    p = mono((1, 1, 0, 0, 0, 1), 3 - 2j) + var(P2)
    assert close(mul_truncated(p, SparsePoly.constant(1.0), 16), p, 0)


def test_mul_truncation_discards_high_degree():
    q1sq = mono((2, 0, 0, 0, 0, 0))
    p1sq = mono((0, 0, 0, 2, 0, 0))
    assert mul_truncated(q1sq, p1sq, 3).is_zero()


def test_mul_matches_dense_oracle(rng):
    for _ in range(10):
        a, b = random_dict(rng, 12, 3), random_dict(rng, 12, 3)
        got = mul_truncated(as_poly(a, 6), as_poly(b, 6), 6)
        assert close(got, as_poly(dict_mul(a, b, 6), 6), 1e-14)


@settings(max_examples=40, deadline=None)
@given(poly_strategy, poly_strategy, st.integers(2, 8))
def test_truncated_equals_full_then_truncate(a, b, N):
    full = mul_truncated(as_poly(a, 16), as_poly(b, 16), 16)
    assert close(mul_truncated(as_poly(a, 16), as_poly(b, 16), N), full.truncate(N), 1e-13)


# --------------------------------------------------------------------------
# poisson_bracket

def test_canonical_pair():
    assert poisson_bracket(var(Q1), var(P1), 8).to_dict() == {(0,) * 6: 1}


def test_coordinates_commute():
    assert poisson_bracket(var(Q1), var(Q2), 8).is_zero()


def test_bracket_hand_expansion():
    # {q1 p1, q1} = d(q1p1)/dq1 * 0 - d(q1p1)/dp1 * 1 = -q1
    got = poisson_bracket(mono((1, 0, 0, 1, 0, 0)), var(Q1), 8)
    assert got.to_dict() == {(1, 0, 0, 0, 0, 0): -1}


def test_bracket_matches_dict_oracle(rng):
    for _ in range(10):
        a, b = random_dict(rng, 10, 4), random_dict(rng, 10, 4)
        got = poisson_bracket(as_poly(a, 8), as_poly(b, 8), 8)
        assert close(got, as_poly(dict_bracket(a, b, 8), 8), 1e-13)


@settings(max_examples=40, deadline=None)
@given(poly_strategy, poly_strategy)
def test_bracket_antisymmetry(a, b):
    p, q = as_poly(a, 12), as_poly(b, 12)
    assert close(poisson_bracket(p, q, 12), -poisson_bracket(q, p, 12), 1e-13)


@settings(max_examples=40, deadline=None)
@given(poly_strategy, poly_strategy, poly_strategy, coef_strategy)
def test_bracket_bilinear(a, b, c, s):
    p, q, r = as_poly(a, 12), as_poly(b, 12), as_poly(c, 12)
    lhs = poisson_bracket(p + q.scale(s), r, 12)
    rhs = poisson_bracket(p, r, 12) + poisson_bracket(q, r, 12).scale(s)
    assert close(lhs, rhs, 1e-12)


@settings(max_examples=30, deadline=None)
@given(poly_strategy, poly_strategy, poly_strategy)
def test_jacobi_identity(a, b, c):
    N = 16
    p, q, r = as_poly(a, N), as_poly(b, N), as_poly(c, N)
    total = (poisson_bracket(poisson_bracket(p, q, N), r, N)
             + poisson_bracket(poisson_bracket(q, r, N), p, N)
             + poisson_bracket(poisson_bracket(r, p, N), q, N))
    scale = max(1.0, p.max_abs() * q.max_abs() * r.max_abs())
    assert total.max_abs() <= 1e-10 * scale


@settings(max_examples=30, deadline=None)
@given(poly_strategy, poly_strategy, poly_strategy)
def test_leibniz_rule(a, b, c):
    N = 16
    p, q, r = as_poly(a, N), as_poly(b, N), as_poly(c, N)
    lhs = poisson_bracket(mul_truncated(p, q, N), r, N)
    rhs = mul_truncated(p, poisson_bracket(q, r, N), N) + mul_truncated(poisson_bracket(p, r, N), q, N)
    assert close(lhs, rhs, 1e-11)


# --------------------------------------------------------------------------
# lie_series_apply

def test_lie_zero_generator():
    f = mono((1, 0, 0, 1, 0, 0)) + mono((0, 2, 0, 0, 0, 1), 0.3j)
    assert close(lie_series_apply(f, SparsePoly.zero(), 10), f, 0)


def test_lie_single_bracket_survives_at_degree_three():
    f = mono((1, 0, 0, 1, 0, 0))
    G = mono((2, 1, 0, 0, 0, 0), 0.7) + mono((0, 0, 1, 1, 1, 0), -1.3j)
    assert close(lie_series_apply(f, G, 3), f + poisson_bracket(f, G, 3), 0)


def test_lie_rejects_low_degree_generator():
    with pytest.raises(ValueError):
        lie_series_apply(var(Q1), mono((1, 0, 0, 1, 0, 0)), 6)


def test_lie_matches_flow_of_generator(rng):
    """``exp(ad_G) f`` equals ``f`` evaluated after the unit-time flow of ``G``."""
    N = 18
    f = as_poly(random_dict(rng, 6, 2, real=True), N)
    G = as_poly(random_homogeneous(rng, 8, 3), N)
    grad = G.gradient()
    Lf = lie_series_apply(f, G, N)

    def rhs(_, x):
        g = np.array([d(x).real for d in grad])
        return np.concatenate([g[3:], -g[:3]])

    for _ in range(20):
        x0 = rng.normal(size=6)
        x0 *= 0.05 / np.linalg.norm(x0)
        sol = solve_ivp(rhs, (0, 1), x0, method="DOP853", rtol=1e-13, atol=1e-16)
        assert abs(Lf(x0) - f(sol.y[:, -1])) < 1e-8


@settings(max_examples=15, deadline=None)
@given(poly_strategy, st.dictionaries(st.tuples(*[st.integers(0, 2)] * 6).filter(lambda e: sum(e) == 3),
                                      coef_strategy, min_size=1, max_size=4))
def test_lie_plus_minus_composes_to_identity(a, g):
    N = 9
    f = as_poly(a, N)
    G = as_poly({e: 0.05 * c for e, c in g.items()}, N)
    back = lie_series_apply(lie_series_apply(f, G, N), -G, N)
    assert close(back, f.truncate(N), 1e-9)


# --------------------------------------------------------------------------
# substitute_linear

def test_substitute_identity(rng):
    p = as_poly(random_dict(rng, 15, 4), 8)
    assert close(substitute_linear(p, np.eye(6)), p, 1e-15)


def test_substitute_linear_form_is_matrix_action(rng):
    row = rng.normal(size=6) + 1j * rng.normal(size=6)
    M = rng.normal(size=(6, 6))
    got = substitute_linear(SparsePoly.linear_form(row, 4), M)
    assert close(got, SparsePoly.linear_form(row @ M, 4), 1e-14)


def test_substitute_matches_pointwise(rng):
    a = random_dict(rng, 20, 4)
    p = as_poly(a, 8)
    M = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    pm = substitute_linear(p, M)
    for _ in range(50):
        x = rng.normal(size=6) + 1j * rng.normal(size=6)
        ref = dict_eval(a, M @ x)
        assert abs(pm(x) - ref) <= 1e-10 * max(1.0, abs(ref))


# --------------------------------------------------------------------------
# evaluate

def test_evaluate_constant():
    assert evaluate(SparsePoly.constant(2.5 - 1j), np.ones(6)) == 2.5 - 1j


def test_evaluate_q1p1():
    assert evaluate(mono((1, 0, 0, 1, 0, 0)), [2, 0, 0, 3, 0, 0]) == 6


def test_evaluate_matches_dense_oracle(rng):
    for _ in range(10):
        a = random_dict(rng, 25, 4)
        p = as_poly(a, 8)
        x = rng.normal(size=6) + 1j * rng.normal(size=6)
        ref = dict_eval(a, x)
        assert abs(p(x) - ref) <= 1e-12 * max(1.0, abs(ref))


# --------------------------------------------------------------------------
# realification checks

def test_realify_check_real_polynomial():
    assert realify_check(mono((1, 0, 0, 1, 0, 0), 2.0) + var(Q3)) == 0.0


def test_realify_check_reports_perturbation():
    p = mono((1, 0, 0, 1, 0, 0), 2.0) + mono((0, 1, 0, 0, 1, 0), 1.0 + 3.5e-9j)
    assert realify_check(p) == 3.5e-9


def test_conjugate_symmetry_of_complexified_real_polynomial(rng):
    from cislunar_nf.nfbuild import B_MATRIX, realify
    x_real = as_poly(random_dict(rng, 20, 4, real=True), 6)
    complexified = substitute_linear(x_real, B_MATRIX)
    assert conjugate_symmetry_residual(complexified) < 1e-13
    assert close(realify(complexified), x_real, 1e-13)


# --------------------------------------------------------------------------
# structure and serialization

def test_terms_above_max_degree_are_dropped():
    p = SparsePoly.from_terms({(3, 0, 0, 0, 0, 0): 1.0, (1, 0, 0, 0, 0, 0): 2.0}, 2)
    assert p.degrees == [1]


def test_keys_unique_and_sorted(rng):
    p = as_poly(random_dict(rng, 30, 4), 8) + as_poly(random_dict(rng, 30, 4), 8)
    for d in p.degrees:
        keys, _ = p.part(d)
        assert np.all(np.diff(keys) > 0)


def test_pruning_threshold():
    p = SparsePoly.from_terms({(1, 0, 0, 0, 0, 0): 1.0, (0, 1, 0, 0, 0, 0): 1e-19}, 4)
    assert p.nterms == 1


def test_json_round_trip(rng):
    p = as_poly(random_dict(rng, 30, 4), 8)
    q = SparsePoly.from_json(p.to_json())
    assert q.max_degree == p.max_degree
    assert close(q, p, 0)


def test_array_round_trip(rng):
    p = as_poly(random_dict(rng, 30, 4), 8)
    arr = p.to_arrays()
    q = SparsePoly.from_arrays(arr["keys"], arr["coefs"], int(arr["max_degree"]))
    assert close(q, p, 0)


def test_exponents_round_trip_through_keys():
    for e in itertools.product(range(3), repeat=6):
        if sum(e) <= 6:
            assert list(mono(e).to_dict()) == [e]
