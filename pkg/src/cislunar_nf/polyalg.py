"""Sparse graded polynomials in six canonical variables.

Variables are ordered ``(q1, q2, q3, p1, p2, p3)``.  A :class:`SparsePoly` is
stored as one term map per homogeneous degree: a sorted array of packed
monomial keys and a parallel array of complex coefficients.  Instances are
immutable; every operation returns a new polynomial.
"""
from __future__ import annotations

import json
import math
from typing import Iterable, Iterator, Mapping

import numpy as np

from . import kernels
from ._monomials import NVARS, degree_keys, key_degree, monomial_table, pack, unpack, unpack_array

#: relative pruning threshold, per degree
PRUNE_RTOL = 1e-17

_EMPTY_KEYS = np.zeros(0, dtype=np.int64)
_EMPTY_COEFS = np.zeros(0, dtype=complex)

VARIABLE_NAMES = ("q1", "q2", "q3", "p1", "p2", "p3")


def _prune(keys: np.ndarray, coefs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mag = np.abs(coefs)
    if len(mag) == 0:
        return _EMPTY_KEYS, _EMPTY_COEFS
    keep = (mag > 0) & (mag >= PRUNE_RTOL * mag.max())
    return keys[keep], coefs[keep]


def _from_dense(degree: int, dense: np.ndarray):
    nz = np.flatnonzero(dense)
    return _prune(degree_keys(degree)[nz], dense[nz])


class SparsePoly:
    """Truncated polynomial with complex coefficients.

    Parameters
    ----------
    parts : mapping
        ``degree -> (keys, coefficients)``; keys are packed exponent tuples
        (see :mod:`cislunar_nf._monomials`) and must all have that degree.
    max_degree : int
        Truncation order.  Terms above it are discarded on construction.
    """

    __slots__ = ("_parts", "max_degree", "_evaluator")

    def __init__(self, parts: Mapping[int, tuple[np.ndarray, np.ndarray]] | None = None,
                 max_degree: int = 16):
        self.max_degree = int(max_degree)
        self._parts: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self._evaluator = None
        for d, (keys, coefs) in (parts or {}).items():
            if d > self.max_degree:
                continue
            keys = np.asarray(keys, dtype=np.int64)
            coefs = np.asarray(coefs, dtype=complex)
            order = np.argsort(keys, kind="stable")
            keys, coefs = keys[order], coefs[order]
            if len(keys) > 1 and np.any(keys[1:] == keys[:-1]):
                keys, inv = np.unique(keys, return_inverse=True)
                merged = np.zeros(len(keys), dtype=complex)
                np.add.at(merged, inv, coefs)
                coefs = merged
            keys, coefs = _prune(keys, coefs)
            if len(keys):
                keys.setflags(write=False)
                coefs.setflags(write=False)
                self._parts[int(d)] = (keys, coefs)

    # construction ---------------------------------------------------------
    @classmethod
    def from_terms(cls, terms: Mapping[tuple[int, ...], complex] | Iterable, max_degree: int = 16):
        """Build from ``{exponent tuple: coefficient}``."""
        items = terms.items() if isinstance(terms, Mapping) else terms
        by_deg: dict[int, tuple[list, list]] = {}
        for exps, c in items:
            exps = tuple(int(e) for e in exps)
            if len(exps) != NVARS:
                raise ValueError("monomials need six exponents")
            ks, cs = by_deg.setdefault(sum(exps), ([], []))
            ks.append(pack(exps))
            cs.append(complex(c))
        return cls({d: (np.array(k, dtype=np.int64), np.array(c, dtype=complex))
                    for d, (k, c) in by_deg.items()}, max_degree)

    @classmethod
    def constant(cls, c: complex, max_degree: int = 16):
        return cls.from_terms({(0,) * NVARS: c}, max_degree)

    @classmethod
    def variable(cls, i: int, max_degree: int = 16):
        e = [0] * NVARS
        e[i] = 1
        return cls.from_terms({tuple(e): 1.0}, max_degree)

    @classmethod
    def linear_form(cls, row, max_degree: int = 16):
        """``sum_j row[j] * x_j``."""
        terms = {}
        for j, c in enumerate(row):
            if c != 0:
                e = [0] * NVARS
                e[j] = 1
                terms[tuple(e)] = c
        return cls.from_terms(terms, max_degree)

    @classmethod
    def zero(cls, max_degree: int = 16):
        return cls({}, max_degree)

    # inspection -----------------------------------------------------------
    @property
    def degrees(self) -> list[int]:
        return sorted(self._parts)

    def part(self, degree: int) -> tuple[np.ndarray, np.ndarray]:
        return self._parts.get(degree, (_EMPTY_KEYS, _EMPTY_COEFS))

    def homogeneous(self, degree: int) -> "SparsePoly":
        if degree not in self._parts:
            return SparsePoly.zero(self.max_degree)
        return SparsePoly({degree: self._parts[degree]}, self.max_degree)

    def truncate(self, max_degree: int) -> "SparsePoly":
        return SparsePoly(self._parts, max_degree)

    @property
    def nterms(self) -> int:
        return sum(len(k) for k, _ in self._parts.values())

    def count_by_degree(self) -> dict[int, int]:
        return {d: len(k) for d, (k, _) in sorted(self._parts.items())}

    def is_zero(self) -> bool:
        return not self._parts

    def terms(self) -> Iterator[tuple[tuple[int, ...], complex]]:
        for d in self.degrees:
            keys, coefs = self._parts[d]
            for k, c in zip(keys, coefs):
                yield unpack(int(k)), complex(c)

    def to_dict(self) -> dict[tuple[int, ...], complex]:
        return dict(self.terms())

    def coefficient(self, exps) -> complex:
        exps = tuple(exps)
        keys, coefs = self.part(sum(exps))
        k = pack(exps)
        i = np.searchsorted(keys, k)
        if i < len(keys) and keys[i] == k:
            return complex(coefs[i])
        return 0j

    def max_abs(self) -> float:
        return max((float(np.abs(c).max()) for _, c in self._parts.values()), default=0.0)

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """All keys and coefficients, degree by degree."""
        if not self._parts:
            return _EMPTY_KEYS, _EMPTY_COEFS
        ks, cs = zip(*(self._parts[d] for d in self.degrees))
        return np.concatenate(ks), np.concatenate(cs)

    def __repr__(self) -> str:
        counts = ", ".join(f"{d}:{n}" for d, n in self.count_by_degree().items())
        return f"SparsePoly(max_degree={self.max_degree}, terms={{{counts}}})"

    def __str__(self) -> str:
        pieces = []
        for exps, c in self.terms():
            mono = "*".join(f"{VARIABLE_NAMES[i]}^{e}" if e > 1 else VARIABLE_NAMES[i]
                            for i, e in enumerate(exps) if e)
            pieces.append(f"({c:.6g})" + (f"*{mono}" if mono else ""))
        return " + ".join(pieces) or "0"

    # arithmetic -----------------------------------------------------------
    def _combine(self, other: "SparsePoly", sign: float) -> "SparsePoly":
        parts = {}
        for d in set(self._parts) | set(other._parts):
            ka, ca = self.part(d)
            kb, cb = other.part(d)
            parts[d] = (np.concatenate([ka, kb]), np.concatenate([ca, sign * cb]))
        return SparsePoly(parts, max(self.max_degree, other.max_degree))

    def __add__(self, other):
        if not isinstance(other, SparsePoly):
            other = SparsePoly.constant(other, self.max_degree)
        return self._combine(other, 1.0)

    __radd__ = __add__

    def __sub__(self, other):
        if not isinstance(other, SparsePoly):
            other = SparsePoly.constant(other, self.max_degree)
        return self._combine(other, -1.0)

    def __neg__(self):
        return self.scale(-1.0)

    def scale(self, c: complex) -> "SparsePoly":
        return SparsePoly({d: (k, v * c) for d, (k, v) in self._parts.items()}, self.max_degree)

    def __mul__(self, other):
        if isinstance(other, SparsePoly):
            return mul_truncated(self, other, max(self.max_degree, other.max_degree))
        return self.scale(other)

    def __rmul__(self, other):
        return self.scale(other)

    def __truediv__(self, c):
        return self.scale(1.0 / c)

    def conj(self) -> "SparsePoly":
        return SparsePoly({d: (k, np.conj(v)) for d, (k, v) in self._parts.items()}, self.max_degree)

    def map_coefficients(self, fn) -> "SparsePoly":
        """Apply ``fn(exps, coefs) -> coefs`` to each degree part."""
        parts = {}
        for d, (k, v) in self._parts.items():
            parts[d] = (k, fn(unpack_array(k), v))
        return SparsePoly(parts, self.max_degree)

    def select(self, predicate) -> "SparsePoly":
        """Keep the terms whose exponent rows satisfy ``predicate(exps) -> bool mask``."""
        parts = {}
        for d, (k, v) in self._parts.items():
            mask = np.asarray(predicate(unpack_array(k)), dtype=bool)
            parts[d] = (k[mask], v[mask])
        return SparsePoly(parts, self.max_degree)

    # calculus -------------------------------------------------------------
    def derivative(self, i: int) -> "SparsePoly":
        parts = {}
        unit = 1 << (8 * (NVARS - 1 - i))
        for d, (k, v) in self._parts.items():
            e = unpack_array(k)[:, i]
            nz = e > 0
            if nz.any():
                parts[d - 1] = (k[nz] - unit, v[nz] * e[nz])
        return SparsePoly(parts, self.max_degree)

    def gradient(self) -> list["SparsePoly"]:
        return [self.derivative(i) for i in range(NVARS)]

    # evaluation -----------------------------------------------------------
    def evaluate(self, x) -> complex:
        return evaluate(self, x)

    def __call__(self, x) -> complex:
        return evaluate(self, x)

    # serialization --------------------------------------------------------
    def to_json_obj(self) -> dict:
        terms = [[*exps, c.real, c.imag] for exps, c in self.terms()]
        return {"max_degree": self.max_degree, "terms": terms}

    @classmethod
    def from_json_obj(cls, obj: dict) -> "SparsePoly":
        terms = {tuple(int(e) for e in t[:NVARS]): complex(t[NVARS], t[NVARS + 1])
                 for t in obj["terms"]}
        return cls.from_terms(terms, obj["max_degree"])

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj())

    @classmethod
    def from_json(cls, text: str) -> "SparsePoly":
        return cls.from_json_obj(json.loads(text))

    def to_arrays(self) -> dict[str, np.ndarray]:
        keys, coefs = self.arrays()
        return {"keys": keys, "coefs": coefs, "max_degree": np.array(self.max_degree)}

    @classmethod
    def from_arrays(cls, keys, coefs, max_degree) -> "SparsePoly":
        keys = np.asarray(keys, dtype=np.int64)
        coefs = np.asarray(coefs, dtype=complex)
        deg = key_degree(keys) if len(keys) else np.zeros(0, dtype=int)
        return cls({int(d): (keys[deg == d], coefs[deg == d]) for d in np.unique(deg)},
                   int(max_degree))


def add(p: SparsePoly, q: SparsePoly) -> SparsePoly:
    return p + q


def mul_truncated(p: SparsePoly, q: SparsePoly, N: int) -> SparsePoly:
    """Product of ``p`` and ``q`` without forming any term of degree above ``N``."""
    dense: dict[int, np.ndarray] = {}
    for da in p.degrees:
        ka, ca = p.part(da)
        for db in q.degrees:
            d = da + db
            if d > N:
                continue
            kb, cb = q.part(db)
            out = dense.get(d)
            if out is None:
                out = dense[d] = np.zeros(len(degree_keys(d)), dtype=complex)
            kernels.mul_into(ka, ca, kb, cb, degree_keys(d), out)
    return SparsePoly({d: _from_dense(d, v) for d, v in dense.items()}, N)


def poisson_bracket(p: SparsePoly, q: SparsePoly, N: int) -> SparsePoly:
    """``{p, q} = sum_k dp/dq_k dq/dp_k - dp/dp_k dq/dq_k`` truncated at ``N``."""
    dense: dict[int, np.ndarray] = {}
    for da in p.degrees:
        ka, ca = p.part(da)
        for db in q.degrees:
            d = da + db - 2
            if d > N or d < 0:
                continue
            kb, cb = q.part(db)
            out = dense.get(d)
            if out is None:
                out = dense[d] = np.zeros(len(degree_keys(d)), dtype=complex)
            kernels.bracket_into(ka, ca, kb, cb, degree_keys(d), out)
    return SparsePoly({d: _from_dense(d, v) for d, v in dense.items()}, N)


def lie_series_apply(f: SparsePoly, G: SparsePoly, N: int) -> SparsePoly:
    """``f + {f,G} + {{f,G},G}/2! + ...`` truncated at degree ``N``.

    With ``G`` homogeneous of degree ``n >= 3`` every bracket raises the
    lowest degree by ``n - 2``, so the series ends once a bracket is empty.
    """
    if G.is_zero():
        return f.truncate(N)
    if min(G.degrees) < 3:
        raise ValueError("generating function must have degree >= 3")
    result = f.truncate(N)
    term = result
    k = 0
    while True:
        k += 1
        term = poisson_bracket(term, G, N).scale(1.0 / k)
        if term.is_zero():
            return result
        result = result + term


def substitute_linear(p: SparsePoly, M, N: int | None = None) -> SparsePoly:
    """``p(M x)`` re-expanded and truncated at ``N`` (default: ``p.max_degree``).

    Nested Horner evaluation in polynomial arithmetic, one variable at a time.
    """
    N = p.max_degree if N is None else N
    M = np.asarray(M, dtype=complex)
    forms = [SparsePoly.linear_form(M[i], N) for i in range(NVARS)]
    keys, coefs = p.arrays()
    if len(keys) == 0:
        return SparsePoly.zero(N)
    exps = unpack_array(keys)

    def horner(rows: np.ndarray, var: int) -> SparsePoly:
        if var == NVARS:
            return SparsePoly.constant(coefs[rows].sum(), N)
        powers = exps[rows, var]
        result = None
        for k in range(int(powers.max()), -1, -1):
            sel = rows[powers == k]
            inner = horner(sel, var + 1) if len(sel) else None
            if result is None:
                result = inner
            else:
                result = mul_truncated(result, forms[var], N)
                if inner is not None:
                    result = result + inner
        return result if result is not None else SparsePoly.zero(N)

    return horner(np.arange(len(keys)), 0)


def realify_check(p: SparsePoly) -> float:
    """Largest imaginary coefficient magnitude."""
    return max((float(np.abs(c.imag).max()) for _, c in p._parts.values()), default=0.0)


def real_part(p: SparsePoly) -> SparsePoly:
    return SparsePoly({d: (k, v.real.astype(complex)) for d, (k, v) in p._parts.items()},
                      p.max_degree)


def evaluate(p: SparsePoly, x) -> complex:
    """Value of ``p`` at the complex 6-vector ``x`` (compensated summation)."""
    if p._evaluator is None:
        p._evaluator = PolyMap([p])
    return complex(p._evaluator(x)[0])


class PolyMap:
    """Several polynomials compiled against one monomial table.

    Calling the map at ``x`` returns the vector of polynomial values; all
    monomials are formed once and shared.
    """

    def __init__(self, polys: list[SparsePoly]):
        maxdeg = max([max(p.degrees, default=0) for p in polys] + [0])
        table = monomial_table(maxdeg)
        self.parent, self.var, self.offsets = table.parent, table.var, table.offsets
        gidx, coef, slot = [], [], []
        for s, p in enumerate(polys):
            keys, coefs = p.arrays()
            gidx.append(table.global_index(keys))
            coef.append(coefs)
            slot.append(np.full(len(keys), s, dtype=np.int64))
        self.gidx = np.ascontiguousarray(np.concatenate(gidx) if gidx else _EMPTY_KEYS)
        self.coef = np.ascontiguousarray(np.concatenate(coef) if coef else _EMPTY_COEFS)
        self.slot = np.ascontiguousarray(np.concatenate(slot) if slot else _EMPTY_KEYS)
        self.nslots = len(polys)

    def __call__(self, x) -> np.ndarray:
        return kernels.eval_slots(np.asarray(x, dtype=complex), self.parent, self.var,
                                  self.offsets, self.gidx, self.coef, self.slot, self.nslots)


class FlowField:
    """Gradient and Hessian of a polynomial Hamiltonian, compiled for the flow kernel.

    The flow is taken in real coordinates ``x`` related to the polynomial's
    own (possibly complex) coordinates by ``c = M x`` with ``M`` symplectic.
    """

    def __init__(self, G: SparsePoly, M=None):
        self.M = np.eye(NVARS, dtype=complex) if M is None else np.asarray(M, dtype=complex)
        maxdeg = max(max(G.degrees, default=1) - 1, 0)
        table = monomial_table(maxdeg)
        self.parent, self.var, self.offsets = table.parent, table.var, table.offsets
        gidx, coef, slot = [], [], []
        keys, coefs = G.arrays()
        exps = unpack_array(keys)
        units = [1 << (8 * (NVARS - 1 - i)) for i in range(NVARS)]
        for i in range(NVARS):
            nz = exps[:, i] > 0
            gidx.append(table.global_index(keys[nz] - units[i]))
            coef.append(coefs[nz] * exps[nz, i])
            slot.append(np.full(nz.sum(), i, dtype=np.int64))
        for i in range(NVARS):
            for j in range(i, NVARS):
                if i == j:
                    f = exps[:, i] * (exps[:, i] - 1)
                else:
                    f = exps[:, i] * exps[:, j]
                nz = f > 0
                gidx.append(table.global_index(keys[nz] - units[i] - units[j]))
                coef.append(coefs[nz] * f[nz])
                slot.append(np.full(nz.sum(), kernels.HESS_SLOT[i, j], dtype=np.int64))
        self.gidx = np.ascontiguousarray(np.concatenate(gidx))
        self.coef = np.ascontiguousarray(np.concatenate(coef))
        self.slot = np.ascontiguousarray(np.concatenate(slot))

    def gradient_hessian(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Real-coordinate gradient and Hessian at real ``x``."""
        c = self.M @ np.asarray(x, dtype=float)
        acc = kernels.eval_slots(c, self.parent, self.var, self.offsets, self.gidx,
                                 self.coef, self.slot, kernels.NSLOTS_FIELD)
        g = (self.M.T @ acc[:6]).real
        h = (self.M.T @ acc[kernels.HESS_SLOT] @ self.M).real
        return g, h

    def flow(self, x0, sign: float = 1.0, t_end: float = 1.0, rtol: float = 1e-13,
             atol: float = 1e-15, with_stm: bool = False, max_steps: int = 2000,
             norm_cap: float = 50.0, backend=None):
        """Integrate ``xdot = sign * J grad G`` from 0 to ``t_end``.

        Returns ``(x1, Phi, nsteps, status)``; see :mod:`cislunar_nf.kernels`.
        """
        impl = kernels if backend is None else kernels.backend(backend)
        return impl.flow(np.asarray(x0, dtype=float), self.M, self.parent, self.var,
                         self.offsets, self.gidx, self.coef, self.slot, float(sign),
                         float(t_end), rtol, atol, bool(with_stm), int(max_steps),
                         float(norm_cap))


def conjugate_symmetry_residual(p: SparsePoly) -> float:
    """Departure of ``p`` from realness in the complexified coordinates.

    With ``q_j = (y_j - i p_j)/sqrt2``, ``p_j = (-i y_j + p_j)/sqrt2`` for the
    two elliptic pairs, a polynomial is real on real states iff swapping the
    ``q_j``/``p_j`` exponents of an elliptic pair maps each coefficient to its
    conjugate times ``i**(a_j + b_j)``.  Returns the largest violation.
    """
    worst = 0.0
    for d in p.degrees:
        keys, coefs = p.part(d)
        exps = unpack_array(keys)
        swapped = exps.copy()
        swapped[:, [1, 2, 4, 5]] = exps[:, [4, 5, 1, 2]]
        skeys = (swapped << np.array([40, 32, 24, 16, 8, 0])[None, :]).sum(axis=1)
        idx = np.searchsorted(keys, skeys)
        idx = np.minimum(idx, len(keys) - 1)
        found = keys[idx] == skeys
        partner = np.where(found, coefs[idx], 0)
        power = exps[:, [1, 2, 4, 5]].sum(axis=1)
        expected = np.conj(coefs) * (1j ** power)
        worst = max(worst, float(np.abs(partner - expected).max()))
    return worst


def binomial(n: int, k: int) -> int:
    return math.comb(n, k)
