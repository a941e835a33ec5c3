"""Expansion of the three-body Hamiltonian about a collinear point and its
reduction to Birkhoff or resonant normal form by Lie series.

Coordinate chain (all maps act on column vectors):

* local ``x_l = (X, Y, Z, PX, PY, PZ)``: origin at the libration point,
  lengths scaled by ``gamma``; the Hamiltonian is divided by ``gamma**2``;
* real diagonal ``x_qp`` with ``x_l = C x_qp``;
* complex diagonal ``c = (q1, q2, q3, p1, p2, p3)`` with ``x_qp = B c``,
  where ``q_j = (y_j - i p_j)/sqrt2`` and ``p_j = (-i y_j + p_j)/sqrt2`` on
  the two elliptic pairs.  The quadratic part becomes
  ``lambda q1 p1 + i w1 q2 p2 + i w2 q3 p3``.
"""
from __future__ import annotations

import io
import json
import logging
import time
import zipfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import polyalg
from ._monomials import NVARS, unpack_array
from .dynamics import SystemParams
from .polyalg import SparsePoly, lie_series_apply, mul_truncated, substitute_linear

log = logging.getLogger(__name__)

KINDS = ("birkhoff", "resonant")
SCHEMA_VERSION = 1
SMALL_DIVISOR_FLOOR = 1e-4
NEAR_RESONANCE_LOG = 0.2

J6 = np.block([[np.zeros((3, 3)), np.eye(3)], [-np.eye(3), np.zeros((3, 3))]])

_S2 = np.sqrt(2.0)
#: x_qp = B c
B_MATRIX = np.array([
    [_S2, 0, 0, 0, 0, 0],
    [0, 1, 0, 0, 1j, 0],
    [0, 0, 1, 0, 0, 1j],
    [0, 0, 0, _S2, 0, 0],
    [0, 1j, 0, 0, 1, 0],
    [0, 0, 1j, 0, 0, 1],
], dtype=complex) / _S2
#: c = B_INV x_qp
B_INV = np.linalg.inv(B_MATRIX)


class SmallDivisorError(ArithmeticError):
    """A removed monomial has a divisor below the floor."""

    def __init__(self, exps, divisor):
        self.exponents = tuple(int(e) for e in exps)
        self.divisor = complex(divisor)
        super().__init__(f"divisor {abs(divisor):.3e} below floor at monomial {self.exponents}")


def normalize_kind(kind: str) -> str:
    k = kind.lower()
    if k not in KINDS:
        raise ValueError(f"unknown normal form kind {kind!r}")
    return k


# --------------------------------------------------------------------------
# expansion

def expansion_coefficients(params: SystemParams, N: int) -> np.ndarray:
    """``c_n`` for ``n = 0..N`` (entries 0 and 1 unused).

    Each primary of mass ``m`` at signed offset ``d`` from the point
    contributes ``m s**n gamma**(n+1) / |d|**(n+1) / gamma**3`` with
    ``s = delta * sign(d)``.
    """
    mu, g, d = params.mu, params.gamma, params.delta
    xl = params.x_point
    c = np.zeros(N + 1)
    n = np.arange(N + 1)
    for m, xp in ((1.0 - mu, -mu), (mu, 1.0 - mu)):
        off = xp - xl
        s = d * np.sign(off)
        c += m * s ** n * (g / abs(off)) ** (n + 1) / g ** 3
    return c


def legendre_terms(X: SparsePoly, rho2: SparsePoly, N: int) -> list[SparsePoly]:
    """``rho**n P_n(X/rho)`` for ``n = 0..N`` by the three-term recurrence."""
    T = [SparsePoly.constant(1.0, N), X.truncate(N)]
    for n in range(2, N + 1):
        a = mul_truncated(X, T[n - 1], N).scale((2 * n - 1) / n)
        b = mul_truncated(rho2, T[n - 2], N).scale((n - 1) / n)
        T.append(a - b)
    return T


def _kinetic(N: int) -> SparsePoly:
    """``(PX^2 + PY^2 + PZ^2)/2 + Y PX - X PY``."""
    e = np.eye(NVARS, dtype=int)
    terms = {tuple(2 * e[3]): 0.5, tuple(2 * e[4]): 0.5, tuple(2 * e[5]): 0.5,
             tuple(e[1] + e[3]): 1.0, tuple(e[0] + e[4]): -1.0}
    return SparsePoly.from_terms(terms, N)


@dataclass
class HamiltonianExpansion:
    params: SystemParams
    order: int
    c: np.ndarray
    H: SparsePoly

    @property
    def H_parts(self) -> dict[int, SparsePoly]:
        return {d: self.H.homogeneous(d) for d in self.H.degrees}


def expand_hamiltonian(params: SystemParams, N: int) -> HamiltonianExpansion:
    """Hamiltonian in local variables through degree ``N``."""
    if N < 3:
        raise ValueError("expansion order must be at least 3")
    c = expansion_coefficients(params, N)
    H = _potential_part(SparsePoly.variable(0, N), _rho2(np.eye(NVARS), N), c, N)
    return HamiltonianExpansion(params, N, c, _kinetic(N) + H)


def _rho2(K, N):
    out = SparsePoly.zero(N)
    for i in range(3):
        f = SparsePoly.linear_form(K[i], N)
        out = out + mul_truncated(f, f, N)
    return out


def _potential_part(X, rho2, c, N):
    T = legendre_terms(X, rho2, N)
    out = SparsePoly.zero(N)
    for n in range(2, N + 1):
        out = out - T[n].scale(c[n])
    return out


def hamiltonian_rtb_scaled(x_l, params: SystemParams) -> float:
    """Exact local Hamiltonian: the rotating-frame one over ``gamma**2`` with the
    equilibrium value removed.  Oracle for the polynomial expansion."""
    g, d, mu, xl = params.gamma, params.delta, params.mu, params.x_point

    def h(v):
        X, Y, Z, PX, PY, PZ = v
        x, y, z = d * g * X + xl, d * g * Y, g * Z
        px, py, pz = d * g * PX, d * g * PY + xl, g * PZ
        r1 = np.sqrt((x + mu) ** 2 + y * y + z * z)
        r2 = np.sqrt((x - 1 + mu) ** 2 + y * y + z * z)
        return 0.5 * (px * px + py * py + pz * pz) + y * px - x * py - (1 - mu) / r1 - mu / r2

    return (h(x_l) - h(np.zeros(6))) / g ** 2


# --------------------------------------------------------------------------
# linear stage

@dataclass(frozen=True)
class LinearData:
    """Symplectic diagonalization of the quadratic part.

    ``x_l = C x_qp`` and in ``x_qp`` the quadratic Hamiltonian is
    ``lam x px + w1 (y^2 + py^2)/2 + w2 (z^2 + pz^2)/2``.
    """

    C: np.ndarray
    lam: float
    omega1: float
    omega2: float

    @property
    def zeta(self) -> np.ndarray:
        return np.array([self.lam, 1j * self.omega1, 1j * self.omega2])

    @property
    def C_inv(self) -> np.ndarray:
        return -J6 @ self.C.T @ J6


def quadratic_matrix(H2: SparsePoly) -> np.ndarray:
    """Symmetric ``S`` with ``H2 = x^T S x / 2``."""
    S = np.zeros((NVARS, NVARS))
    for exps, c in H2.homogeneous(2).terms():
        idx = [i for i, e in enumerate(exps) for _ in range(e)]
        i, j = idx
        if i == j:
            S[i, i] = 2.0 * c.real
        else:
            S[i, j] = S[j, i] = c.real
    return S


def diagonalize_quadratic(H2: SparsePoly) -> LinearData:
    """Columns of ``C`` from eigenvectors of ``J S``, symplectically normalized.

    Saddle pair: eigenvectors of ``+lam`` and ``-lam`` scaled so
    ``v+^T J v- = 1``.  Elliptic pairs: the eigenvector ``w`` of ``+i w`` gives
    ``(col_y, col_py) = (Re w, Im w)`` scaled so ``col_y^T J col_py = 1``.
    """
    S = quadratic_matrix(H2)
    A = J6 @ S
    ev, vec = np.linalg.eig(A)
    real = np.abs(ev.imag) < 1e-10 * np.abs(ev).max()
    if real.sum() != 2:
        raise ValueError("expected exactly one saddle pair")
    i_plus = int(np.flatnonzero(real)[np.argmax(ev.real[real])])
    i_minus = int(np.flatnonzero(real)[np.argmin(ev.real[real])])
    lam = float(ev[i_plus].real)
    vp, vm = vec[:, i_plus].real, vec[:, i_minus].real
    if vp[0] < 0:
        vp = -vp
    k = vp @ J6 @ vm
    if k == 0:
        raise ValueError("degenerate saddle eigenvectors")
    if k < 0:
        vm = -vm
        k = -k
    vp, vm = vp / np.sqrt(k), vm / np.sqrt(k)

    upper = np.flatnonzero(~real & (ev.imag > 0))
    cols = {}
    for i in upper:
        w = vec[:, i]
        vertical = np.abs(w[[0, 1, 3, 4]]).max() < 1e-10 * np.abs(w).max()
        if vertical:
            w = w * np.exp(-1j * np.angle(w[2]))  # Z-component real positive
        else:
            w = w * np.exp(-1j * (np.angle(w[0]) - np.pi / 2))  # X-component on +i axis
        cy, cpy = w.real.copy(), w.imag.copy()
        if vertical:
            cy[[0, 1, 3, 4]] = 0.0
            cpy[[0, 1, 3, 4]] = 0.0
        else:
            cy[[2, 5]] = 0.0
            cpy[[2, 5]] = 0.0
        k = cy @ J6 @ cpy
        if k <= 0:
            raise ValueError("non-positive symplectic normalization; eigenvectors mispaired")
        cols["z" if vertical else "y"] = (cy / np.sqrt(k), cpy / np.sqrt(k), float(ev[i].imag))
    if set(cols) != {"y", "z"}:
        raise ValueError("could not separate in-plane and vertical centers")
    cy, cpy, w1 = cols["y"]
    cz, cpz, w2 = cols["z"]
    C = np.column_stack([vp, cy, cz, vm, cpy, cpz])
    return LinearData(C, lam, w1, w2)


def complexify(H: SparsePoly, N: int | None = None) -> SparsePoly:
    """Express a polynomial in real diagonal variables in complex ones."""
    return substitute_linear(H, B_MATRIX, N)


def realify(Hc: SparsePoly, N: int | None = None) -> SparsePoly:
    """Inverse of :func:`complexify` (coefficients remain complex-typed)."""
    return substitute_linear(Hc, B_INV, N)


def complex_hamiltonian(params: SystemParams, N: int, linear: LinearData | None = None):
    """Hamiltonian directly in complex diagonal coordinates.

    The Legendre recurrence is run on ``X`` and ``rho**2`` already written in
    the complex variables, which avoids a costly substitution into the full
    degree-``N`` polynomial.
    """
    if linear is None:
        linear = diagonalize_quadratic(expand_hamiltonian(params, 3).H.homogeneous(2))
    c = expansion_coefficients(params, N)
    K = linear.C @ B_MATRIX  # x_l = K c
    X = SparsePoly.linear_form(K[0], N)
    H = substitute_linear(_kinetic(N), K, N) + _potential_part(X, _rho2(K, N), c, N)
    return H, linear


# --------------------------------------------------------------------------
# normalization

def retention_mask(kind: str, exps: np.ndarray) -> np.ndarray:
    """Which monomials (rows of exponents) stay in the normal form."""
    exps = np.atleast_2d(exps)
    kq, kp = exps[:, :3], exps[:, 3:]
    if normalize_kind(kind) == "birkhoff":
        return np.all(kq == kp, axis=1)
    return (kq[:, 0] == kp[:, 0]) & ((kp[:, 1] - kq[:, 1]) + (kp[:, 2] - kq[:, 2]) == 0)


def retention_rule(kind: str, m) -> bool:
    """``True`` when monomial ``m`` (six exponents) is kept."""
    return bool(retention_mask(kind, np.asarray(m, dtype=int)[None, :])[0])


def divisors(exps: np.ndarray, zeta) -> np.ndarray:
    """``<k_p - k_q, zeta>`` per row."""
    exps = np.atleast_2d(exps)
    return (exps[:, 3:] - exps[:, :3]) @ np.asarray(zeta)


@dataclass
class GeneratingFunction:
    G: SparsePoly
    min_divisor: float
    near_resonances: list = field(default_factory=list)


def build_generating_function(H_bad: SparsePoly, zeta, floor: float = SMALL_DIVISOR_FLOOR):
    """Solve the homological equation ``{H2, G} + H_bad = 0`` termwise."""
    parts = {}
    dmin = np.inf
    near = []
    for d in H_bad.degrees:
        keys, coefs = H_bad.part(d)
        exps = unpack_array(keys)
        div = divisors(exps, zeta)
        mag = np.abs(div)
        if len(mag):
            j = int(np.argmin(mag))
            if mag[j] < floor:
                raise SmallDivisorError(exps[j], div[j])
            dmin = min(dmin, float(mag[j]))
            for r in np.flatnonzero(mag < NEAR_RESONANCE_LOG):
                near.append((tuple(int(e) for e in exps[r]), float(mag[r])))
        parts[d] = (keys, -coefs / div)
    return GeneratingFunction(SparsePoly(parts, H_bad.max_degree), dmin, near)


def _split(Hn: SparsePoly, kind: str):
    keep = Hn.select(lambda e: retention_mask(kind, e))
    drop = Hn.select(lambda e: ~retention_mask(kind, e))
    return keep, drop


def _coordinate_polys(N: int) -> list[SparsePoly]:
    return [SparsePoly.variable(i, N) for i in range(NVARS)]


@dataclass
class NormalFormPackage:
    """Everything produced by one reduction.

    ``G[n]`` are the generating functions (complex variables).  ``T_fwd``
    maps complex diagonal coordinates to complex normal-form coordinates and
    ``T_inv`` maps back; both are six polynomials truncated at ``order``.
    """

    params: SystemParams
    kind: str
    order: int
    linear: LinearData
    G: dict[int, SparsePoly]
    H_nf: SparsePoly
    T_fwd: list[SparsePoly]
    T_inv: list[SparsePoly]
    min_divisor: float
    near_resonances: list = field(default_factory=list)
    build_seconds: float = 0.0

    def __post_init__(self):
        self._fwd_map = None
        self._inv_map = None
        self._fields = None
        self._aa = None

    # cached evaluators ----------------------------------------------------
    @property
    def fwd_map(self) -> polyalg.PolyMap:
        if self._fwd_map is None:
            self._fwd_map = polyalg.PolyMap(self.T_fwd)
        return self._fwd_map

    @property
    def inv_map(self) -> polyalg.PolyMap:
        if self._inv_map is None:
            self._inv_map = polyalg.PolyMap(self.T_inv)
        return self._inv_map

    @property
    def flow_fields(self) -> list[tuple[int, polyalg.FlowField]]:
        """Realified generating-function fields, ordered ``n = 3..N``."""
        if self._fields is None:
            self._fields = [(n, polyalg.FlowField(self.G[n], B_INV)) for n in sorted(self.G)]
        return self._fields

    @property
    def action_terms(self) -> "ActionTerms":
        if self._aa is None:
            self._aa = ActionTerms.from_hamiltonian(self.H_nf)
        return self._aa

    def key(self) -> dict:
        return {"mu": self.params.mu, "point": self.params.point, "kind": self.kind,
                "order": self.order}

    def term_counts(self) -> dict[str, dict[int, int]]:
        return {"H_nf": self.H_nf.count_by_degree(),
                "G": {n: g.nterms for n, g in sorted(self.G.items())}}

    # serialization --------------------------------------------------------
    def save(self, path) -> Path:
        """Write a versioned ``.npz`` cache file (atomically)."""
        path = Path(path)
        meta = {
            "schema": SCHEMA_VERSION, **self.key(),
            "gamma": self.params.gamma, "a": self.params.a, "delta": self.params.delta,
            "lam": self.linear.lam, "omega1": self.linear.omega1, "omega2": self.linear.omega2,
            "min_divisor": self.min_divisor,
            "near_resonances": [[list(e), d] for e, d in self.near_resonances],
        }
        arrays = {"meta": np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8),
                  "C": self.linear.C}
        for name, poly in self._named_polys():
            keys, coefs = poly.arrays()
            arrays[f"{name}_keys"] = keys
            arrays[f"{name}_coefs"] = coefs
        buf = io.BytesIO()
        # fixed timestamps keep identical packages byte-identical on disk
        with zipfile.ZipFile(buf, "w", zipfile.ZIP_STORED) as zf:
            for name, arr in arrays.items():
                with zf.open(zipfile.ZipInfo(f"{name}.npy", date_time=(1980, 1, 1, 0, 0, 0)), "w") as fh:
                    np.lib.format.write_array(fh, np.ascontiguousarray(arr), allow_pickle=False)
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_bytes(buf.getvalue())
        tmp.replace(path)
        return path

    def _named_polys(self):
        yield "H_nf", self.H_nf
        for n in sorted(self.G):
            yield f"G{n}", self.G[n]
        for i, p in enumerate(self.T_fwd):
            yield f"Tf{i}", p
        for i, p in enumerate(self.T_inv):
            yield f"Ti{i}", p

    @classmethod
    def load(cls, path, expect: dict | None = None) -> "NormalFormPackage":
        """Read a cache file; ``expect`` entries must match the stored key."""
        with np.load(path) as z:
            meta = json.loads(bytes(z["meta"]).decode())
            if meta.get("schema") != SCHEMA_VERSION:
                raise CacheMismatch(f"cache schema {meta.get('schema')} != {SCHEMA_VERSION}")
            for k, v in (expect or {}).items():
                if meta.get(k) != v:
                    raise CacheMismatch(f"cache {k}={meta.get(k)!r}, expected {v!r}")
            N = meta["order"]

            def poly(name):
                return SparsePoly.from_arrays(z[f"{name}_keys"], z[f"{name}_coefs"], N)

            params = SystemParams(meta["mu"], meta["point"], meta["gamma"], meta["a"], meta["delta"])
            linear = LinearData(np.array(z["C"]), meta["lam"], meta["omega1"], meta["omega2"])
            G = {n: poly(f"G{n}") for n in range(3, N + 1)}
            return cls(params, meta["kind"], N, linear, G, poly("H_nf"),
                       [poly(f"Tf{i}") for i in range(NVARS)],
                       [poly(f"Ti{i}") for i in range(NVARS)],
                       meta["min_divisor"],
                       [(tuple(e), d) for e, d in meta["near_resonances"]])


class CacheMismatch(ValueError):
    """A cached package does not match the requested build key."""


def reduce(params: SystemParams, kind: str, N: int, transforms: bool = True) -> NormalFormPackage:
    """Normalize the Hamiltonian about ``params.point`` through degree ``N``.

    For ``n = 3..N`` the degree-``n`` part is split by the retention rule, the
    generating function ``G_n`` removes the rest, and the Lie series with
    ``G_n`` is applied to the whole Hamiltonian.  With ``transforms`` the
    coordinate polynomials ``T_fwd`` (``-G_N`` first, ``-G_3`` last) and
    ``T_inv`` (``G_3`` first) are accumulated as well.
    """
    kind = normalize_kind(kind)
    if not 3 <= N <= 32:
        raise ValueError("order must lie in [3, 32]")
    t0 = time.perf_counter()
    H, linear = complex_hamiltonian(params, N)
    zeta = linear.zeta
    G: dict[int, SparsePoly] = {}
    dmin = np.inf
    near = []
    for n in range(3, N + 1):
        keep, drop = _split(H.homogeneous(n), kind)
        gf = build_generating_function(drop, zeta)
        dmin = min(dmin, gf.min_divisor)
        near.extend(gf.near_resonances)
        G[n] = gf.G
        H = lie_series_apply(H, gf.G, N)
        # the removed part cancels to round-off; drop the residue exactly
        parts = {d: H.part(d) for d in H.degrees if d != n}
        if not keep.is_zero():
            parts[n] = keep.part(n)
        H = SparsePoly(parts, N)
        log.debug("degree %d: removed %d terms, kept %d", n, drop.nterms, keep.nterms)
    H_nf = H.select(lambda e: retention_mask(kind, e))
    if transforms:
        T_inv = _coordinate_polys(N)
        for n in range(3, N + 1):
            T_inv = [lie_series_apply(p, G[n], N) for p in T_inv]
        T_fwd = _coordinate_polys(N)
        for n in range(N, 2, -1):
            T_fwd = [lie_series_apply(p, G[n].scale(-1.0), N) for p in T_fwd]
    else:
        T_inv = T_fwd = _coordinate_polys(N)
    return NormalFormPackage(params, kind, N, linear, G, H_nf, T_fwd, T_inv, dmin, near,
                             time.perf_counter() - t0)


# --------------------------------------------------------------------------
# action-angle form

@dataclass
class ActionTerms:
    """Normal-form Hamiltonian as ``sum coef I1^e1 I2^e2 I3^e3 exp(i k theta2)``.

    A monomial ``q^a p^b`` maps through ``q1 p1 = I1``,
    ``q_j = sqrt(I_j) exp(i phi_j)`` and ``p_j = -i sqrt(I_j) exp(-i phi_j)``
    (``j = 2, 3``); retained terms depend on the angles only through
    ``theta2 = phi2 - phi3`` with ``k = a2 - b2``.  The z-reflection symmetry
    makes every exponent an integer and every ``k`` even.  The sum is real
    on real actions and angles; its real part is returned.
    """

    coef: np.ndarray
    e: np.ndarray  # (n, 3) integer action exponents
    k: np.ndarray

    @classmethod
    def from_hamiltonian(cls, H: SparsePoly) -> "ActionTerms":
        keys, coefs = H.arrays()
        if len(keys) == 0:
            return cls(np.zeros(0, complex), np.zeros((0, 3), int), np.zeros(0, int))
        ex = unpack_array(keys)
        a, b = ex[:, :3], ex[:, 3:]
        if np.any(a[:, 0] != b[:, 0]):
            raise ValueError("saddle pair must appear through q1 p1 only")
        k = a[:, 1] - b[:, 1]
        if np.any(a[:, 2] - b[:, 2] != -k):
            raise ValueError("terms depend on angles other than phi2 - phi3")
        if np.any((a[:, 1] + b[:, 1]) % 2) or np.any((a[:, 2] + b[:, 2]) % 2):
            raise ValueError("odd power of an elliptic pair; z-symmetry broken")
        e = np.column_stack([a[:, 0], (a[:, 1] + b[:, 1]) // 2, (a[:, 2] + b[:, 2]) // 2])
        coef = coefs * (-1j) ** (b[:, 1] + b[:, 2])
        return cls(coef, e, k)

    @property
    def is_integrable(self) -> bool:
        return not np.any(self.k)

    def _monomials(self, I):
        return np.prod(np.asarray(I, dtype=float)[None, :] ** self.e, axis=1)

    def complex_value(self, I, theta2: float = 0.0) -> complex:
        return complex(np.sum(self.coef * self._monomials(I) * np.exp(1j * self.k * theta2)))

    def value(self, I, theta2: float = 0.0) -> float:
        """``H(I1, I2, I3, theta2)`` in Birkhoff actions."""
        return self.complex_value(I, theta2).real

    def gradient(self, I, theta2: float = 0.0) -> tuple[np.ndarray, float]:
        """``(dH/dI1, dH/dI2, dH/dI3)`` and ``dH/dtheta2``."""
        I = np.asarray(I, dtype=float)
        phase = self.coef * np.exp(1j * self.k * theta2)
        grad = np.zeros(3)
        for j in range(3):
            e = self.e.copy()
            fac = e[:, j].astype(float)
            e[:, j] = np.maximum(e[:, j] - 1, 0)
            grad[j] = np.sum(phase * fac * np.prod(I[None, :] ** e, axis=1)).real
        dth = np.sum(1j * self.k * phase * self._monomials(I)).real
        return grad, float(dth)


def inverse_chain(pkg: NormalFormPackage, order: int) -> polyalg.PolyMap:
    """Normal-form to diagonal coordinates by the ``+G`` chain truncated at
    ``order``, which may exceed the build order."""
    T = _coordinate_polys(order)
    for n in sorted(pkg.G):
        T = [lie_series_apply(p, pkg.G[n], order) for p in T]
    return polyalg.PolyMap(T)


def hamiltonian_transform_discrepancy(pkg: NormalFormPackage, H_full: SparsePoly, c_nf,
                                      chain: polyalg.PolyMap | None = None) -> float:
    """``|H_full(T_inv(c)) - H_nf(c)|`` at complex normal-form point ``c``.

    ``chain`` replaces the stored ``T_inv``; pass :func:`inverse_chain` at a
    higher order so the truncation of the map does not mask the residual
    of the normalized Hamiltonian.
    """
    c2 = (chain or pkg.inv_map)(c_nf)
    return abs(H_full(c2) - pkg.H_nf(c_nf))
