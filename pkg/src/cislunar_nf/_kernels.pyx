# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: graded products, Poisson brackets, polynomial
evaluation and the polynomial Hamiltonian flow integrator."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, pow, isfinite
from scipy.integrate._ivp import dop853_coefficients as _dop

ctypedef cnp.int64_t i64

cdef enum:
    NST = 12
    BITS = 8
    MASK = 255

cdef double _A[NST][NST]
cdef double _B[NST]
cdef double _E3[NST + 1]
cdef double _E5[NST + 1]

_a = np.asarray(_dop.A, dtype=float)
for _i in range(NST):
    for _j in range(NST):
        _A[_i][_j] = _a[_i, _j]
    _B[_i] = _dop.B[_i]
for _i in range(NST + 1):
    _E3[_i] = _dop.E3[_i]
    _E5[_i] = _dop.E5[_i]

cdef int _HSLOT[6][6]
_s = 6
for _i in range(6):
    for _j in range(_i, 6):
        _HSLOT[_i][_j] = _s
        _HSLOT[_j][_i] = _s
        _s += 1


cdef enum:
    BINOM_ROWS = 160

cdef i64 _BINOM[BINOM_ROWS][7]
for _i in range(BINOM_ROWS):
    for _j in range(7):
        if _j == 0:
            _BINOM[_i][_j] = 1
        elif _i == 0:
            _BINOM[_i][_j] = 0
        else:
            _BINOM[_i][_j] = _BINOM[_i - 1][_j - 1] + _BINOM[_i - 1][_j]


cdef inline Py_ssize_t _lexrank(i64 key, int d) noexcept nogil:
    """Rank of a packed monomial among all monomials of degree ``d`` in
    ascending key order (combinatorial number system)."""
    cdef Py_ssize_t rank = 0
    cdef int k, m, e, r = d
    for k in range(5):
        e = (key >> (BITS * (5 - k))) & MASK
        m = 5 - k
        rank += _BINOM[r + m][m] - _BINOM[r - e + m][m]
        r -= e
    return rank


cdef int _target_degree(const i64[::1] tkeys):
    """Degree of a complete sorted key list; raises if the list is partial."""
    cdef int k, d = 0
    if tkeys.shape[0] == 0:
        raise ValueError("empty target key list")
    for k in range(6):
        d += (tkeys[0] >> (BITS * (5 - k))) & MASK
    if d + 5 >= BINOM_ROWS or tkeys.shape[0] != _BINOM[d + 5][5]:
        raise ValueError("target keys must list every monomial of one degree")
    return d


def mul_into(const i64[::1] ka, const double complex[::1] ca,
             const i64[::1] kb, const double complex[::1] cb,
             const i64[::1] tkeys, double complex[::1] out):
    cdef Py_ssize_t i, j, na = ka.shape[0], nb = kb.shape[0]
    cdef double complex a
    cdef int d
    if na == 0 or nb == 0:
        return
    d = _target_degree(tkeys)
    with nogil:
        for i in range(na):
            a = ca[i]
            for j in range(nb):
                out[_lexrank(ka[i] + kb[j], d)] += a * cb[j]


def bracket_into(const i64[::1] ka, const double complex[::1] ca,
                 const i64[::1] kb, const double complex[::1] cb,
                 const i64[::1] tkeys, double complex[::1] out):
    cdef Py_ssize_t i, j, k, na = ka.shape[0], nb = kb.shape[0]
    cdef long ea[6]
    cdef long f
    cdef i64 unit[6]
    cdef double complex a
    cdef int d
    if na == 0 or nb == 0:
        return
    d = _target_degree(tkeys)
    eb_arr = ((np.asarray(kb)[:, None] >> (BITS * np.arange(5, -1, -1))[None, :]) & MASK).astype(np.int64)
    cdef const i64[:, ::1] eb = np.ascontiguousarray(eb_arr)
    for k in range(6):
        unit[k] = (<i64>1) << (BITS * (5 - k))
    with nogil:
        for i in range(na):
            for k in range(6):
                ea[k] = (ka[i] >> (BITS * (5 - k))) & MASK
            a = ca[i]
            for j in range(nb):
                for k in range(3):
                    f = ea[k] * eb[j, k + 3] - ea[k + 3] * eb[j, k]
                    if f != 0:
                        out[_lexrank(ka[i] + kb[j] - unit[k] - unit[k + 3], d)] += f * a * cb[j]


cdef inline void _monomials(const double complex* x, const i64* parent, const i64* var,
                            Py_ssize_t nmono, double complex* vals) noexcept nogil:
    cdef Py_ssize_t m
    vals[0] = 1.0
    for m in range(1, nmono):
        vals[m] = vals[parent[m]] * x[var[m]]


def eval_slots(x, const i64[::1] parent, const i64[::1] var, const i64[::1] offsets,
               const i64[::1] gidx, const double complex[::1] coef, const i64[::1] slot,
               Py_ssize_t nslots):
    """Compensated (Neumaier) evaluation of several polynomials at ``x``."""
    cdef double complex xc[6]
    cdef Py_ssize_t t, s, nmono = offsets[offsets.shape[0] - 1], nt = gidx.shape[0]
    cdef double complex v, tot
    cdef double complex[::1] out = np.zeros(nslots, dtype=complex)
    cdef double complex[::1] comp = np.zeros(nslots, dtype=complex)
    cdef double complex[::1] vals = np.empty(nmono, dtype=complex)
    cdef double tr, ti
    xx = np.asarray(x, dtype=complex)
    for t in range(6):
        xc[t] = xx[t]
    if nt == 0:
        return np.asarray(out)
    with nogil:
        _monomials(xc, &parent[0], &var[0], nmono, &vals[0])
        for t in range(nt):
            s = slot[t]
            v = coef[t] * vals[gidx[t]]
            tot = out[s] + v
            # Neumaier on real and imaginary parts separately
            if fabs(out[s].real) >= fabs(v.real):
                tr = (out[s].real - tot.real) + v.real
            else:
                tr = (v.real - tot.real) + out[s].real
            if fabs(out[s].imag) >= fabs(v.imag):
                ti = (out[s].imag - tot.imag) + v.imag
            else:
                ti = (v.imag - tot.imag) + out[s].imag
            comp[s] = comp[s] + (tr + 1j * ti)
            out[s] = tot
        for s in range(nslots):
            out[s] = out[s] + comp[s]
    return np.asarray(out)


cdef struct Field:
    const i64* parent
    const i64* var
    Py_ssize_t nmono
    const i64* gidx
    const double complex* coef
    const i64* slot
    Py_ssize_t nterms
    Py_ssize_t ngrad
    double complex M[36]
    double sign
    double complex* vals
    bint stm


cdef void _rhs(Field* fd, const double* y, double* dy) noexcept nogil:
    cdef double complex c[6]
    cdef double complex acc[27]
    cdef double complex hc[36]
    cdef double complex tm[36]
    cdef double gx[6]
    cdef double hx[36]
    cdef double a[36]
    cdef double s
    cdef double complex z
    cdef Py_ssize_t i, j, k, t
    for i in range(6):
        z = 0
        for j in range(6):
            z = z + fd.M[i * 6 + j] * y[j]
        c[i] = z
    _monomials(c, fd.parent, fd.var, fd.nmono, fd.vals)
    for i in range(27):
        acc[i] = 0
    for t in range(fd.nterms if fd.stm else fd.ngrad):
        acc[fd.slot[t]] += fd.coef[t] * fd.vals[fd.gidx[t]]
    for j in range(6):
        z = 0
        for i in range(6):
            z = z + fd.M[i * 6 + j] * acc[i]
        gx[j] = z.real
    for i in range(3):
        dy[i] = fd.sign * gx[i + 3]
        dy[i + 3] = -fd.sign * gx[i]
    if not fd.stm:
        return
    for i in range(6):
        for j in range(6):
            hc[i * 6 + j] = acc[_HSLOT[i][j]]
    # tm = hc @ M ; hx = Re(M^T tm)
    for i in range(6):
        for j in range(6):
            z = 0
            for k in range(6):
                z = z + hc[i * 6 + k] * fd.M[k * 6 + j]
            tm[i * 6 + j] = z
    for i in range(6):
        for j in range(6):
            z = 0
            for k in range(6):
                z = z + fd.M[k * 6 + i] * tm[k * 6 + j]
            hx[i * 6 + j] = z.real
    for i in range(3):
        for j in range(6):
            a[i * 6 + j] = fd.sign * hx[(i + 3) * 6 + j]
            a[(i + 3) * 6 + j] = -fd.sign * hx[i * 6 + j]
    for i in range(6):
        for j in range(6):
            s = 0
            for k in range(6):
                s += a[i * 6 + k] * y[6 + k * 6 + j]
            dy[6 + i * 6 + j] = s


def flow(x0, M, const i64[::1] parent, const i64[::1] var, const i64[::1] offsets,
         const i64[::1] gidx, const double complex[::1] coef, const i64[::1] slot,
         double sign, double t_end, double rtol, double atol, bint with_stm,
         Py_ssize_t max_steps, double norm_cap):
    """Compiled twin of ``_kernels_py.flow``."""
    cdef Field fd
    cdef Py_ssize_t n = 42 if with_stm else 6
    cdef Py_ssize_t i, j, s, nsteps = 0
    cdef int status = 0
    cdef double t = 0.0, h = t_end, err, n5, n3, e, sc, fac, nrm
    cdef bint rejected = False
    Mc = np.ascontiguousarray(M, dtype=complex)
    cdef double complex[:, ::1] Mv = Mc
    cdef double[::1] y = np.zeros(n)
    cdef double[::1] ynew = np.zeros(n)
    cdef double[::1] ytmp = np.zeros(n)
    cdef double[::1] f = np.zeros(n)
    cdef double[:, ::1] K = np.zeros((NST + 1, n))
    cdef double complex[::1] vals = np.empty(offsets[offsets.shape[0] - 1], dtype=complex)
    x0a = np.asarray(x0, dtype=float)
    for i in range(6):
        y[i] = x0a[i]
    if with_stm:
        for i in range(6):
            y[6 + i * 7] = 1.0
    for i in range(6):
        for j in range(6):
            fd.M[i * 6 + j] = Mv[i, j]
    fd.parent = &parent[0]
    fd.var = &var[0]
    fd.nmono = offsets[offsets.shape[0] - 1]
    fd.nterms = gidx.shape[0]
    # gradient terms (slots 0-5) precede the Hessian terms
    fd.ngrad = 0
    while fd.ngrad < fd.nterms and slot[fd.ngrad] < 6:
        fd.ngrad += 1
    fd.gidx = &gidx[0] if fd.nterms > 0 else NULL
    fd.coef = &coef[0] if fd.nterms > 0 else NULL
    fd.slot = &slot[0] if fd.nterms > 0 else NULL
    fd.sign = sign
    fd.vals = &vals[0]
    fd.stm = with_stm
    with nogil:
        _rhs(&fd, &y[0], &f[0])
        while t < t_end:
            if nsteps >= max_steps:
                status = 3
                break
            if h > t_end - t:
                h = t_end - t
            if h < 1e-12 * t_end:
                status = 1
                break
            for i in range(n):
                K[0, i] = f[i]
            for s in range(1, NST):
                for i in range(n):
                    e = 0
                    for j in range(s):
                        e += _A[s][j] * K[j, i]
                    ytmp[i] = y[i] + h * e
                _rhs(&fd, &ytmp[0], &K[s, 0])
            for i in range(n):
                e = 0
                for j in range(NST):
                    e += _B[j] * K[j, i]
                ynew[i] = y[i] + h * e
            _rhs(&fd, &ynew[0], &K[NST, 0])
            n5 = 0
            n3 = 0
            for i in range(n):
                sc = fabs(y[i])
                if fabs(ynew[i]) > sc:
                    sc = fabs(ynew[i])
                sc = atol + sc * rtol
                e = 0
                for j in range(NST + 1):
                    e += _E5[j] * K[j, i]
                e /= sc
                n5 += e * e
                e = 0
                for j in range(NST + 1):
                    e += _E3[j] * K[j, i]
                e /= sc
                n3 += e * e
            if not (isfinite(n5) and isfinite(n3)):
                err = 1e300
            elif n5 == 0 and n3 == 0:
                err = 0
            else:
                err = h * n5 / sqrt((n5 + 0.01 * n3) * n)
            if err < 1.0:
                if err == 0:
                    fac = 10.0
                else:
                    fac = 0.9 * pow(err, -0.125)
                    if fac > 10.0:
                        fac = 10.0
                if rejected and fac > 1.0:
                    fac = 1.0
                t += h
                for i in range(n):
                    y[i] = ynew[i]
                    f[i] = K[NST, i]
                h *= fac
                rejected = False
                nsteps += 1
                nrm = 0
                for i in range(6):
                    nrm += y[i] * y[i]
                if sqrt(nrm) > norm_cap:
                    status = 2
                    break
            else:
                if err >= 1e300:
                    fac = 0.2
                else:
                    fac = 0.9 * pow(err, -0.125)
                    if fac < 0.2:
                        fac = 0.2
                h *= fac
                rejected = True
    ya = np.asarray(y)
    phi = ya[6:].reshape(6, 6).copy() if with_stm else np.eye(6)
    return ya[:6].copy(), phi, nsteps, status
