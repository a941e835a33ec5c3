"""Pure numpy implementations of the hot kernels.

These define the semantics that ``_kernels.pyx`` reproduces in compiled
form.  They are selected automatically when the extension is not built.
"""
from __future__ import annotations

import numpy as np
from scipy.integrate._ivp import dop853_coefficients as _dop

from ._monomials import MASK, SHIFTS, UNIT_KEYS

_CHUNK = 1 << 21

# status codes shared with the compiled flow
FLOW_OK = 0
FLOW_UNDERFLOW = 1
FLOW_BLOWUP = 2
FLOW_MAXSTEPS = 3

_NST = _dop.N_STAGES
_A = np.ascontiguousarray(_dop.A[:_NST, :_NST])
_B = np.ascontiguousarray(_dop.B)
_E3 = np.ascontiguousarray(_dop.E3)
_E5 = np.ascontiguousarray(_dop.E5)

# slot of the Hessian entry (i, j), i <= j
HESS_SLOT = np.full((6, 6), -1, dtype=np.int64)
_s = 6
for _i in range(6):
    for _j in range(_i, 6):
        HESS_SLOT[_i, _j] = HESS_SLOT[_j, _i] = _s
        _s += 1
NSLOTS_FIELD = _s


def _scatter(out, ranks, vals):
    out += np.bincount(ranks, weights=vals.real, minlength=len(out))
    out += 1j * np.bincount(ranks, weights=vals.imag, minlength=len(out))


def mul_into(ka, ca, kb, cb, tkeys, out):
    """Accumulate the product of two homogeneous parts into ``out``.

    ``out`` is indexed by rank within ``tkeys``, which must list every
    monomial of the target degree in key order (the compiled kernel ranks
    combinatorially and relies on it).
    """
    if len(ka) == 0 or len(kb) == 0:
        return
    rows = max(1, _CHUNK // len(kb))
    for lo in range(0, len(ka), rows):
        keys = (ka[lo:lo + rows, None] + kb[None, :]).ravel()
        vals = (ca[lo:lo + rows, None] * cb[None, :]).ravel()
        _scatter(out, np.searchsorted(tkeys, keys), vals)


def bracket_into(ka, ca, kb, cb, tkeys, out):
    """Accumulate the Poisson bracket of two homogeneous parts into ``out``.

    ``tkeys`` is the complete, sorted monomial list of the target degree.
    """
    if len(ka) == 0 or len(kb) == 0:
        return
    ea = (ka[:, None] >> SHIFTS[None, :]) & MASK
    eb = (kb[:, None] >> SHIFTS[None, :]) & MASK
    rows = max(1, _CHUNK // len(kb))
    for lo in range(0, len(ka), rows):
        sa = slice(lo, lo + rows)
        prod = (ca[sa, None] * cb[None, :])
        base = ka[sa, None] + kb[None, :]
        for k in range(3):
            f = ea[sa, k, None] * eb[None, :, k + 3] - ea[sa, k + 3, None] * eb[None, :, k]
            nz = f != 0
            if not nz.any():
                continue
            keys = base[nz] - UNIT_KEYS[k] - UNIT_KEYS[k + 3]
            _scatter(out, np.searchsorted(tkeys, keys), f[nz] * prod[nz])


def monomial_values(x, parent, var, offsets):
    vals = np.empty(int(offsets[-1]), dtype=complex)
    vals[0] = 1.0
    for d in range(1, len(offsets) - 1):
        lo, hi = offsets[d], offsets[d + 1]
        vals[lo:hi] = vals[parent[lo:hi]] * x[var[lo:hi]]
    return vals


def eval_slots(x, parent, var, offsets, gidx, coef, slot, nslots):
    """Evaluate several polynomials sharing one monomial table at ``x``.

    Term ``t`` contributes ``coef[t] * monomial[gidx[t]]`` to output
    ``slot[t]``.  Terms are expected grouped by slot for the pairwise sums.
    """
    vals = monomial_values(np.asarray(x, dtype=complex), parent, var, offsets)
    terms = coef * vals[gidx]
    out = np.zeros(nslots, dtype=complex)
    if len(terms) == 0:
        return out
    order = np.argsort(slot, kind="stable")
    s = slot[order]
    starts = np.flatnonzero(np.r_[True, s[1:] != s[:-1]])
    out[s[starts]] = np.add.reduceat(terms[order], starts)
    return out


def _rhs(y, M, MT, parent, var, offsets, gidx, coef, slot, sign, with_stm):
    c = M @ y[:6]
    acc = eval_slots(c, parent, var, offsets, gidx, coef, slot, NSLOTS_FIELD)
    g = (MT @ acc[:6]).real
    dy = np.empty_like(y)
    dy[:3] = sign * g[3:]
    dy[3:6] = -sign * g[:3]
    if with_stm:
        hc = acc[HESS_SLOT]
        hx = (MT @ hc @ M).real
        a = np.empty((6, 6))
        a[:3] = sign * hx[3:]
        a[3:] = -sign * hx[:3]
        dy[6:] = (a @ y[6:].reshape(6, 6)).ravel()
    return dy


def flow(x0, M, parent, var, offsets, gidx, coef, slot, sign, t_end,
         rtol, atol, with_stm, max_steps, norm_cap):
    """Integrate ``xdot = sign * J grad G(M x)`` over ``[0, t_end]``.

    Adaptive Dormand-Prince 8(5,3) with the same error norm and step control
    as scipy's DOP853.  Returns ``(x1, Phi, nsteps, status)``; ``Phi`` is the
    state transition matrix when ``with_stm`` is set, otherwise identity.
    Overflow in a diverging flow is reported through ``status``.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        return _flow(x0, M, parent, var, offsets, gidx, coef, slot, sign, t_end,
                     rtol, atol, with_stm, max_steps, norm_cap)


def _flow(x0, M, parent, var, offsets, gidx, coef, slot, sign, t_end,
          rtol, atol, with_stm, max_steps, norm_cap):
    M = np.asarray(M, dtype=complex)
    MT = M.T.copy()
    y = np.zeros(42 if with_stm else 6)
    y[:6] = x0
    if with_stm:
        y[6:] = np.eye(6).ravel()
    args = (M, MT, parent, var, offsets, gidx, coef, slot, sign, with_stm)
    n = len(y)
    K = np.empty((_NST + 1, n))
    f = _rhs(y, *args)
    t, h = 0.0, t_end
    rejected = False
    nsteps = 0
    status = FLOW_OK
    while t < t_end:
        if nsteps >= max_steps:
            status = FLOW_MAXSTEPS
            break
        h = min(h, t_end - t)
        if h < 1e-12 * t_end:
            status = FLOW_UNDERFLOW
            break
        K[0] = f
        for s in range(1, _NST):
            K[s] = _rhs(y + h * (_A[s, :s] @ K[:s]), *args)
        y_new = y + h * (_B @ K[:_NST])
        f_new = _rhs(y_new, *args)
        K[_NST] = f_new
        scale = atol + np.maximum(np.abs(y), np.abs(y_new)) * rtol
        e5 = (_E5 @ K) / scale
        e3 = (_E3 @ K) / scale
        n5, n3 = e5 @ e5, e3 @ e3
        if not np.isfinite(n5) or not np.isfinite(n3):
            err = np.inf
        elif n5 == 0.0 and n3 == 0.0:
            err = 0.0
        else:
            err = h * n5 / np.sqrt((n5 + 0.01 * n3) * n)
        if err < 1.0:
            fac = 10.0 if err == 0.0 else min(10.0, 0.9 * err ** (-1.0 / 8.0))
            if rejected:
                fac = min(1.0, fac)
            t += h
            y, f = y_new, f_new
            h *= fac
            rejected = False
            nsteps += 1
            if np.sqrt(y[:6] @ y[:6]) > norm_cap:
                status = FLOW_BLOWUP
                break
        else:
            h *= max(0.2, 0.9 * err ** (-1.0 / 8.0)) if np.isfinite(err) else 0.2
            rejected = True
    phi = y[6:].reshape(6, 6).copy() if with_stm else np.eye(6)
    return y[:6].copy(), phi, nsteps, status
