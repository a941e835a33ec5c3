"""Monomial bookkeeping for polynomials in the six canonical variables.

Exponent tuples ``(k_q1, k_q2, k_q3, k_p1, k_p2, k_p3)`` are packed into a
single int64 with eight bits per exponent, the first variable in the most
significant byte.  Adding two packed keys adds the exponent tuples, which is
what the product kernels rely on.
"""
from __future__ import annotations

from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np

NVARS = 6
BITS = 8
MASK = (1 << BITS) - 1
SHIFTS = np.array([BITS * (NVARS - 1 - i) for i in range(NVARS)], dtype=np.int64)
UNIT_KEYS = np.array([1 << int(s) for s in SHIFTS], dtype=np.int64)


def pack(exponents) -> int:
    key = 0
    for e in exponents:
        if not 0 <= e <= MASK:
            raise ValueError(f"exponent {e} outside [0, {MASK}]")
        key = (key << BITS) | int(e)
    return key


def unpack(key: int) -> tuple[int, ...]:
    return tuple((int(key) >> int(s)) & MASK for s in SHIFTS)


def unpack_array(keys: np.ndarray) -> np.ndarray:
    """Exponent matrix of shape ``(len(keys), 6)`` for an array of keys."""
    keys = np.asarray(keys, dtype=np.int64)
    return (keys[:, None] >> SHIFTS[None, :]) & MASK


def pack_array(exps: np.ndarray) -> np.ndarray:
    exps = np.asarray(exps, dtype=np.int64).reshape(-1, NVARS)
    return (exps << SHIFTS[None, :]).sum(axis=1)


def key_degree(keys: np.ndarray) -> np.ndarray:
    return unpack_array(keys).sum(axis=1)


@lru_cache(maxsize=None)
def degree_keys(degree: int) -> np.ndarray:
    """Sorted packed keys of every monomial of the given total degree."""
    exps = np.zeros((0, NVARS), dtype=np.int64)
    rows = []
    for combo in combinations_with_replacement(range(NVARS), degree):
        e = [0] * NVARS
        for v in combo:
            e[v] += 1
        rows.append(e)
    if rows:
        exps = np.array(rows, dtype=np.int64)
    keys = pack_array(exps) if len(exps) else np.zeros(1, dtype=np.int64)
    keys = np.sort(keys)
    keys.setflags(write=False)
    return keys


class MonomialTable:
    """Global monomial indexing up to ``max_degree``.

    Monomials are numbered degree by degree.  Every monomial of positive
    degree records a parent (itself divided by one variable) so that the
    values of all monomials at a point can be built with one product each.
    """

    def __init__(self, max_degree: int):
        self.max_degree = max_degree
        counts = [len(degree_keys(d)) for d in range(max_degree + 1)]
        self.offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        self.size = int(self.offsets[-1])
        parent = np.zeros(self.size, dtype=np.int64)
        var = np.zeros(self.size, dtype=np.int64)
        for d in range(1, max_degree + 1):
            keys = degree_keys(d)
            exps = unpack_array(keys)
            # divide by the last variable carrying a nonzero exponent
            last = NVARS - 1 - np.argmax(exps[:, ::-1] > 0, axis=1)
            pkeys = keys - UNIT_KEYS[last]
            prank = np.searchsorted(degree_keys(d - 1), pkeys)
            lo, hi = self.offsets[d], self.offsets[d + 1]
            parent[lo:hi] = self.offsets[d - 1] + prank
            var[lo:hi] = last
        self.parent = parent
        self.var = var

    def global_index(self, keys: np.ndarray) -> np.ndarray:
        keys = np.asarray(keys, dtype=np.int64)
        deg = key_degree(keys)
        out = np.empty(len(keys), dtype=np.int64)
        for d in np.unique(deg):
            sel = deg == d
            out[sel] = self.offsets[d] + np.searchsorted(degree_keys(int(d)), keys[sel])
        return out


@lru_cache(maxsize=None)
def monomial_table(max_degree: int) -> MonomialTable:
    return MonomialTable(max_degree)
