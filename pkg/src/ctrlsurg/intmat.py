"""Exact integer matrices stored as numpy object arrays of Python ints.

Everything above this layer (radii, chain identities, quadratic relations)
relies on these helpers never silently converting to floats or overflowing.
"""
from __future__ import annotations

from functools import reduce
from math import gcd

import numpy as np

_INT64_SAFE = 1 << 62


def sign(k: int) -> int:
    """(-1)**k as an int, valid for negative k."""
    return -1 if k % 2 else 1


def zeros(m: int, n: int) -> np.ndarray:
    return np.zeros((m, n), dtype=object) + 0


def eye(n: int) -> np.ndarray:
    out = zeros(n, n)
    for i in range(n):
        out[i, i] = 1
    return out


def asint(a) -> np.ndarray:
    """Copy into an object array of Python ints (rejects non-integral input)."""
    arr = np.asarray(a)
    if arr.ndim != 2:
        arr = arr.reshape(arr.shape[0] if arr.ndim else 0, -1) if arr.size else arr.reshape(0, 0)
    out = np.empty(arr.shape, dtype=object)
    flat_in = arr.ravel()
    flat_out = out.ravel()
    for i, v in enumerate(flat_in):
        iv = int(v)
        if iv != v:
            raise ValueError(f"non-integral matrix entry {v!r}")
        flat_out[i] = iv
    return out


def maxabs(a: np.ndarray) -> int:
    if a.size == 0:
        return 0
    return int(max(abs(int(a.max())), abs(int(a.min()))))


def mm(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Exact product; uses int64 BLAS-free dot when no overflow is possible."""
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"shape mismatch {a.shape} x {b.shape}")
    if a.size == 0 or b.size == 0:
        return zeros(a.shape[0], b.shape[1])
    ma, mb = maxabs(a), maxabs(b)
    if ma == 0 or mb == 0:
        return zeros(a.shape[0], b.shape[1])
    if ma * mb * a.shape[1] < _INT64_SAFE:
        prod = a.astype(np.int64).dot(b.astype(np.int64))
        return prod.astype(object)
    return a.dot(b)


def mmm(*mats: np.ndarray) -> np.ndarray:
    return reduce(mm, mats)


def is_zero(a: np.ndarray) -> bool:
    return a.size == 0 or not np.any(a != 0)


def equal(a: np.ndarray, b: np.ndarray) -> bool:
    return a.shape == b.shape and is_zero(a - b)


def block(rows: list[list[np.ndarray]]) -> np.ndarray:
    """np.block that keeps object dtype and tolerates empty blocks."""
    heights = [r[0].shape[0] for r in rows]
    widths = [b.shape[1] for b in rows[0]] if rows else []
    out = zeros(sum(heights), sum(widths))
    i = 0
    for h, r in zip(heights, rows):
        j = 0
        for w, b in zip(widths, r):
            if b.shape != (h, w):
                raise ValueError(f"block shape {b.shape} != {(h, w)}")
            out[i:i + h, j:j + w] = b
            j += w
        i += h
    return out


def smith_normal_form(a: np.ndarray):
    """Return (U, S, V, Uinv, Vinv) with U a V = S diagonal, U, V unimodular.

    Diagonal entries are nonnegative and each divides the next.
    """
    m, n = a.shape
    S = asint(a) if a.dtype != object else a.copy()
    U, Ui = eye(m), eye(m)
    V, Vi = eye(n), eye(n)

    def row_op(i, j, c):  # row_i += c row_j
        S[i, :] += c * S[j, :]
        U[i, :] += c * U[j, :]
        Ui[:, j] -= c * Ui[:, i]

    def col_op(i, j, c):  # col_i += c col_j
        S[:, i] += c * S[:, j]
        V[:, i] += c * V[:, j]
        Vi[j, :] -= c * Vi[i, :]

    def row_swap(i, j):
        S[[i, j], :] = S[[j, i], :]
        U[[i, j], :] = U[[j, i], :]
        Ui[:, [i, j]] = Ui[:, [j, i]]

    def col_swap(i, j):
        S[:, [i, j]] = S[:, [j, i]]
        V[:, [i, j]] = V[:, [j, i]]
        Vi[[i, j], :] = Vi[[j, i], :]

    def row_neg(i):
        S[i, :] = -S[i, :]
        U[i, :] = -U[i, :]
        Ui[:, i] = -Ui[:, i]

    t = 0
    while t < min(m, n):
        nz = np.argwhere(S[t:, t:] != 0)
        if nz.size == 0:
            break
        # smallest nonzero entry as pivot
        vals = [abs(S[t + i, t + j]) for i, j in nz]
        k = int(np.argmin(vals))
        pi, pj = t + int(nz[k][0]), t + int(nz[k][1])
        row_swap(t, pi)
        col_swap(t, pj)
        while True:
            done = True
            p = S[t, t]
            for i in range(t + 1, m):
                if S[i, t] != 0:
                    q = S[i, t] // p
                    row_op(i, t, -q)
                    if S[i, t] != 0:
                        row_swap(t, i)
                        done = False
                        break
            if not done:
                continue
            p = S[t, t]
            for j in range(t + 1, n):
                if S[t, j] != 0:
                    q = S[t, j] // p
                    col_op(j, t, -q)
                    if S[t, j] != 0:
                        col_swap(t, j)
                        done = False
                        break
            if not done:
                continue
            # divisibility: p must divide the rest
            p = S[t, t]
            bad = np.argwhere(S[t + 1:, t + 1:] % p != 0) if m > t + 1 and n > t + 1 else np.empty((0, 2))
            if len(bad):
                i = t + 1 + int(bad[0][0])
                row_op(t, i, 1)
                continue
            break
        if S[t, t] < 0:
            row_neg(t)
        t += 1
    return U, S, V, Ui, Vi


class IntegerSolver:
    """Solves a x = b over Z for a fixed a, via its Smith normal form."""

    def __init__(self, a: np.ndarray):
        self.shape = a.shape
        self.U, self.S, self.V, _, _ = smith_normal_form(a)
        k = min(a.shape)
        self.diag = [int(self.S[i, i]) for i in range(k)]
        self.rank = sum(1 for x in self.diag if x != 0)

    def solve(self, b: np.ndarray) -> np.ndarray | None:
        """Integer solution for each column of b, or None if any column fails."""
        m, n = self.shape
        if b.shape[0] != m:
            raise ValueError("rhs height mismatch")
        c = mm(self.U, b)
        y = zeros(n, b.shape[1])
        for i in range(m):
            row = c[i, :]
            d = self.diag[i] if i < len(self.diag) else 0
            if d == 0:
                if np.any(row != 0):
                    return None
                continue
            if np.any(row % d != 0):
                return None
            y[i, :] = row // d
        return mm(self.V, y)


def solve_integer(a: np.ndarray, b: np.ndarray) -> np.ndarray | None:
    return IntegerSolver(a).solve(b)


def rank_q(a: np.ndarray) -> int:
    """Rank over the rationals (fraction-free elimination)."""
    M = [list(map(int, row)) for row in a]
    m = len(M)
    n = a.shape[1]
    r = 0
    for c in range(n):
        piv = next((i for i in range(r, m) if M[i][c] != 0), None)
        if piv is None:
            continue
        M[r], M[piv] = M[piv], M[r]
        for i in range(r + 1, m):
            if M[i][c]:
                f, g = M[i][c], M[r][c]
                M[i] = [g * x - f * y for x, y in zip(M[i], M[r])]
                cont = reduce(gcd, M[i], 0)
                if cont > 1:
                    M[i] = [x // cont for x in M[i]]
        r += 1
        if r == m:
            break
    return r


def rank_mod_p(a: np.ndarray, p: int) -> int:
    M = [[int(x) % p for x in row] for row in a]
    m = len(M)
    n = a.shape[1]
    r = 0
    for c in range(n):
        piv = next((i for i in range(r, m) if M[i][c]), None)
        if piv is None:
            continue
        M[r], M[piv] = M[piv], M[r]
        inv = pow(M[r][c], -1, p)
        M[r] = [(x * inv) % p for x in M[r]]
        for i in range(m):
            if i != r and M[i][c]:
                f = M[i][c]
                M[i] = [(x - f * y) % p for x, y in zip(M[i], M[r])]
        r += 1
        if r == m:
            break
    return r


def det(a: np.ndarray) -> int:
    """Exact determinant (Bareiss)."""
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("det of non-square matrix")
    if n == 0:
        return 1
    M = [list(map(int, row)) for row in a]
    s = 1
    prev = 1
    for k in range(n - 1):
        if M[k][k] == 0:
            sw = next((i for i in range(k + 1, n) if M[i][k] != 0), None)
            if sw is None:
                return 0
            M[k], M[sw] = M[sw], M[k]
            s = -s
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                M[i][j] = (M[i][j] * M[k][k] - M[i][k] * M[k][j]) // prev
        prev = M[k][k]
    return s * M[n - 1][n - 1]


def inverse_unimodular(a: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    x = solve_integer(a, eye(n))
    if x is None or not equal(mm(a, x), eye(n)):
        raise ValueError("matrix is not invertible over Z")
    return x
