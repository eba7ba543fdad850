"""Slow, obviously-correct reference computations the library is checked against."""
from __future__ import annotations

import itertools
from fractions import Fraction


def bareiss_det(rows) -> int:
    a = [list(map(int, r)) for r in rows]
    n = len(a)
    sign, prev = 1, 1
    for k in range(n - 1):
        if a[k][k] == 0:
            swap = next((i for i in range(k + 1, n) if a[i][k]), None)
            if swap is None:
                return 0
            a[k], a[swap] = a[swap], a[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[-1][-1] if n else 1


def diagonal_signature(sym) -> int:
    """Congruence diagonalization over Q; counts positive minus negative pivots."""
    a = [[Fraction(int(x)) for x in r] for r in sym]
    n = len(a)
    pos = neg = 0
    k = 0
    while k < n:
        if a[k][k] == 0:
            j = next((j for j in range(k + 1, n) if a[j][j] != 0), None)
            if j is not None:
                a[k], a[j] = a[j], a[k]
                for r in a:
                    r[k], r[j] = r[j], r[k]
            else:
                j = next((j for j in range(k + 1, n) if a[k][j] != 0), None)
                if j is None:
                    k += 1
                    continue
                # e_k += e_j makes the pivot 2 a_kj
                for c in range(n):
                    a[k][c] += a[j][c]
                for r in range(n):
                    a[r][k] += a[r][j]
        p = a[k][k]
        pos += p > 0
        neg += p < 0
        for i in range(k + 1, n):
            c = a[i][k] / p
            for j in range(n):
                a[i][j] -= c * a[k][j]
            for j in range(n):
                a[j][i] -= c * a[j][k]
        k += 1
    return pos - neg


def majority_arf(M) -> int:
    """Arf = the value q takes on the majority of vectors."""
    k = len(M)
    vals = [sum(x[i] * M[i][j] * x[j] for i in range(k) for j in range(k)) % 2
            for x in itertools.product((0, 1), repeat=k)]
    return int(sum(vals) * 2 > len(vals))
