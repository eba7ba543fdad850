"""Finite metric control spaces, regions and their neighborhoods."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm
from typing import Iterable, Sequence

import numpy as np


def as_rational(x) -> Fraction:
    """Parse ints, Fractions and "p/q" strings exactly; floats are refused."""
    if isinstance(x, float):
        raise TypeError("floats are not accepted as control distances; use Fraction or 'p/q'")
    if isinstance(x, str):
        return Fraction(x.strip())
    return Fraction(x)


@dataclass(frozen=True, eq=False)
class ControlSpace:
    points: tuple
    dist: tuple  # tuple of tuples of Fraction
    _scaled: np.ndarray = field(init=False, repr=False, compare=False)
    _denom: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        pts = tuple(self.points)
        rows = tuple(tuple(as_rational(v) for v in row) for row in self.dist)
        n = len(pts)
        if len(rows) != n or any(len(r) != n for r in rows):
            raise ValueError("distance matrix must be square with one row per point")
        if len(set(pts)) != n:
            raise ValueError("point identifiers must be unique")
        if any(v < 0 for r in rows for v in r):
            raise ValueError("distances must be nonnegative")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "dist", rows)
        den = 1
        for r in rows:
            for v in r:
                den = lcm(den, v.denominator)
        scaled = np.array([[int(v * den) for v in r] for r in rows], dtype=object).reshape(n, n)
        if n and max(int(x) for x in scaled.ravel()) < (1 << 62):
            scaled = scaled.astype(np.int64)
        object.__setattr__(self, "_scaled", scaled)
        object.__setattr__(self, "_denom", den)

    def __len__(self) -> int:
        return len(self.points)

    def __eq__(self, other):
        return isinstance(other, ControlSpace) and self.points == other.points and self.dist == other.dist

    def __hash__(self):
        return hash((self.points, self.dist))

    def d(self, i: int, j: int) -> Fraction:
        return self.dist[i][j]

    def scaled(self, eps) -> int:
        """eps in the integer units of the scaled distance matrix, rounded down.

        `scaled_dist <= scaled(eps)` is equivalent to `dist <= eps` because
        every scaled distance is an integer.
        """
        e = as_rational(eps) * self._denom
        return e.numerator // e.denominator

    @property
    def whole(self) -> "Region":
        return Region(self, frozenset(range(len(self))))

    @property
    def empty(self) -> "Region":
        return Region(self, frozenset())

    def region(self, members: Iterable[int]) -> "Region":
        return Region(self, frozenset(members))

    def index(self, point) -> int:
        return self.points.index(point)

    def diameter(self, members: Iterable[int]) -> Fraction:
        m = sorted(members)
        if not m:
            return Fraction(0)
        sub = self._scaled[np.ix_(m, m)]
        return Fraction(int(sub.max()), self._denom)


@dataclass(frozen=True)
class Region:
    space: ControlSpace
    members: frozenset

    def __post_init__(self):
        mem = frozenset(int(m) for m in self.members)
        n = len(self.space)
        bad = [m for m in mem if not 0 <= m < n]
        if bad:
            raise ValueError(f"region members out of range: {sorted(bad)}")
        object.__setattr__(self, "members", mem)

    def __contains__(self, i) -> bool:
        return i in self.members

    def __iter__(self):
        return iter(sorted(self.members))

    def __len__(self) -> int:
        return len(self.members)

    def complement(self) -> "Region":
        return Region(self.space, frozenset(range(len(self.space))) - self.members)

    def __and__(self, other: "Region") -> "Region":
        return Region(self.space, self.members & other.members)

    def __or__(self, other: "Region") -> "Region":
        return Region(self.space, self.members | other.members)

    def __sub__(self, other: "Region") -> "Region":
        return Region(self.space, self.members - other.members)

    def issubset(self, other: "Region") -> bool:
        return self.members <= other.members

    def mask(self) -> np.ndarray:
        m = np.zeros(len(self.space), dtype=bool)
        m[list(self.members)] = True
        return m

    def distance_to(self) -> np.ndarray:
        """Scaled distance from every point to the region (-1 when region is empty)."""
        if not self.members:
            return np.full(len(self.space), -1, dtype=object)
        cols = sorted(self.members)
        return self.space._scaled[:, cols].min(axis=1)


def verify_metric(space: ControlSpace) -> list[str]:
    """All violated metric axioms as human-readable strings; empty when valid."""
    report = []
    n = len(space)
    D = space.dist
    names = space.points
    for i in range(n):
        if D[i][i] != 0:
            report.append(f"nonzero self-distance at {names[i]!r}: {D[i][i]}")
    for i in range(n):
        for j in range(i + 1, n):
            if D[i][j] != D[j][i]:
                report.append(f"symmetry violated at ({names[i]!r},{names[j]!r}): {D[i][j]} != {D[j][i]}")
    S = space._scaled
    for i in range(n):
        # dist(i,k) > dist(i,j) + dist(j,k) for some j
        via = S[i, :][:, None] + S  # via[j, k] = d(i,j) + d(j,k)
        bound = via.min(axis=0)
        for k in np.nonzero(S[i, :] > bound)[0]:
            j = int(np.argmin(via[:, k]))
            report.append(
                f"triangle violated for ({names[i]!r},{names[j]!r},{names[int(k)]!r}): "
                f"{D[i][int(k)]} > {D[i][j]} + {D[j][int(k)]}"
            )
    return report


def outer_neighborhood(W: Region, eps) -> Region:
    """Points within closed distance eps of W."""
    e = as_rational(eps)
    if e < 0:
        raise ValueError(f"eps must be nonnegative, got {e}")
    if not W.members:
        return W
    dist = W.distance_to()
    lim = W.space.scaled(e)
    return Region(W.space, frozenset(int(i) for i in np.nonzero(dist <= lim)[0]))


def inner_neighborhood(W: Region, eps) -> Region:
    """Points at distance strictly greater than eps from the complement of W."""
    e = as_rational(eps)
    if e < 0:
        raise ValueError(f"eps must be nonnegative, got {e}")
    return outer_neighborhood(W.complement(), e).complement()


def line_space(coords: Sequence) -> ControlSpace:
    """Points on the real line with |x - y| as metric."""
    cs = [as_rational(c) for c in coords]
    return ControlSpace(tuple(str(c) for c in cs), tuple(tuple(abs(a - b) for b in cs) for a in cs))


def uniform_line(n: int, spacing=Fraction(1)) -> ControlSpace:
    s = as_rational(spacing)
    return line_space([i * s for i in range(n)])


def circle_space(n: int, circumference=Fraction(1)) -> ControlSpace:
    """n equally spaced points on a circle with the arc-length metric."""
    c = as_rational(circumference)
    step = c / n

    def arc(i, j):
        k = abs(i - j) % n
        return min(k, n - k) * step

    return ControlSpace(tuple(f"p{i}" for i in range(n)), tuple(tuple(arc(i, j) for j in range(n)) for i in range(n)))
