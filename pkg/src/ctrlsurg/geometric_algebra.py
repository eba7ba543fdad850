"""Based free Z-modules located in a control space, and morphisms between them."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import intmat as im
from .control_space import ControlSpace, Region, outer_neighborhood


@dataclass(frozen=True, eq=False)
class GeomModule:
    space: ControlSpace
    basis: tuple  # of (label, location index)
    locs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        b = tuple((str(lab), int(loc)) for lab, loc in self.basis)
        labels = [lab for lab, _ in b]
        if len(set(labels)) != len(labels):
            dup = sorted({x for x in labels if labels.count(x) > 1})
            raise ValueError(f"duplicate basis labels: {dup[:5]}")
        n = len(self.space)
        for lab, loc in b:
            if not 0 <= loc < n:
                raise ValueError(f"basis element {lab!r} has invalid location {loc}")
        object.__setattr__(self, "basis", b)
        object.__setattr__(self, "locs", np.array([loc for _, loc in b], dtype=np.int64))

    @property
    def rank(self) -> int:
        return len(self.basis)

    @property
    def labels(self) -> list[str]:
        return [lab for lab, _ in self.basis]

    def __eq__(self, other):
        if self is other:
            return True
        return isinstance(other, GeomModule) and self.basis == other.basis and self.space == other.space

    def __hash__(self):
        return hash(self.basis)

    def indices_in(self, R: Region) -> list[int]:
        mask = R.mask()
        return [i for i, loc in enumerate(self.locs) if mask[loc]]

    def support(self) -> Region:
        return Region(self.space, frozenset(int(x) for x in self.locs))

    def sub(self, idx: Sequence[int]) -> "GeomModule":
        return GeomModule(self.space, tuple(self.basis[i] for i in idx))

    def relabel(self, prefix: str) -> "GeomModule":
        return GeomModule(self.space, tuple((prefix + lab, loc) for lab, loc in self.basis))


def zero_module(space: ControlSpace) -> GeomModule:
    return GeomModule(space, ())


def direct_sum_modules(mods: Sequence[GeomModule], tags: Sequence[str] | None = None) -> GeomModule:
    """Concatenate bases; labels are prefixed with tags only when they collide."""
    if not mods:
        raise ValueError("direct sum of no modules needs a space")
    space = mods[0].space
    labels = [lab for m in mods for lab in m.labels]
    if len(set(labels)) == len(labels):
        return GeomModule(space, tuple(b for m in mods for b in m.basis))
    tags = tags or [f"{chr(97 + i)}." for i in range(len(mods))]
    return GeomModule(space, tuple((t + lab, loc) for t, m in zip(tags, mods) for lab, loc in m.basis))


@dataclass(frozen=True, eq=False)
class GeomMorphism:
    """Integer matrix (target rows x source columns) between located modules."""

    source: GeomModule
    target: GeomModule
    matrix: np.ndarray

    def __post_init__(self):
        m = self.matrix
        if not (isinstance(m, np.ndarray) and m.dtype == object):
            m = im.asint(m) if np.size(m) else im.zeros(self.target.rank, self.source.rank)
        if m.shape != (self.target.rank, self.source.rank):
            raise ValueError(f"matrix shape {m.shape} != ({self.target.rank}, {self.source.rank})")
        if self.source.space != self.target.space:
            raise ValueError("source and target live over different control spaces")
        object.__setattr__(self, "matrix", m)

    @property
    def space(self) -> ControlSpace:
        return self.source.space

    def entries(self) -> list[tuple[int, int, int]]:
        """Nonzero entries (row, column, value), target-major order."""
        rows, cols = np.nonzero(self.matrix != 0)
        return [(int(i), int(j), int(self.matrix[i, j])) for i, j in zip(rows, cols)]

    def __add__(self, other: "GeomMorphism") -> "GeomMorphism":
        _same_shape(self, other)
        return GeomMorphism(self.source, self.target, self.matrix + other.matrix)

    def __sub__(self, other: "GeomMorphism") -> "GeomMorphism":
        _same_shape(self, other)
        return GeomMorphism(self.source, self.target, self.matrix - other.matrix)

    def __neg__(self) -> "GeomMorphism":
        return GeomMorphism(self.source, self.target, -self.matrix)

    def scale(self, c: int) -> "GeomMorphism":
        return GeomMorphism(self.source, self.target, self.matrix * int(c))

    def is_zero(self) -> bool:
        return im.is_zero(self.matrix)

    def __eq__(self, other):
        return (
            isinstance(other, GeomMorphism)
            and self.source == other.source
            and self.target == other.target
            and im.equal(self.matrix, other.matrix)
        )

    __hash__ = None

    @property
    def T(self) -> "GeomMorphism":
        return GeomMorphism(self.target, self.source, self.matrix.T.copy())


def _same_shape(f: GeomMorphism, g: GeomMorphism):
    if f.source != g.source or f.target != g.target:
        raise ValueError("morphisms have different source/target modules")


def identity(M: GeomModule) -> GeomMorphism:
    return GeomMorphism(M, M, im.eye(M.rank))


def zero_morphism(source: GeomModule, target: GeomModule) -> GeomMorphism:
    return GeomMorphism(source, target, im.zeros(target.rank, source.rank))


def matrix_radius(space: ControlSpace, target_locs, source_locs, matrix: np.ndarray) -> Fraction:
    if matrix.size == 0:
        return Fraction(0)
    rows, cols = np.nonzero(matrix != 0)
    if rows.size == 0:
        return Fraction(0)
    d = space._scaled[np.asarray(target_locs)[rows], np.asarray(source_locs)[cols]]
    return Fraction(int(d.max()), space._denom)


def radius(f: GeomMorphism) -> Fraction:
    """Largest distance between basis locations joined by a nonzero entry."""
    return matrix_radius(f.space, f.target.locs, f.source.locs, f.matrix)


def compose(g: GeomMorphism, f: GeomMorphism) -> GeomMorphism:
    """g after f."""
    if g.source != f.target:
        raise ValueError("compose: source of g differs from target of f")
    return GeomMorphism(f.source, g.target, im.mm(g.matrix, f.matrix))


def split_by_region(M: GeomModule, R: Region):
    """(sub, quot, inclusion, projection) for the basis elements located in R and the rest."""
    inside = M.indices_in(R)
    outside = [i for i in range(M.rank) if i not in set(inside)]
    sub, quot = M.sub(inside), M.sub(outside)
    inc = im.zeros(M.rank, sub.rank)
    for k, i in enumerate(inside):
        inc[i, k] = 1
    proj = im.zeros(quot.rank, M.rank)
    for k, i in enumerate(outside):
        proj[k, i] = 1
    return sub, quot, GeomMorphism(sub, M, inc), GeomMorphism(M, quot, proj)


def is_basis_bijection_over(f: GeomMorphism, R: Region) -> bool:
    """True iff f restricted to basis over R is a signed permutation with no other entries."""
    rows = f.target.indices_in(R)
    cols = f.source.indices_in(R)
    if len(rows) != len(cols):
        return False
    A = f.matrix
    if not rows:
        return True
    row_block = A[rows, :]
    col_block = A[:, cols]
    inner = A[np.ix_(rows, cols)]
    # full rows/columns must equal their restriction to the R x R block
    if np.count_nonzero(row_block != 0) != np.count_nonzero(inner != 0):
        return False
    if np.count_nonzero(col_block != 0) != np.count_nonzero(inner != 0):
        return False
    nz = inner != 0
    if not (np.all(nz.sum(axis=0) == 1) and np.all(nz.sum(axis=1) == 1)):
        return False
    return all(abs(int(v)) == 1 for v in inner[nz])


def block_morphism(sources: Sequence[GeomModule], targets: Sequence[GeomModule], blocks, source=None, target=None):
    """Morphism ⊕sources → ⊕targets from a grid of matrices (None means zero)."""
    rows = []
    for ti, t in enumerate(targets):
        row = []
        for si, s in enumerate(sources):
            b = blocks[ti][si]
            if b is None:
                b = im.zeros(t.rank, s.rank)
            elif isinstance(b, GeomMorphism):
                b = b.matrix
            row.append(b)
        rows.append(row)
    src = source if source is not None else direct_sum_modules(list(sources))
    tgt = target if target is not None else direct_sum_modules(list(targets))
    mat = im.block(rows) if rows and sources else im.zeros(tgt.rank, src.rank)
    return GeomMorphism(src, tgt, mat)


def is_delta_iso_certificate(d: GeomMorphism, e: GeomMorphism, V: Region, delta) -> list[str]:
    """Check that e witnesses d as a delta isomorphism over the complement of V.

    Both defects d e - 1 and e d - 1 may only be nonzero in entries that
    involve a basis element located in outer(V, delta).
    """
    problems = []
    if radius(e) > delta:
        problems.append(f"inverse certificate radius {radius(e)} exceeds {delta}")
    if radius(d) > delta:
        problems.append(f"morphism radius {radius(d)} exceeds {delta}")
    near = outer_neighborhood(V, delta).mask() if V.members else np.zeros(len(d.space), dtype=bool)
    for name, prod, mod in (("d∘e", compose(d, e), d.target), ("e∘d", compose(e, d), d.source)):
        defect = prod.matrix - im.eye(mod.rank)
        for i, j in zip(*np.nonzero(defect != 0)):
            if not (near[mod.locs[i]] or near[mod.locs[j]]):
                problems.append(f"{name} - 1 has entry ({mod.labels[i]},{mod.labels[j]}) away from V")
                break
    return problems
