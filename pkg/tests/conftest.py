from __future__ import annotations

import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import settings

from ctrlsurg import intmat as im
from ctrlsurg.control_space import circle_space, line_space, uniform_line
from ctrlsurg.geometric_algebra import GeomModule

settings.register_profile("ctrlsurg", max_examples=40, deadline=None)
settings.load_profile("ctrlsurg")


def module(space, locs, prefix="b"):
    return GeomModule(space, tuple((f"{prefix}{i}", loc) for i, loc in enumerate(locs)))


def mat(rows):
    return im.asint(np.array(rows, dtype=object).reshape(len(rows), len(rows[0]) if rows else 0))


def rng_space(rng: random.Random):
    kind = rng.choice(["line", "circle", "ragged"])
    n = rng.randint(2, 12)
    if kind == "line":
        return uniform_line(n, Fraction(1, rng.choice([4, 8, 16])))
    if kind == "circle":
        return circle_space(n)
    coords = sorted({Fraction(rng.randint(0, 40), 8) for _ in range(n)})
    return line_space(coords)


@pytest.fixture
def two_point():
    """Two points a quarter apart."""
    return line_space([0, Fraction(1, 4)])
