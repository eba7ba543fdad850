"""Quadratic forms as one-degree complexes, their invariants and boundaries."""
# %%
from fractions import Fraction

from ctrlsurg.chain_complexes import find_contraction_over
from ctrlsurg.control_space import circle_space
from ctrlsurg.quadratic_structures import (
    QuadraticForm,
    algebraic_boundary,
    arf,
    e8_form,
    form_complex,
    hyperbolic_form,
    signature,
)

# %% E8 is even, unimodular and positive definite
E8 = e8_form()
print("E8 signature", signature(E8))

# %% hyperbolic summands are invisible to both invariants
print("E8+H signature", signature(E8.direct_sum(hyperbolic_form())))
print("H arf", arf(hyperbolic_form(n=2)), "twisted H arf", arf(QuadraticForm(((1, 1), (0, 1)), n=2)))

# %% a nonsingular form has a contractible boundary; <1> does not (its duality is 2)
B = circle_space(4)
dE = algebraic_boundary(form_complex(E8, B))
print("boundary of E8 contracts:", find_contraction_over(dE.C, B.whole, Fraction(0)).radius() == 0)
d1 = algebraic_boundary(form_complex(QuadraticForm(((1,),)), B))
print("boundary of <1>: degrees", d1.C.lo, "..", d1.C.hi, "differential", d1.C.d(0).tolist())
