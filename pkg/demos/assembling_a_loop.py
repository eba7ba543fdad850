"""Assemble a loop of pieces over the circle, subdivide it, and compare."""
# %%
from ctrlsurg.assembly import assemble, bisectable_loop_cycle, check_cycle, subdivide, subdivision_certificate
from ctrlsurg.chain_complexes import verify_equivalence
from ctrlsurg.control_space import circle_space
from ctrlsurg.quadratic_structures import form_complex, hyperbolic_form

B = circle_space(16)
Z = bisectable_loop_cycle(B, [0, 4, 8, 12], form_complex(hyperbolic_form(), B))
print("cycle problems:", check_cycle(Z))
Q = assemble(Z)
print("largest simplex diameter", Z.base.max_diameter(), "assembled radius", Q.radius)

# %% halving every edge halves the diameter; the assembly stays equivalent
Zs = subdivide(Z)
Qs = assemble(Zs)
cert = subdivision_certificate(Z, Zs)
print("after subdivision: diameter", Zs.base.max_diameter(), "radius", Qs.radius)
print("equivalence verifies:", bool(verify_equivalence(cert)), "bound", cert.bound)
print("ranks", [Q.C.rank(r) for r in Q.C.degrees], "->", [Qs.C.rank(r) for r in Qs.C.degrees])
