"""Split a Poincaré complex on the 16-point circle along a half circle."""
# %%
from fractions import Fraction

from ctrlsurg.chain_complexes import verify_equivalence
from ctrlsurg.fixtures import fixture
from ctrlsurg.splitting import StageFailure, check_split_result, split_poincare_complex
from ctrlsurg.quadratic_structures import is_poincare

doc = fixture("circle_split")
Q, W = doc.get("Q"), doc.get("W")
print("radius", Q.radius, "ranks", {r: Q.C.rank(r) for r in Q.C.degrees})

# %% a generous eps: every stage runs and the ledger shows where control is spent
res = split_poincare_complex(Q, W, Fraction(3, 4))
print(res.ledger.table())
print("support conditions hold:", check_split_result(Q, W, Fraction(3, 4), res) == [])
print("equivalence verifies:", bool(verify_equivalence(res.cert)))

# %% a tight eps fails part way; the partial ledger says how far it got
try:
    split_poincare_complex(Q, W, Fraction(1, 8), poincare_cert=is_poincare(Q, Fraction(3, 8)))
except StageFailure as exc:
    print("failed at", exc.stage, "after", exc.ledger.stages())
