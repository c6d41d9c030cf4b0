"""Massey products in a DGLA and the page differentials they reproduce.

Run: python3 demos/05_massey.py
"""
import numpy as np

from massey_flow.dgla import (bar, build_massey_system, compare_with_page, compatible_delta,
                              harmonic_basis, massey_product, series_jet)
from massey_flow.errors import Obstructed
from massey_flow.jets import build_page
from massey_flow.models import build_fixture

# A two-fold product is the bracket of cocycles.
D = build_fixture("sl2").dgla
H1 = harmonic_basis(D.d, 1)
x1, x2 = (D.space.embed(1, H1[:, k]) for k in (0, 1))
P = massey_product(build_massey_system(D, [x1, x2]))
print("<x1,x2> degree", P.degree, " equals cup:", np.array_equal(P.cocycle, D.bracket(bar(x1, 1), x2)))

# In the obstructed fixture <x1,x2> is a nonzero class, so no triple system exists.
ob = build_fixture("obstructed")
try:
    build_massey_system(ob.dgla, [ob.algebra_vector(lab) for lab in ob.meta["massey_inputs"]])
except Obstructed as exc:
    print("obstructed:", exc)

# Compatible systems along a flat series give the page differentials.
spec = build_fixture("random-dgla")
jet = series_jet(spec.dgla, spec.flat_series, 3)
for n in (1, 2, 3):
    page = build_page(jet, n)
    worst = max(compare_with_page(jet, compatible_delta(spec.dgla, spec.flat_series, page.reps.basis[:, j], n),
                                  page=page) for j in range(page.reps.dim))
    print(f"n={n}  classes {page.reps.dim}  max |compatible - delta_n| = {worst:.1e}")
