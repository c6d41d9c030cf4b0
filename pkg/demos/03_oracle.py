"""Eigenvalue branches of T(t) near t = 0, compared with the algebraic forms.

Run: python3 demos/03_oracle.py
"""
import numpy as np

from massey_flow.oracle import compare_Vn_Hn, track_branches, vanishing_flag
from massey_flow.models import build_fixture

for name in ("shift", "order2-shift", "torus"):
    spec = build_fixture(name)
    fam = track_branches(spec.jet, spec.metric, max_n=3)
    flag = vanishing_flag(fam, 3)
    print(f"{name}: |A_n| = {[len(a) for a in flag.A]}")
    for n in (1, 2, 3):
        if not len(flag.A[n]):
            continue
        c = compare_Vn_Hn(spec.jet, spec.metric, fam, n, 1e-5, flag=flag)
        ev = np.round(np.sort(flag.derivatives[n, flag.A[n]]), 8)
        print(f"   n={n} branch derivatives {ev}  angle {c.max_angle:.1e}  "
              f"eigen defect {c.eig_defect:.1e}  {'ok' if c.passed else 'FAIL'}")
