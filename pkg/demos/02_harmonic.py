"""Harmonic representatives and the comparison map to the algebraic pages.

Run: python3 demos/02_harmonic.py
"""
from massey_flow.hodge import harmonic_page, verify_phi
from massey_flow.jets import build_page
from massey_flow.models import build_fixture, perturb_metric

spec = build_fixture("torus-sl2")
for n in (1, 2, 3):
    page = build_page(spec.jet, n, metric=spec.metric)
    hp = harmonic_page(spec.jet, spec.metric, n, page=page)
    rep = verify_phi(spec.jet, spec.metric, n, page=page, hpage=hp)
    print(f"n={n}  dim H_n={hp.dims}  dim G_n={page.Gn_dims}  "
          f"adjointness={hp.adjointness_defect():.1e}  conjugation={rep.conjugation_defect:.1e}")

# Changing the metric moves H_n inside the ambient space but not its dimensions.
other = perturb_metric(spec, 0.4, seed=11)
print("perturbed metric dims:", [harmonic_page(other.jet, other.metric, n).dims for n in (1, 2, 3)])
