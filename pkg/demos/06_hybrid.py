"""Hybrid products for a module over a DGLA, on the weight-one line module.

Run: python3 demos/06_hybrid.py
"""
from massey_flow.dgla import compare_with_page, hybrid_compatible_delta, module_jet
from massey_flow.jets import build_page
from massey_flow.models import line_module_model

spec = line_module_model(order=3)
jet = module_jet(spec.module, spec.flat_series, 3)
for n in (1, 2):
    page = build_page(jet, n, metric=spec.metric)
    for j in range(page.reps.dim):
        cd = hybrid_compatible_delta(spec.module, spec.flat_series, page.reps.basis[:, j], n, metric=spec.metric)
        print(f"n={n} class {j}: difference {compare_with_page(jet, cd, metric=spec.metric, page=page):.1e}")
