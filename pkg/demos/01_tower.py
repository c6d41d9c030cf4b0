"""Pages of the jet tower for a few small families.

Run: python3 demos/01_tower.py
"""
from massey_flow.jets import build_page, next_page_dims
from massey_flow.models import build_fixture
from massey_flow.randjets import random_flat_jet

# The shift: d(t) = t*d1 on C -> C. Page 1 sees the whole space, then dies.
for name in ("shift", "order2-shift", "constant", "torus"):
    spec = build_fixture(name)
    dims = [build_page(spec.jet, n, metric=spec.metric).Gn_dims for n in range(1, 4)]
    print(f"{name:14s} page dims n=1..3: {dims}")

# A random flat jet. The page law says dim G_{n+1} = ker delta_n - im delta_n.
jet, metric, _ = random_flat_jet((2, 4, 3, 1), 4, seed=3, mode="c")
for n in range(1, 4):
    page = build_page(jet, n, metric=metric)
    print(f"n={n}  G_n={page.Gn_dims}  predicted G_(n+1)={next_page_dims(page)}  "
          f"square residual={page.square_residual:.1e}")
