"""Signatures of the page forms and the local spectral flow.

Run: python3 demos/04_signature.py
"""
from massey_flow.models import build_fixture, random_torus_model
from massey_flow.signature import form_BnD, form_Qn, local_spectral_flow

specs = [build_fixture(n) for n in ("circle", "torus", "torus-sl2", "torus-l3")]
specs.append(random_torus_model(2, ell=2))
for spec in specs:
    sigs = [(form_Qn(spec.jet, spec.pairing, n, metric=spec.metric).sig,
             form_BnD(spec.jet, spec.star, spec.metric, n).sig) for n in (1, 2, 3)]
    print(f"{spec.name:22s} ell={spec.ell}  (sig Q_n, sig B_n(D)) for n=1..3: {sigs}")

spec = build_fixture("torus-sl2")
sf = local_spectral_flow(spec.jet, spec.star, spec.metric, max_n=3)
for row in sf.rows:
    print(f"  n={row.n} count={row.count} sig={row.sig_Q} nullity={row.nullity_Q}")
print(f"  spectral flow {sf.spectral_flow}, complete={sf.complete}, left over {sf.residual_even_dims}")
