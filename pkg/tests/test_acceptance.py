"""Acceptance criteria, one test each.

Every test records a single PASS/FAIL line with the measured worst value and
its tolerance; the lines are printed in the pytest terminal summary and when
this file is run directly.
"""
import json
import math
import sys

import numpy as np
import pytest

from massey_flow.cli import main as cli_main
from massey_flow.dgla import (
    bar,
    build_massey_system,
    canonical_flat_system,
    compare_with_page,
    compatible_delta,
    epsilon_sign,
    harmonic_basis,
    hybrid_compatible_delta,
    massey_product,
    module_jet,
    proper_pairs,
    series_jet,
)
from massey_flow.hodge import harmonic_page, verify_phi
from massey_flow.jets import build_page, next_page_dims
from massey_flow.models import (
    build_fixture,
    fixture_builders,
    line_module_model,
    perturb_metric,
    random_dgla_model,
    random_torus_model,
)
from massey_flow.oracle import compare_Vn_Hn, multiset_defect, track_branches, vanishing_flag
from massey_flow.randjets import random_flat_jet
from massey_flow.signature import D_coefficients, form_BnD, form_Qn, local_spectral_flow
from massey_flow.oracle import track_family

RESULTS = []


def record(tag, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] {tag}: {detail}"
    RESULTS.append(line)
    print(line)
    return passed


def jet_fixtures():
    return [n for n in sorted(fixture_builders()) if n != "non-flat"]


def random_jets(count, order=4, seed0=0):
    dims_cycle = [(2, 3, 2), (1, 3, 3, 1), (2, 4, 3, 1), (3, 5, 2), (2, 2, 2, 2)]
    for k in range(count):
        seed = seed0 + k
        mode = "abc"[k % 3]
        dims = dims_cycle[k % len(dims_cycle)]
        yield random_flat_jet(dims, order, seed, mode=mode, metric_magnitude=0.3 if k % 2 else 0.0)


# ---------------------------------------------------------------- 1

def test_ac1_tower_soundness():
    worst_sq, mismatches = 0.0, 0
    for jet, metric, _ in random_jets(100):
        pages = [build_page(jet, n, metric=metric) for n in range(1, 5)]
        for n in range(3):
            worst_sq = max(worst_sq, pages[n].square_residual)
            if next_page_dims(pages[n]) != pages[n + 1].Gn_dims:
                mismatches += 1
    ok = worst_sq <= 1e-8 and mismatches == 0
    assert record("AC1 tower soundness (100 jets, n<=3)", ok,
                  f"max |dd|/scale = {worst_sq:.2e} (tol 1e-8), page-law mismatches = {mismatches}")


# ---------------------------------------------------------------- 2

def test_ac2_harmonic_isomorphism():
    worst_adj, worst_conj, dim_bad = 0.0, 0.0, []
    for name in jet_fixtures():
        spec = build_fixture(name)
        for n in range(1, min(3, spec.jet.order) + 1):
            page = build_page(spec.jet, n, metric=spec.metric)
            hp = harmonic_page(spec.jet, spec.metric, n, page=page, check=False)
            rep = verify_phi(spec.jet, spec.metric, n, page=page, hpage=hp)
            if hp.dims != page.Gn_dims:
                dim_bad.append((name, n))
            worst_adj = max(worst_adj, hp.adjointness_defect())
            worst_conj = max(worst_conj, rep.conjugation_defect)
    ok = not dim_bad and worst_adj <= 1e-9 and worst_conj <= 1e-7
    assert record("AC2 harmonic isomorphism (all fixtures)", ok,
                  f"dim mismatches = {dim_bad}, adjointness {worst_adj:.2e} (tol 1e-9), "
                  f"conjugation {worst_conj:.2e} (tol 1e-7)")


# ---------------------------------------------------------------- 3

def test_ac3_oracle_equivalence():
    cases = [(f, build_fixture(f).jet, build_fixture(f).metric) for f in ("shift", "order2-shift", "torus")]
    cases += [(f"random-{k}", jet, metric) for k, (jet, metric, _) in enumerate(random_jets(20, order=3, seed0=500))]
    worst_ang, worst_eig, failed = 0.0, 0.0, []
    for name, jet, metric in cases:
        N = min(3, jet.order)
        fam = track_branches(jet, metric, max_n=N)
        flag = vanishing_flag(fam, N)
        for n in range(1, N + 1):
            c = compare_Vn_Hn(jet, metric, fam, n, 1e-5, flag=flag)
            worst_ang, worst_eig = max(worst_ang, c.max_angle), max(worst_eig, c.eig_defect)
            if not c.passed:
                failed.append((name, n))
    # the D family of the torus against B_n(D)
    t = build_fixture("torus")
    famD = track_family(D_coefficients(t.jet, t.star, t.metric), fit_degree=5)
    flagD = vanishing_flag(famD, 3)
    for n in (1, 2, 3):
        b = form_BnD(t.jet, t.star, t.metric, n)
        d = multiset_defect(flagD.derivatives[n, flagD.A[n]], b.eigenvalues)
        worst_eig = max(worst_eig, d)
        if d > 1e-5:
            failed.append(("torus-D", n))
    ok = not failed
    assert record("AC3 oracle equivalence (23 jets + torus D, n<=3)", ok,
                  f"max angle {worst_ang:.2e}, max eigenvalue defect {worst_eig:.2e} (tol 1e-5), failures {failed}")


# ---------------------------------------------------------------- 4

def test_ac4_micro_cases():
    shift = build_fixture("shift").jet
    fam = track_branches(shift, max_n=3)
    fl = vanishing_flag(fam, 3)
    e1 = np.sort(fl.derivatives[1, fl.A[1]])
    alg1 = np.sort(np.linalg.eigvalsh(harmonic_page(shift, None, 1).form_T()))
    o2 = build_fixture("order2-shift").jet
    fam2 = track_branches(o2, max_n=3)
    fl2 = vanishing_flag(fam2, 3)
    e2 = np.sort(fl2.derivatives[2, fl2.A[2]])
    alg2 = np.sort(np.linalg.eigvalsh(harmonic_page(o2, None, 2).form_T()))
    err = max(np.abs(e1 - [-1, 1]).max(), np.abs(alg1 - [-1, 1]).max(),
              np.abs(e2 - [-2, 2]).max(), np.abs(alg2 - [-2, 2]).max())
    ok = err <= 1e-8 and len(fl2.A[3]) == 0
    assert record("AC4 shift B1 = {+-1}, order-2 shift B2 = {+-2}, |A3| = 0", ok,
                  f"max deviation {err:.2e} (tol 1e-8), |A3| = {len(fl2.A[3])}")


# ---------------------------------------------------------------- 5

def test_ac5_signature_equality():
    specs = [build_fixture(f) for f in ("constant", "circle", "torus", "torus-sl2", "torus-l3")]
    specs += [random_torus_model(s, ell=1 + s % 3) for s in range(6)]
    bad, rows = [], 0
    for spec in specs:
        for n in range(1, 4):
            q = form_Qn(spec.jet, spec.pairing, n, metric=spec.metric)
            b = form_BnD(spec.jet, spec.star, spec.metric, n)
            rows += 1
            if q.sig != b.sig:
                bad.append((spec.name, n, q.sig, b.sig))
    ells = sorted({s.ell for s in specs})
    assert record("AC5 sig B_n(D) = sig Q_n", not bad,
                  f"{rows} (model, n) pairs over ell in {ells}, mismatches {bad}")


# ---------------------------------------------------------------- 6

def test_ac6_metric_independence():
    def profile(spec):
        out = []
        for n in (1, 2, 3):
            page = build_page(spec.jet, n, metric=spec.metric)
            out.append((tuple(page.Gn_dims), form_Qn(spec.jet, spec.pairing, n, page=page).sig))
        return out

    refs, changed = {}, []
    for name in ("torus", "torus-sl2"):
        base = build_fixture(name)
        refs[name] = profile(base)
        changed += [(name, seed) for seed in range(20) if profile(perturb_metric(base, 0.3, seed)) != refs[name]]
    assert record("AC6 metric independence (torus and sl2 torus, 20 perturbations each)", not changed,
                  f"reference {refs}, changed {changed}")


# ---------------------------------------------------------------- 7

def test_ac7_massey_equivalence():
    specs = [build_fixture("abelian"), build_fixture("sl2")] + [random_dgla_model(s) for s in range(10)]
    worst_canon, worst_delta, checked = 0.0, 0.0, 0
    for spec in specs:
        s4 = spec.flat_series.padded(4)
        worst_canon = max(worst_canon, canonical_flat_system(spec.dgla, s4, 4).max_residual())
        jet = series_jet(spec.dgla, spec.flat_series, max(3, spec.flat_series.order))
        for n in (1, 2, 3):
            page = build_page(jet, n)
            for j in range(page.reps.dim):
                cd = compatible_delta(spec.dgla, spec.flat_series, page.reps.basis[:, j], n)
                worst_delta = max(worst_delta, compare_with_page(jet, cd, page=page))
                checked += 1
    # two-fold products against the cup product
    D = build_fixture("sl2").dgla
    rng = np.random.default_rng(0)
    cup = 0.0
    for p, q in [(1, 1), (0, 1), (1, 2)]:
        Hp, Hq = harmonic_basis(D.d, p), harmonic_basis(D.d, q)
        x1 = D.space.embed(p, Hp @ rng.standard_normal(Hp.shape[1]))
        x2 = D.space.embed(q, Hq @ rng.standard_normal(Hq.shape[1]))
        P = massey_product(build_massey_system(D, [x1, x2]))
        cup = max(cup, float(np.abs(P.cocycle - D.bracket(bar(x1, p), x2)).max()))
    ok = worst_canon <= 1e-10 and worst_delta <= 1e-8 and cup == 0.0
    assert record("AC7 Massey equivalence (abelian, sl2, 10 random)", ok,
                  f"canonical residual {worst_canon:.2e} (tol 1e-10), compatible vs jet {worst_delta:.2e} "
                  f"over {checked} classes (tol 1e-8), cup product deviation {cup:.1e} (exact)")


# ---------------------------------------------------------------- 8

def test_ac8_hybrid_products():
    spec = line_module_model(order=3)
    jet = module_jet(spec.module, spec.flat_series, 3)
    worst, checked = 0.0, 0
    for n in (1, 2):
        page = build_page(jet, n, metric=spec.metric)
        for j in range(page.reps.dim):
            cd = hybrid_compatible_delta(spec.module, spec.flat_series, page.reps.basis[:, j], n, metric=spec.metric)
            worst = max(worst, compare_with_page(jet, cd, metric=spec.metric, page=page))
            checked += 1
    assert record("AC8 hybrid products (weight-1 line module, n<=2)", worst <= 1e-8,
                  f"max difference {worst:.2e} over {checked} classes (tol 1e-8)")


# ---------------------------------------------------------------- 9

def _shuffle_sign(J, K, deg):
    seq, sign = list(J) + list(K), 1
    for i in range(len(seq)):
        for j in range(len(seq) - 1 - i):
            if seq[j] > seq[j + 1]:
                if (deg[seq[j]] + 1) * (deg[seq[j + 1]] + 1) % 2:
                    sign = -sign
                seq[j], seq[j + 1] = seq[j + 1], seq[j]
    return sign


def _eps_direct(J, K, deg):
    e = sum((deg[j] + 1) * (deg[k] + 1) for j in J for k in K if k < j)
    return (-1) ** e


def test_ac9_combinatorics():
    counts_ok = all(len(proper_pairs(tuple(range(1, m + 1)))) == 2 ** (m - 1) - 1 for m in range(2, 7))
    rng = np.random.default_rng(9)
    bad = 0
    for _ in range(1000):
        m = int(rng.integers(2, 7))
        deg = {i: int(rng.integers(0, 5)) for i in range(1, m + 1)}
        I = tuple(sorted(rng.choice(np.arange(1, 10), size=m, replace=False).tolist()))
        deg = {i: deg[k + 1] for k, i in enumerate(I)}
        pp = proper_pairs(I)
        J, K = pp[int(rng.integers(len(pp)))]
        s = epsilon_sign(J, K, deg)
        if s != _eps_direct(J, K, deg) or s != _shuffle_sign(J, K, deg):
            bad += 1
    ok = counts_ok and bad == 0
    assert record("AC9 |PP(I)| = 2^(|I|-1) - 1 and epsilon signs", ok,
                  f"counts exact for |I| <= 6: {counts_ok}, sign mismatches {bad}/1000")


# ---------------------------------------------------------------- 10

def test_ac10_determinism(tmp_path):
    runs = [
        ["validate", "fixture:torus-sl2", "--seed", "7"],
        ["spectral-flow", "fixture:torus", "--branches", "--seed", "7"],
        ["oracle", "fixture:order2-shift", "--compare", "--seed", "7"],
        ["massey", "fixture:random-dgla", "--order", "3", "--seed", "7"],
    ]
    differ = []
    for argv in runs:
        blobs = []
        for k in range(2):
            out = tmp_path / f"r{k}.json"
            cli_main(argv + ["--out", str(out)])
            blobs.append(out.read_bytes())
        json.loads(blobs[0])
        if blobs[0] != blobs[1]:
            differ.append(argv[0])
    assert record("AC10 byte-identical CLI reports", not differ,
                  f"{len(runs)} commands run twice, differing: {differ}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
