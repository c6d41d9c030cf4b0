import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import cgauss
from massey_flow.errors import MatchingAmbiguity
from massey_flow.graded import GradedMap, GradedSpace
from massey_flow.jets import OperatorJet
from massey_flow.models import build_fixture, conjugation_model, order2_shift_model, shift_model
from massey_flow.oracle import (
    T_coefficients,
    assemble_T,
    compare_Vn_Hn,
    diagonality_defect,
    form_Bn_direct,
    stability_gate,
    track_branches,
    track_family,
    vanishing_flag,
)
from massey_flow.randjets import random_flat_jet


def test_assemble_T_cases():
    sp = GradedSpace([2, 2])
    zero = OperatorJet(sp, GradedMap.zero(sp), [])
    assert np.linalg.norm(assemble_T(zero, None, 0.0)) == 0
    jet = shift_model().jet
    for t in (-0.3, 0.2):
        assert np.allclose(np.linalg.eigvalsh(assemble_T(jet, None, t)), sorted([t, -t]))
    jet, metric, _ = random_flat_jet((2, 3, 2), 3, 4, mode="b", metric_magnitude=0.4)
    T = assemble_T(jet, metric, 0.37)
    assert np.linalg.norm(T - T.conj().T) <= 1e-12 * max(1.0, np.linalg.norm(T))


def test_shift_branches():
    fam = track_branches(shift_model().jet)
    assert sorted(fam.derivative(1)) == pytest.approx([-1, 1], abs=1e-10)
    assert max(fam.fit_residuals) <= 1e-10
    flag = vanishing_flag(fam, 2)
    assert flag.sizes()[1:] == [2, 0]
    B = form_Bn_direct(shift_model().jet, None, fam, 1, flag)
    assert np.allclose(np.sort(np.diag(B).real), [-1, 1], atol=1e-8)
    assert diagonality_defect(B) <= 1e-8
    assert compare_Vn_Hn(shift_model().jet, None, fam, 2, flag=flag).dim_V == 0


def test_order2_shift_branches():
    jet = order2_shift_model().jet
    fam = track_branches(jet)
    assert np.abs(fam.derivative(1)).max() <= 1e-8
    assert sorted(fam.derivative(2)) == pytest.approx([-2, 2], abs=1e-8)
    flag = vanishing_flag(fam, 3)
    assert flag.sizes()[1:] == [2, 2, 0]
    B = form_Bn_direct(jet, None, fam, 2, flag)
    assert np.allclose(np.sort(np.diag(B).real), [-2, 2], atol=1e-8)


def test_zero_family_flag():
    sp = GradedSpace([2, 1])
    fam = track_branches(OperatorJet(sp, GradedMap.zero(sp), [GradedMap.zero(sp)] * 3), max_n=3)
    flag = vanishing_flag(fam, 3)
    assert flag.sizes() == [3, 3, 3, 3]


def test_conjugation_family_is_isospectral():
    spec = conjugation_model()
    fam = track_branches(spec.jet, spec.metric)
    drift = np.abs(fam.values - fam.values[len(fam.ts) // 2]).max()
    assert drift <= 1e-8
    flag = vanishing_flag(fam, 3)
    for n in (1, 2, 3):
        assert compare_Vn_Hn(spec.jet, spec.metric, fam, n, flag=flag).passed


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("mode", ["a", "b"])
def test_direct_form_is_diagonal(seed, mode):
    jet, metric, _ = random_flat_jet((2, 3, 2), 3, seed, mode=mode, metric_magnitude=0.3)
    fam = track_branches(jet, metric)
    flag = vanishing_flag(fam, 3)
    for n in (1, 2, 3):
        B = form_Bn_direct(jet, metric, fam, n, flag)
        d = np.diag(B).real
        # diagonality is only meaningful where the form is not identically zero
        if B.size and np.abs(d).max() >= 1e-3:
            assert diagonality_defect(B) <= 1e-6
        if B.size:
            assert np.allclose(np.sort(d), np.sort(flag.derivatives[n, flag.A[n]]), atol=1e-4 * max(1.0, abs(d).max()))


def test_form_direct_rejects_foreign_family():
    fam = track_branches(shift_model().jet)
    with pytest.raises(ValueError):
        form_Bn_direct(order2_shift_model().jet, None, fam, 1)


@given(st.integers(0, 5000), st.sampled_from(["a", "b", "c"]))
def test_oracle_agrees_with_harmonic_pages(seed, mode):
    jet, metric, _ = random_flat_jet((2, 3, 2), 3, seed, mode=mode, metric_magnitude=0.2)
    fam = track_branches(jet, metric)
    flag = vanishing_flag(fam, 3)
    for n in (1, 2, 3):
        c = compare_Vn_Hn(jet, metric, fam, n, 1e-5, flag=flag)
        assert c.passed, c.as_dict()


def test_stability_gate():
    jet, metric, _ = random_flat_jet((2, 3, 2), 3, 5, mode="c")
    rep = stability_gate(T_coefficients(jet, metric), 3)
    assert rep.passed and len(rep.per_order) == 3


def test_matching_ambiguity_is_raised():
    # the linear term overwhelms the diagonal one between two grid points,
    # so eigenvectors at neighbouring samples have no dominant match
    rng = np.random.default_rng(1)
    X = cgauss(rng, 4, 4)
    taylor = [np.diag([4.0, 3, 2, 1]).astype(complex), 1000 * (X + X.conj().T)]
    with pytest.raises(MatchingAmbiguity) as info:
        track_family(taylor, radius=1.0, samples=11, fit_degree=3, max_shrink=0)
    assert info.value.interval == pytest.approx((-0.2, 0.0))
    # shrinking the radius resolves it
    fam = track_family(taylor, radius=1.0, samples=11, fit_degree=3, max_shrink=12)
    assert fam.radius < 1e-3


@given(st.integers(0, 5000), st.integers(0, 2), st.integers(0, 2))
def test_orthogonal_pieces_vanish_separately(seed, a, b):
    """u(t) in the image of d_t and v(t) in the image of d_t^*: the vanishing
    order of u + v is the smaller of the two."""
    rng = np.random.default_rng(seed)
    jet, _, _ = random_flat_jet((3, 3, 3), 4, seed, mode="b")
    N = jet.space.total_dim
    d = [jet.coeff(i).matrix() for i in range(5)]

    def series(mats, vecs, upto):
        out = [np.zeros(N, complex) for _ in range(upto + 1)]
        for i, M in enumerate(mats):
            for j, x in enumerate(vecs):
                if i + j <= upto:
                    out[i + j] += M @ x
        return out

    x = [np.zeros(N, complex)] * a + [cgauss(rng, N) for _ in range(4 - a)]
    y = [np.zeros(N, complex)] * b + [cgauss(rng, N) for _ in range(4 - b)]
    u = series(d, x, 3)
    v = series([m.conj().T for m in d], y, 3)
    for k in range(4):
        assert abs(np.vdot(u[0], v[0])) <= 1e-10 * (1 + np.linalg.norm(u[0]) * np.linalg.norm(v[0]))

    def order(c):
        return next((k for k, ck in enumerate(c) if np.linalg.norm(ck) > 1e-9), None)

    assert order([p + q for p, q in zip(u, v)]) == min(o for o in (order(u), order(v)) if o is not None)
