import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import cgauss
from massey_flow.graded import GradedMap, GradedSpace, HermitianMetric, Subspace, inclusion_defect, max_angle, subspace_sum
from massey_flow.hodge import dual_spaces, harmonic_page, next_harmonic_from_kernels, probe_dual_equals_bperp, verify_phi
from massey_flow.jets import OperatorJet, build_page, page_spaces
from massey_flow.models import shift_model
from massey_flow.randjets import random_flat_jet, random_metric


def const_jet():
    sp = GradedSpace([1, 2, 1])
    d0 = GradedMap(sp, sp, 1, [np.array([[1.0], [1.0]]), np.zeros((1, 2))])
    return OperatorJet(sp, d0, [GradedMap.zero(sp)] * 3)


def test_constant_jet_harmonic_space():
    jet = const_jet()
    for n in (1, 2, 3):
        hp = harmonic_page(jet, n=n)
        assert hp.dims == [0, 1, 1]
        assert np.linalg.norm(hp.D) == 0
        # usual harmonic space: ker d0 and ker d0*
        h = hp.Hn.basis
        assert np.linalg.norm(jet.d0.matrix() @ h) <= 1e-12
        assert np.linalg.norm(jet.d0.matrix().conj().T @ h) <= 1e-12
        assert dual_spaces(jet, n=n).dim == 3
        assert verify_phi(jet, n=n).passed


def test_shift_harmonic_pages():
    jet = shift_model().jet
    hp = harmonic_page(jet, n=1)
    assert hp.dims == [1, 1]
    e0, e1 = np.array([1.0, 0]), np.array([0, 1.0])
    assert np.allclose(abs(hp.delta_tilde(e0)), e1)
    assert np.allclose(abs(hp.delta_tilde_star(e1)), e0)
    assert dual_spaces(jet, n=2).dims_by_degree()[1] == 0
    assert verify_phi(jet, n=1).passed


@given(st.integers(0, 5000), st.sampled_from(["a", "b", "c"]))
def test_phi_and_adjointness_on_random_jets(seed, mode):
    jet, metric, _ = random_flat_jet((2, 4, 3, 1), 3, seed, mode=mode, metric_magnitude=0.3)
    rng = np.random.default_rng(seed)
    for n in (1, 2, 3):
        page = build_page(jet, n, metric=metric)
        hp = harmonic_page(jet, metric, n, page=page)
        rep = verify_phi(jet, metric, n, page=page, hpage=hp)
        assert rep.passed and rep.split_defect <= 1e-8
        assert hp.adjointness_defect() <= 1e-9
        # Z_n^* is orthogonal to B_n
        assert rep.dual_orthogonality_defect <= 1e-9
        # random-pair adjointness in the metric
        if hp.Hn.dim:
            x, y = hp.Hn.basis @ cgauss(rng, hp.Hn.dim), hp.Hn.basis @ cgauss(rng, hp.Hn.dim)
            lhs = metric.inner(hp.delta_tilde(x), y)
            rhs = metric.inner(x, hp.delta_tilde_star(y))
            assert abs(lhs - rhs) <= 1e-9 * metric.norm(x) * metric.norm(y) * max(1.0, np.linalg.norm(hp.D))
        # grading: off-degree blocks vanish
        dg = hp.Hn.degrees
        if dg is not None and len(dg):
            assert np.all(hp.D[dg[:, None] != dg[None, :] + 1] == 0)
        if n < 3:
            nxt = next_harmonic_from_kernels(hp)
            H2 = harmonic_page(jet, metric, n + 1).Hn
            assert nxt.dim == H2.dim and max_angle(nxt, H2) <= 1e-8


@given(st.integers(0, 5000))
def test_harmonic_dims_metric_independent(seed):
    jet, _, _ = random_flat_jet((2, 3, 2), 3, seed, mode="c")
    base = [harmonic_page(jet, None, n).dims for n in (1, 2, 3)]
    g = random_metric(jet.space, np.random.default_rng(seed + 1), 0.5)
    assert [harmonic_page(jet, g, n).dims for n in (1, 2, 3)] == base


def test_dual_bperp_probe_runs():
    jet, metric, _ = random_flat_jet((2, 3, 2), 3, 11, mode="c")
    for n in (1, 2, 3):
        out = probe_dual_equals_bperp(jet, metric, n)
        assert out["contained"]
