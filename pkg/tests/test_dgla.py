import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import cgauss
from massey_flow.dgla import (
    DGLA,
    GLA,
    FlatSeries,
    ModuleAction,
    bar,
    build_massey_system,
    canonical_flat_system,
    cohomology_class,
    compare_with_page,
    compatible_delta,
    epsilon_sign,
    extend_flat_series,
    harmonic_basis,
    hybrid_compatible_delta,
    hybrid_massey,
    massey_product,
    module_jet,
    multi_indices,
    proper_pairs,
    series_jet,
    twisted_differential,
    validate_dgla,
    validate_flat_series,
    validate_gla,
    validate_module,
)
from massey_flow.errors import AxiomViolation, NotCocycle, Obstructed, RecursionViolation
from massey_flow.graded import GradedSpace
from massey_flow.jets import build_page
from massey_flow.models import (
    ExteriorAlgebra,
    build_fixture,
    gl_fiber,
    line_module_model,
    random_dgla_model,
    sl2_fiber,
    tensor_gla,
)


@pytest.fixture(scope="module")
def sl2():
    return build_fixture("sl2")


# ---------------------------------------------------------------- combinatorics

def koszul_sign(J, K, deg):
    """Sign of the shuffle J + K -> sorted order, every x_i carrying parity |x_i| + 1."""
    seq = list(J) + list(K)
    sign = 1
    for i in range(len(seq)):
        for j in range(len(seq) - 1 - i):
            a, b = seq[j], seq[j + 1]
            if a > b:
                if (deg[a] + 1) * (deg[b] + 1) % 2:
                    sign = -sign
                seq[j], seq[j + 1] = b, a
    return sign


@pytest.mark.parametrize("m", range(2, 7))
def test_proper_pair_count(m):
    I = tuple(range(1, m + 1))
    pp = proper_pairs(I)
    assert len(pp) == 2 ** (m - 1) - 1
    for J, K in pp:
        assert J[0] == 1 and set(J) | set(K) == set(I) and not set(J) & set(K) and K


def test_proper_pairs_on_sparse_labels():
    assert proper_pairs((2, 5)) == [((2,), (5,))]
    with pytest.raises(ValueError):
        proper_pairs((3,))


def test_epsilon_random_cases():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        m = int(rng.integers(2, 7))
        deg = {i: int(rng.integers(0, 4)) for i in range(1, m + 1)}
        pairs = proper_pairs(tuple(range(1, m + 1)))
        J, K = pairs[int(rng.integers(len(pairs)))]
        assert epsilon_sign(J, K, deg) == koszul_sign(J, K, deg)
        assert epsilon_sign(J, K, [deg[i] for i in range(1, m + 1)]) == epsilon_sign(J, K, deg)


def test_multi_indices():
    assert multi_indices(3, 2) == [(1, 2), (1, 3), (2, 3)]


# ---------------------------------------------------------------- axioms

def test_fixture_dglas_satisfy_axioms(sl2):
    assert validate_dgla(sl2.dgla).max_defect <= 1e-12
    assert validate_dgla(random_dgla_model(3).dgla).max_defect <= 1e-10


def test_corrupted_bracket_names_a_jacobi_triple():
    spec = build_fixture("corrupted-bracket")
    with pytest.raises(AxiomViolation) as info:
        validate_dgla(spec.dgla)
    assert info.value.axiom == "jacobi"
    assert len(info.value.indices) == 3


def test_structure_blocks_round_trip(sl2):
    L = sl2.dgla.gla
    again = GLA.from_blocks(L.space, L.structure_blocks())
    assert np.array_equal(again.C, L.C)


def test_degree_additivity_enforced():
    sp = GradedSpace([1, 1])
    C = np.zeros((2, 2, 2))
    C[0, 1, 1] = 1.0  # [e1, e1] in degree 0 is not degree additive
    with pytest.raises(ValueError):
        GLA(sp, C)


@given(st.integers(0, 10_000), st.integers(1, 3), st.integers(1, 2))
def test_tensor_glas_are_lie(seed, m, n):
    L = tensor_gla(ExteriorAlgebra(m), gl_fiber(n) if n > 1 else sl2_fiber())
    rep = validate_gla(L)
    assert rep.max_defect <= 1e-12
    rng = np.random.default_rng(seed)
    x, y = cgauss(rng, L.space.total_dim), cgauss(rng, L.space.total_dim)
    # even-even elements: plain antisymmetry
    e = np.zeros_like(x)
    e[L.space.slice(0)] = x[L.space.slice(0)]
    f = np.zeros_like(y)
    f[L.space.slice(0)] = y[L.space.slice(0)]
    assert np.allclose(L.bracket(e, f), -L.bracket(f, e))


@given(st.integers(0, 10_000))
def test_twisted_differential_square(seed):
    """d_a o d_a = ad(da + 1/2 [a, a]) for any degree-1 a."""
    D = build_fixture("sl2").dgla
    rng = np.random.default_rng(seed)
    a = np.zeros(D.space.total_dim, complex)
    a[D.space.slice(1)] = cgauss(rng, D.space.dim(1))
    da, defect = twisted_differential(D, a)
    F = D.d(a) + 0.5 * D.bracket(a, a)
    assert np.allclose(da.matrix() @ da.matrix(), D.ad(F), atol=1e-10)
    assert np.isclose(defect, np.linalg.norm(F))


# ---------------------------------------------------------------- flat series

def test_flat_series_checks(sl2):
    s = sl2.flat_series
    assert validate_flat_series(sl2.dgla, s).max_residual <= 1e-12
    a1 = sl2.algebra_vector("dx1*E") + sl2.algebra_vector("dx2*F")
    with pytest.raises(RecursionViolation) as info:
        validate_flat_series(sl2.dgla, FlatSeries([a1, np.zeros_like(a1)]))
    assert info.value.order == 2


def test_extend_flat_series():
    spec = random_dgla_model(2)
    s = extend_flat_series(spec.dgla, [spec.flat_series.a(1), spec.flat_series.a(2), None], 3)
    assert validate_flat_series(spec.dgla, s).max_residual <= 1e-10


def test_series_jet_is_flat():
    from massey_flow.jets import validate_flat_jet

    spec = random_dgla_model(1)
    assert validate_flat_jet(series_jet(spec.dgla, spec.flat_series, 4)).accepted


# ---------------------------------------------------------------- Massey systems

def random_cocycle(D, p, rng):
    H = harmonic_basis(D.d, p)
    if not H.shape[1]:
        return None
    x = D.space.embed(p, H @ cgauss(rng, H.shape[1]))
    # add an exact piece so inputs are not harmonic
    if p >= 1 and D.space.dim(p - 1):
        x = x + D.d(D.space.embed(p - 1, cgauss(rng, D.space.dim(p - 1))))
    return x


def test_two_fold_product_is_the_cup_product(sl2):
    rng = np.random.default_rng(3)
    D = sl2.dgla
    for p, q in [(1, 1), (0, 1), (1, 2), (2, 1)]:
        x1, x2 = random_cocycle(D, p, rng), random_cocycle(D, q, rng)
        M = build_massey_system(D, [x1, x2])
        P = massey_product(M)
        assert np.array_equal(P.cocycle, D.bracket(bar(x1, p), x2))
        assert P.degree == p + q


def test_not_a_cocycle_is_rejected():
    spec = random_dgla_model(2)
    D = spec.dgla
    x = np.zeros(D.space.total_dim, complex)
    x[D.space.slice(0)] = 1.0
    if np.linalg.norm(D.d(x)) > 1e-8:
        with pytest.raises(NotCocycle):
            build_massey_system(D, [x, x])


def test_obstructed_fixture():
    spec = build_fixture("obstructed")
    xs = [spec.algebra_vector(lab) for lab in spec.meta["massey_inputs"]]
    with pytest.raises(Obstructed) as info:
        build_massey_system(spec.dgla, xs)
    assert info.value.class_norm > 0.5


@given(st.integers(0, 10_000), st.integers(2, 4))
def test_general_products_are_cocycles(seed, n):
    rng = np.random.default_rng(seed)
    D = random_dgla_model(seed % 7, m=2, n=2, order=4).dgla
    degs = [int(rng.integers(0, 2)) for _ in range(n)]
    xs = [random_cocycle(D, p, rng) for p in degs]
    if any(x is None for x in xs):
        return
    try:
        M = build_massey_system(D, xs)
    except Obstructed:
        return
    assert M.max_residual() <= 1e-9
    P = massey_product(M)
    assert np.linalg.norm(D.d(P.cocycle)) <= 1e-9 * max(1.0, np.linalg.norm(P.cocycle))
    assert P.degree == sum(degs) - n + 2


@pytest.mark.parametrize("name", ["abelian", "sl2", "random-dgla"])
def test_canonical_system(name):
    spec = build_fixture(name)
    s = spec.flat_series.padded(4)
    M = canonical_flat_system(spec.dgla, s, 4)
    assert M.max_residual() <= 1e-10


@pytest.mark.parametrize("seed", [1, 4, 6])
def test_compatible_delta_matches_page(seed):
    spec = random_dgla_model(seed)
    jet = series_jet(spec.dgla, spec.flat_series, 4)
    for n in (1, 2, 3):
        page = build_page(jet, n)
        for j in range(page.reps.dim):
            cd = compatible_delta(spec.dgla, spec.flat_series, page.reps.basis[:, j], n)
            assert compare_with_page(jet, cd, page=page) <= 1e-8


def test_first_order_delta_is_the_bracket(sl2):
    jet = series_jet(sl2.dgla, sl2.flat_series, 3)
    page = build_page(jet, 1)
    a1 = sl2.flat_series.a(1)
    for j in range(page.reps.dim):
        u = page.reps.basis[:, j]
        assert np.allclose(page.class_of(page.delta(u)), page.class_of(sl2.dgla.bracket(a1, u)), atol=1e-10)


# ---------------------------------------------------------------- modules

def test_line_module_hybrid():
    spec = line_module_model(order=3)
    assert max(validate_module(spec.module).values()) <= 1e-12
    jet = module_jet(spec.module, spec.flat_series, 3)
    for n in (1, 2):
        page = build_page(jet, n, metric=spec.metric)
        for j in range(page.reps.dim):
            cd = hybrid_compatible_delta(spec.module, spec.flat_series, page.reps.basis[:, j], n, metric=spec.metric)
            assert compare_with_page(jet, cd, metric=spec.metric, page=page) <= 1e-8


def test_trivial_action_gives_zero_products(sl2):
    D = sl2.dgla
    sp = GradedSpace([1, 3, 3, 1])
    R = np.zeros((sp.total_dim, sp.total_dim, D.space.total_dim), complex)
    from massey_flow.graded import GradedMap

    ma = ModuleAction(D, sp, GradedMap.zero(sp), R)
    rng = np.random.default_rng(0)
    e = np.zeros(sp.total_dim, complex)
    e[sp.slice(1)] = cgauss(rng, 3)
    y = random_cocycle(D, 1, rng)
    M, P = hybrid_massey(ma, e, [y])
    assert np.linalg.norm(P.cocycle) == 0


def test_broken_module_is_rejected():
    ma = build_fixture("torus-sl2").module
    R = 2.0 * ma.R  # rho(x) -> 2 rho(x) breaks [rho x, rho y] = rho [x, y]
    bad = ModuleAction(ma.algebra, ma.space, ma.d, R)
    with pytest.raises(AxiomViolation):
        validate_module(bad)
