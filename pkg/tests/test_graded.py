import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import cgauss
from massey_flow.errors import Inconsistent
from massey_flow.graded import (
    GradedMap,
    GradedSpace,
    HermitianMetric,
    Subspace,
    adjoint_map,
    image,
    kernel,
    max_angle,
    principal_angles,
    solve_min_norm,
    subspace_meet,
    subspace_sum,
)
from massey_flow.randjets import random_metric


def square(M):
    sp = GradedSpace([M.shape[0]])
    return sp, GradedMap(sp, sp, 0, [M])


def random_metric_for(dims, seed, mag=0.4):
    sp = GradedSpace(dims)
    return sp, random_metric(sp, np.random.default_rng(seed), mag)


def test_space_bookkeeping():
    sp = GradedSpace([2, 0, 3])
    assert sp.total_dim == 5
    assert list(sp.degree_of) == [0, 0, 2, 2, 2]
    assert sp.slice(1) == slice(2, 2)


def test_kernel_image_basic_cases(rng):
    sp, Z = square(np.zeros((3, 3)))
    assert kernel(Z).dim == 3 and image(Z).dim == 0
    _, I = square(np.eye(3))
    assert kernel(I).dim == 0 and image(I).dim == 3
    _, R = square(cgauss(rng, 5, 3) @ cgauss(rng, 3, 5))
    assert kernel(R).dim == 2
    assert image(R).dim == 3


def test_map_blocks_are_checked():
    sp = GradedSpace([2, 1])
    with pytest.raises(ValueError):
        GradedMap(sp, sp, 1, [np.ones((2, 2))])
    with pytest.raises(ValueError):
        GradedMap.from_matrix(sp, sp, 1, np.ones((3, 3)))


def test_adjoint_identity_metric_is_conjugate_transpose(rng):
    sp = GradedSpace([2, 3])
    m = GradedMap(sp, sp, 1, [cgauss(rng, 3, 2)])
    a = adjoint_map(m)
    assert a.shift == -1
    assert np.allclose(a.block(1), m.block(0).conj().T)
    assert np.allclose(adjoint_map(a).matrix(), m.matrix(), atol=1e-14)


def test_adjoint_random_metric_pairs(rng):
    sp, g = random_metric_for([3, 4, 2], 7)
    m = GradedMap(sp, sp, 1, [cgauss(rng, 4, 3), cgauss(rng, 2, 4)])
    a = adjoint_map(m, g)
    worst = 0.0
    for _ in range(100):
        x, y = cgauss(rng, sp.total_dim), cgauss(rng, sp.total_dim)
        worst = max(worst, abs(g.inner(m(x), y) - g.inner(x, a(y))) / (g.norm(x) * g.norm(y)))
    assert worst <= 1e-12


def test_solve_min_norm_cases(rng):
    sp, Z = square(np.zeros((3, 3)))
    assert np.allclose(solve_min_norm(Z, np.zeros(3)), 0)
    _, I = square(np.eye(3))
    v = cgauss(rng, 3)
    assert np.allclose(solve_min_norm(I, v), v)
    M = cgauss(rng, 5, 3) @ cgauss(rng, 3, 5)
    _, R = square(M)
    b = M @ cgauss(rng, 5)
    x = solve_min_norm(R, b)
    assert np.linalg.norm(M @ x - b) <= 1e-10 * np.linalg.norm(b)
    K = kernel(R).basis
    assert np.linalg.norm(K.conj().T @ x) <= 1e-10 * np.linalg.norm(x)
    with pytest.raises(Inconsistent):
        solve_min_norm(R, cgauss(rng, 5) * 10 + b * 0 + np.linalg.svd(M)[0][:, -1] * 5)


def test_meet_cases(rng):
    sp = GradedSpace([5])
    A = Subspace.span(sp, None, cgauss(rng, 5, 3))
    assert subspace_meet(A, A).dim == 3
    Q = np.linalg.qr(cgauss(rng, 5, 5))[0]
    assert subspace_meet(Subspace.span(sp, None, Q[:, :2]), Subspace.span(sp, None, Q[:, 2:])).dim == 0
    c = cgauss(rng, 5)
    B1 = Subspace.span(sp, None, np.column_stack([c, cgauss(rng, 5, 2)]))
    B2 = Subspace.span(sp, None, np.column_stack([c, cgauss(rng, 5, 2)]))
    M = subspace_meet(B1, B2)
    assert M.dim == 1
    assert M.residual(c) <= 1e-10 * np.linalg.norm(c)


def test_principal_angle_cases():
    sp = GradedSpace([2])
    e1 = Subspace.span(sp, None, np.array([[1.0], [0.0]]))
    e2 = Subspace.span(sp, None, np.array([[0.0], [1.0]]))
    assert principal_angles(e1, e1) == [0.0]
    assert abs(principal_angles(e1, e2)[0] - np.pi / 2) <= 1e-15
    theta = 0.3217
    r = Subspace.span(sp, None, np.array([[np.cos(theta)], [np.sin(theta)]]))
    assert abs(principal_angles(e1, r)[0] - theta) <= 1e-12


@given(st.integers(0, 10_000), st.lists(st.integers(0, 5), min_size=2, max_size=4))
def test_rank_nullity_and_hodge_split(seed, dims):
    rng = np.random.default_rng(seed)
    sp, g = random_metric_for(dims, seed)
    blocks = []
    for p in range(len(dims) - 1):
        r = int(rng.integers(0, min(dims[p], dims[p + 1]) + 1))
        blocks.append(cgauss(rng, dims[p + 1], r) @ cgauss(rng, r, dims[p]))
    m = GradedMap(sp, sp, 1, blocks)
    K, I = kernel(m, g), image(m, g)
    assert K.dim + I.dim == sp.total_dim - dims[-1] + (dims[-1])  # top degree maps to nothing
    for p in range(len(dims) - 1):
        assert K.dims_by_degree()[p] + I.dims_by_degree()[p + 1] == dims[p]
    # target = im m  (+)  ker m*
    split = subspace_sum(I, kernel(adjoint_map(m, g), g))
    assert split.dim == sp.total_dim
    assert max_angle(split, Subspace.whole(sp, g)) <= 1e-8
    # ker m is orthogonal to im m*
    J = image(adjoint_map(m, g), g)
    if K.dim and J.dim:
        assert np.linalg.norm(K.frame_basis().conj().T @ J.frame_basis()) <= 1e-8


@given(st.integers(0, 10_000))
def test_min_norm_is_minimal(seed):
    rng = np.random.default_rng(seed)
    sp, g = random_metric_for([6], seed)
    M = cgauss(rng, 6, 3) @ cgauss(rng, 3, 6)
    m = GradedMap(sp, sp, 0, [M])
    x = solve_min_norm(m, M @ cgauss(rng, 6), g)
    K = kernel(m, g)
    for j in range(K.dim):
        assert g.norm(x + 1e-3 * K.basis[:, j]) > g.norm(x)


@given(st.integers(0, 10_000))
def test_metric_frame_round_trip(seed):
    rng = np.random.default_rng(seed)
    sp, g = random_metric_for([2, 3], seed)
    x, y = cgauss(rng, 5), cgauss(rng, 5)
    assert np.allclose(g.from_frame(g.to_frame(x)), x)
    assert abs(g.inner(x, y) - np.vdot(g.to_frame(y), g.to_frame(x))) <= 1e-10 * g.norm(x) * g.norm(y)
    with pytest.raises(ValueError):
        HermitianMetric(sp, [-np.eye(2), None])
