"""Graded Lie algebras with differential, flat series and Massey products.

Sign conventions used throughout this module:

* bar:      xbar = (-1)^(|x|+1) x
* epsilon:  eps(J, K) = sum over (j, k) in J x K with k < j of (|x_j|+1)(|x_k|+1)
* delta:    delta_n = n! tau_n and delta_n[u] = (-1)^(n+1) [Qtilde(u, a_1, ..., a_1)]
* modules:  right action e.x = -(-1)^(|e||x|) rho(x) e, so that the module
            family d_t = d_E + rho(a(t)) plays the role of d + [a(t), .]

Elements are ambient coordinate vectors on a GradedSpace.  A multi-index is a
sorted tuple of 1-based labels.
"""
import itertools
import math
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from .errors import AxiomViolation, NotCocycle, NotInDomain, Obstructed, RecursionViolation
from .graded import DEFAULT_TOL, GradedMap, GradedSpace, HermitianMetric, lstsq_min_norm, null_basis, range_basis
from .jets import OperatorJet, build_page, t_relation_solve

AXIOM_TOL = 1e-10


def _parity(k):
    return -1.0 if k % 2 else 1.0


def _scale(*arrays):
    return max([1.0] + [float(np.max(np.abs(a))) for a in arrays if np.size(a)])


def _deg(space, x, what="element"):
    p = space.homogeneous_degree(x)
    if p is None:
        raise ValueError(f"{what} must be homogeneous and nonzero")
    return p


# ---------------------------------------------------------------- algebras

class GLA:
    """Graded Lie algebra with dense structure constants.

    ``C[k, i, j]`` is the e_k coefficient of [e_i, e_j].  Entries that do not
    respect deg k = deg i + deg j are rejected.
    """

    def __init__(self, space, C, check_degrees=True):
        self.space = space
        C = np.asarray(C, dtype=complex)
        n = space.total_dim
        if C.shape != (n, n, n):
            raise ValueError(f"structure tensor must have shape {(n, n, n)}, got {C.shape}")
        if check_degrees and C.size:
            dg = space.degree_of
            bad = dg[:, None, None] != dg[None, :, None] + dg[None, None, :]
            if np.any(np.abs(C[bad]) > 0):
                raise ValueError("bracket is not degree additive")
        self.C = C

    @classmethod
    def abelian(cls, space):
        n = space.total_dim
        return cls(space, np.zeros((n, n, n), dtype=complex))

    def bracket(self, x, y):
        return np.einsum("kij,i,j->k", self.C, x, y)

    def ad(self, x):
        """Matrix of y -> [x, y]."""
        return np.einsum("kij,i->kj", self.C, x)

    def ad_map(self, x, shift=None):
        shift = _deg(self.space, x) if shift is None else shift
        return GradedMap.from_matrix(self.space, self.space, shift, self.ad(x), tol=0.0)

    def structure_blocks(self):
        """Nonzero blocks {(m, n): tensor of shape (dim m+n, dim m, dim n)}."""
        sp = self.space
        out = {}
        for m in range(len(sp.dims)):
            for n in range(len(sp.dims)):
                k = m + n
                if k >= len(sp.dims) or not (sp.dim(m) and sp.dim(n) and sp.dim(k)):
                    continue
                blk = self.C[sp.slice(k), sp.slice(m), sp.slice(n)]
                if np.any(blk != 0):
                    out[(m, n)] = blk
        return out

    @classmethod
    def from_blocks(cls, space, blocks):
        n = space.total_dim
        C = np.zeros((n, n, n), dtype=complex)
        for (m, q), blk in blocks.items():
            C[space.slice(m + q), space.slice(m), space.slice(q)] = blk
        return cls(space, C)


class DGLA:
    """A GLA with a degree +1 differential."""

    def __init__(self, gla, d=None):
        self.gla = gla
        self.space = gla.space
        self.d = GradedMap.zero(self.space, shift=1) if d is None else d
        if self.d.shift != 1:
            raise ValueError("a DGLA differential has degree +1")

    @property
    def dmatrix(self):
        return self.d.matrix()

    def bracket(self, x, y):
        return self.gla.bracket(x, y)

    def ad(self, x):
        return self.gla.ad(x)


@dataclass
class AxiomReport:
    antisymmetry: float
    jacobi: float
    leibniz: float = 0.0
    square: float = 0.0
    worst: dict = field(default_factory=dict)

    @property
    def max_defect(self):
        return max(self.antisymmetry, self.jacobi, self.leibniz, self.square)

    def as_dict(self):
        return {"antisymmetry": self.antisymmetry, "jacobi": self.jacobi, "leibniz": self.leibniz,
                "d_squared": self.square, "worst": {k: list(v) for k, v in self.worst.items()}}


def _argmax_index(arr):
    idx = np.unravel_index(int(np.argmax(arr)), arr.shape)
    return tuple(int(i) for i in idx)


def _gla_defects(L):
    C = L.C
    dg = L.space.degree_of
    n = L.space.total_dim
    worst = {}
    if n == 0:
        return 0.0, 0.0, worst
    scale = _scale(C)
    sgn = _parity(1) ** np.outer(dg, dg)  # (-1)^{|i||j|}
    anti = np.abs(C + sgn[None, :, :] * C.transpose(0, 2, 1)).max(axis=0) / scale
    worst["antisymmetry"] = _argmax_index(anti)
    a_def = float(anti.max())
    # [e_i,[e_j,e_k]] - [[e_i,e_j],e_k] - (-1)^{|i||j|}[e_j,[e_i,e_k]], one i at a time
    j_def, j_at = 0.0, (0, 0, 0)
    for i in range(n):
        adi = C[:, i, :]
        t1 = np.einsum("lm,mjk->ljk", adi, C)
        t2 = np.einsum("mj,lmk->ljk", adi, C)
        t3 = np.einsum("mk,ljm->ljk", adi, C) * sgn[i][None, :, None]
        r = np.abs(t1 - t2 - t3).max(axis=0)
        if r.max() / scale ** 2 > j_def:
            j_def = float(r.max() / scale ** 2)
            jk = _argmax_index(r)
            j_at = (i,) + jk
    worst["jacobi"] = j_at
    return a_def, j_def, worst


def validate_gla(L, tol=AXIOM_TOL, raise_on_failure=True):
    """Graded antisymmetry and Jacobi on all basis pairs and triples."""
    a_def, j_def, worst = _gla_defects(L)
    rep = AxiomReport(a_def, j_def, worst=worst)
    if raise_on_failure:
        if a_def > tol:
            raise AxiomViolation("antisymmetry", worst["antisymmetry"], a_def)
        if j_def > tol:
            raise AxiomViolation("jacobi", worst["jacobi"], j_def)
    return rep


def validate_dgla(D, tol=AXIOM_TOL, raise_on_failure=True):
    """GLA axioms plus d o d = 0 and d[x,y] = [dx,y] + (-1)^{|x|}[x,dy] on basis pairs."""
    rep = validate_gla(D.gla, tol, raise_on_failure)
    dm = D.dmatrix
    C = D.gla.C
    dg = D.space.degree_of
    n = D.space.total_dim
    if n:
        sq = np.abs(dm @ dm)
        rep.square = float(sq.max()) / _scale(dm) ** 2
        rep.worst["d_squared"] = _argmax_index(sq)
        lhs = np.einsum("lk,kij->lij", dm, C)
        rhs = np.einsum("mi,lmj->lij", dm, C) + _parity(1) ** dg[None, :, None] * np.einsum("mj,lim->lij", dm, C)
        lei = np.abs(lhs - rhs).max(axis=0)
        rep.leibniz = float(lei.max()) / (_scale(dm) * _scale(C))
        rep.worst["leibniz"] = _argmax_index(lei)
    if raise_on_failure:
        if rep.square > tol:
            raise AxiomViolation("d_squared", rep.worst["d_squared"], rep.square)
        if rep.leibniz > tol:
            raise AxiomViolation("leibniz", rep.worst["leibniz"], rep.leibniz)
    return rep


def twisted_differential(D, a):
    """d_a = d + [a, .] and the flatness defect |da + 1/2 [a,a]|."""
    a = np.asarray(a, dtype=complex)
    if np.linalg.norm(a) and _deg(D.space, a) != 1:
        raise ValueError("twisting element must have degree 1")
    da = D.d.matrix() + D.ad(a)
    defect = float(np.linalg.norm(D.d(a) + 0.5 * D.bracket(a, a)))
    return GradedMap.from_matrix(D.space, D.space, 1, da, tol=0.0), defect


# ---------------------------------------------------------------- cohomology helpers

def _d_block(d, p):
    """Matrix of d from degree p to p+1 (zero-size when out of range)."""
    src, tgt = d.source, d.target
    if not (0 <= p < len(src.dims)) or not (0 <= p + 1 < len(tgt.dims)):
        return np.zeros((tgt.dim(p + 1), src.dim(p)), dtype=complex)
    return d.block(p)


def exact_part(d, x, p, tol=DEFAULT_TOL):
    """Minimal-norm y of degree p-1 with dy closest to x (degree p)."""
    sp = d.target
    xp = sp.component(x, p)
    M = _d_block(d, p - 1)
    y, r = lstsq_min_norm(M, xp, tol) if M.size else (np.zeros(d.source.dim(p - 1), complex), float(np.linalg.norm(xp)))
    return y, r


def cohomology_class(d, x, tol=DEFAULT_TOL):
    """Class of a degree-p cocycle: coordinates on an orthonormal basis of
    ker d meet (im d)^perp in degree p, together with that basis and the
    harmonic representative."""
    sp = d.target
    p = sp.homogeneous_degree(x)
    if p is None:
        return np.zeros(0, dtype=complex), np.zeros((sp.total_dim, 0), complex), np.zeros(sp.total_dim, complex)
    H = harmonic_basis(d, p, tol)
    xp = sp.component(x, p)
    coords = H.conj().T @ xp
    return coords, sp.embed(p, H), sp.embed(p, H @ coords)


def harmonic_basis(d, p, tol=DEFAULT_TOL):
    """Orthonormal basis of ker(d_p) meet im(d_{p-1})^perp (standard inner product)."""
    sp = d.target
    dim = sp.dim(p)
    out = _d_block(d, p)
    inc = _d_block(d, p - 1)
    K = null_basis(out, tol) if out.size else np.eye(dim, dtype=complex)
    if inc.size and inc.shape[1]:
        R = range_basis(inc, tol)
        K = K - R @ (R.conj().T @ K)
        K = range_basis(K, tol) if K.size else K
    return K


# ---------------------------------------------------------------- flat series

@dataclass
class FlatSeries:
    """a(t) = sum_i a_i t^i with degree-1 coefficients a_1..a_N."""
    coeffs: list

    def __post_init__(self):
        self.coeffs = [np.asarray(a, dtype=complex) for a in self.coeffs]

    @property
    def order(self):
        return len(self.coeffs)

    def a(self, i):
        return self.coeffs[i - 1] if 1 <= i <= self.order else np.zeros_like(self.coeffs[0])

    def padded(self, order):
        z = np.zeros_like(self.coeffs[0])
        return FlatSeries(self.coeffs[:order] + [z] * max(0, order - self.order))


@dataclass
class FlatSeriesReport:
    residuals: list
    tol: float

    @property
    def max_residual(self):
        return max(self.residuals + [0.0])


def recursion_residual(D, s, n):
    """|da_n + 1/2 sum_{i=1}^{n-1}[a_i, a_{n-i}]| relative to the data scale."""
    r = D.d(s.a(n))
    for i in range(1, n):
        r = r + 0.5 * D.bracket(s.a(i), s.a(n - i))
    scale = max([1.0] + [float(np.linalg.norm(a)) for a in s.coeffs[:n]]) ** 2
    return float(np.linalg.norm(r)) / scale


def validate_flat_series(D, s, tol=AXIOM_TOL, raise_on_failure=True):
    for i, a in enumerate(s.coeffs, start=1):
        if np.linalg.norm(a) and _deg(D.space, a, f"a_{i}") != 1:
            raise RecursionViolation(i, float(np.linalg.norm(a)))
    res = []
    for n in range(1, s.order + 1):
        r = recursion_residual(D, s, n)
        res.append(r)
        if raise_on_failure and r > tol:
            raise RecursionViolation(n, r)
    return FlatSeriesReport(res, tol)


def extend_flat_series(D, coeffs, order, tol=DEFAULT_TOL):
    """Complete given leading coefficients to a flat series of the given order.

    Missing a_n are solved from da_n = -1/2 sum [a_i, a_{n-i}] by minimal norm;
    supplied coefficients are kept and checked.
    """
    sp = D.space
    z = np.zeros(sp.total_dim, dtype=complex)
    cs = [np.asarray(c, dtype=complex) if c is not None else None for c in coeffs]
    cs = cs + [None] * max(0, order - len(cs))
    out = []
    M = _d_block(D.d, 1)
    for n in range(1, order + 1):
        rhs = z.copy()
        for i in range(1, n):
            rhs = rhs - 0.5 * D.bracket(out[i - 1], out[n - i - 1])
        if cs[n - 1] is not None:
            out.append(cs[n - 1])
        else:
            y, _ = lstsq_min_norm(M, sp.component(rhs, 2), tol) if M.size else (np.zeros(sp.dim(1), complex), 0.0)
            out.append(sp.embed(1, y))
        s = FlatSeries(out)
        r = recursion_residual(D, s, n)
        if r > max(tol, AXIOM_TOL):
            raise RecursionViolation(n, r)
    return FlatSeries(out)


def series_jet(D, s, order=None):
    """OperatorJet of d_t x = dx + [a(t), x] (zero-padded to ``order``)."""
    order = s.order if order is None else order
    s = s.padded(order)
    maps = [GradedMap.from_matrix(D.space, D.space, 1, D.ad(a), tol=0.0) for a in s.coeffs]
    return OperatorJet(D.space, D.d, maps)


# ---------------------------------------------------------------- combinatorics

def proper_pairs(I):
    """All (J, K) with J, K nonempty, disjoint, covering I and min J = min I."""
    I = tuple(sorted(I))
    if len(I) < 2:
        raise ValueError("proper pairs need |I| >= 2")
    first, rest = I[0], I[1:]
    out = []
    for r in range(len(rest)):
        for S in itertools.combinations(rest, r):
            J = (first,) + S
            K = tuple(i for i in rest if i not in S)
            out.append((J, K))
    return out


def _degree_lookup(degrees):
    if isinstance(degrees, Mapping):
        return lambda i: degrees[i]
    return lambda i: degrees[i - 1]


def epsilon_exponent(J, K, degrees):
    deg = _degree_lookup(degrees)
    return sum((deg(j) + 1) * (deg(k) + 1) for j in J for k in K if k < j)


def epsilon_sign(J, K, degrees):
    """(-1)^eps(J,K); ``degrees`` maps labels to degrees (sequences are 1-based)."""
    return -1 if epsilon_exponent(J, K, degrees) % 2 else 1


def multi_indices(n, size):
    return list(itertools.combinations(range(1, n + 1), size))


# ---------------------------------------------------------------- Massey systems

class _Context:
    """Where u_I lives and how [ubar_J, u_K] is formed.

    Plain DGLA: everything is in the algebra.  Hybrid: u_I is a module
    element whenever label 1 is in I.
    """

    def __init__(self, D, module=None):
        self.D = D
        self.module = module

    def hybrid(self, I):
        return self.module is not None and 1 in I

    def space(self, I):
        return self.module.space if self.hybrid(I) else self.D.space

    def d(self, I):
        return self.module.d if self.hybrid(I) else self.D.d

    def bracket(self, J, x, y):
        if self.hybrid(J):
            return self.module.act(x, y)
        return self.D.bracket(x, y)


@dataclass
class MasseySystem:
    """Inputs x_1..x_n and an assignment I -> u_I (u_{i} = x_i)."""
    dgla: object
    inputs: list
    degrees: list
    u: dict
    module: object = None
    complete: bool = False  # whether u_{1..n} itself is present

    @property
    def n(self):
        return len(self.inputs)

    def element_degree(self, I):
        return sum(self.degrees[i - 1] for i in I) - len(I) + 1

    def product_degree(self):
        """Degree of Qtilde: sum |x_i| - n + 2 (the cup product [xbar_1, x_2]
        has degree |x_1| + |x_2|)."""
        return sum(self.degrees) - self.n + 2

    def _ctx(self):
        return _Context(self.dgla, self.module)

    def pp_sum(self, I):
        return _pp_sum(self._ctx(), I, self.u, self.degrees)

    def residual(self, I):
        ctx = self._ctx()
        r = ctx.d(I)(self.u[I]) - self.pp_sum(I)
        scale = max([1.0] + [float(np.linalg.norm(v)) for v in self.u.values()]) ** 2
        return float(np.linalg.norm(r)) / scale

    def residuals(self):
        return {I: self.residual(I) for I in sorted(self.u, key=lambda t: (len(t), t)) if len(I) > 1}

    def max_residual(self):
        return max(list(self.residuals().values()) + [0.0])


def bar(x, degree):
    return _parity(degree + 1) * x


def _pp_sum(ctx, I, u, degrees):
    """sum over PP(I) of (-1)^eps [ubar_J, u_K]."""
    out = np.zeros(ctx.space(I).total_dim, dtype=complex)
    for J, K in proper_pairs(I):
        dJ = sum(degrees[j - 1] for j in J) - len(J) + 1
        term = ctx.bracket(J, bar(u[J], dJ), u[K])
        out = out + epsilon_sign(J, K, degrees) * term
    return out


def _check_cocycles(ctx, inputs, tol):
    degrees = []
    for i, x in enumerate(inputs, start=1):
        sp = ctx.space((i,))
        x = np.asarray(x, dtype=complex)
        p = sp.homogeneous_degree(x)
        if p is None:
            raise ValueError(f"input {i} must be homogeneous and nonzero")
        dx = float(np.linalg.norm(ctx.d((i,))(x)))
        if dx > tol * max(1.0, float(np.linalg.norm(x))):
            raise NotCocycle(i, dx)
        degrees.append(p)
    return degrees


def _solve_level(ctx, I, rhs, degree, tol):
    """Minimal-norm u with du = rhs; Obstructed with the class of rhs if none."""
    d = ctx.d(I)
    sp = ctx.space(I)
    if not (0 <= degree + 1 < len(sp.dims)):
        if np.linalg.norm(rhs) > tol:
            raise Obstructed(I, rhs, float(np.linalg.norm(rhs)))
        return np.zeros(sp.total_dim, dtype=complex)
    y, r = exact_part(d, rhs, degree + 1, tol)
    scale = max(1.0, float(np.linalg.norm(rhs)))
    if r > max(tol, 1e-9) * scale:
        coords, _, harm = cohomology_class(d, sp.embed(degree + 1, sp.component(rhs, degree + 1)), tol)
        cls_norm = float(np.linalg.norm(coords))
        raise Obstructed(I, rhs, cls_norm if cls_norm > 0 else r)
    if not (0 <= degree < len(sp.dims)):
        return np.zeros(sp.total_dim, dtype=complex)
    return sp.embed(degree, y)


def build_massey_system(D, inputs, tol=DEFAULT_TOL, module=None):
    """Massey system for (x_1..x_n) built level by level, u_I of minimal norm.

    Only proper sub-multi-indices are constructed; the product over the full
    index set is then ``massey_product``.  With ``module`` given, x_1 is a
    module cocycle and the remaining inputs are algebra cocycles.
    """
    ctx = _Context(D, module)
    inputs = [np.asarray(x, dtype=complex) for x in inputs]
    n = len(inputs)
    if n < 2:
        raise ValueError("a Massey system needs at least two inputs")
    degrees = _check_cocycles(ctx, inputs, max(tol, 1e-10))
    u = {(i,): x for i, x in enumerate(inputs, start=1)}
    for m in range(2, n):
        for I in multi_indices(n, m):
            rhs = _pp_sum(ctx, I, u, degrees)
            deg = sum(degrees[i - 1] for i in I) - m + 1
            u[I] = _solve_level(ctx, I, rhs, deg, tol)
    return MasseySystem(D, inputs, degrees, u, module)


@dataclass
class MasseyProduct:
    cocycle: np.ndarray
    degree: int
    class_coords: np.ndarray
    harmonic: np.ndarray
    d_residual: float

    @property
    def class_norm(self):
        return float(np.linalg.norm(self.class_coords))


def massey_product(M, tol=DEFAULT_TOL, check=True):
    """Qtilde over the full index set, its degree and its cohomology class."""
    ctx = M._ctx()
    full = tuple(range(1, M.n + 1))
    Q = _pp_sum(ctx, full, M.u, M.degrees)
    sp = ctx.space(full)
    d = ctx.d(full)
    deg = M.product_degree()
    dres = float(np.linalg.norm(d(Q))) / max(1.0, float(np.linalg.norm(Q)))
    if check:
        if dres > 1e-8:
            raise AssertionError(f"Massey product is not a cocycle (|dQ| = {dres:.3e})")
        got = sp.homogeneous_degree(Q, tol=1e-10)
        if got is not None and got != deg:
            raise AssertionError(f"Massey product has degree {got}, expected {deg}")
    if 0 <= deg < len(sp.dims):
        coords, _, harm = cohomology_class(d, sp.embed(deg, sp.component(Q, deg)), tol)
    else:
        coords, harm = np.zeros(0, complex), np.zeros(sp.total_dim, complex)
    return MasseyProduct(Q, deg, coords, harm, dres)


def canonical_flat_system(D, s, n, tol=AXIOM_TOL):
    """u_I = (-1)^(m+1) m! a_m with m = |I|, for every I in {1..n}.

    The full index set is included, so every Massey equation through |I| = n
    can be checked.
    """
    validate_flat_series(D, s.padded(max(n, s.order)), tol)
    u = {}
    for m in range(1, n + 1):
        c = _parity(m + 1) * math.factorial(m) * s.a(m)
        for I in multi_indices(n, m):
            u[I] = c
    return MasseySystem(D, [s.a(1)] * n, [1] * n, u, complete=True)


# ---------------------------------------------------------------- compatible systems

@dataclass
class CompatibleDelta:
    n: int
    system: MasseySystem
    Q: np.ndarray            # Qtilde(u, a_1, ..., a_1)
    delta: np.ndarray        # (-1)^(n+1) Qtilde, a representative of delta_n[u]
    jet_v: np.ndarray        # n! v from the jet correctors
    massey_residual: float
    corrector_method: str


def _compatible(ctx, jet, s, u, n, tol, metric):
    rep = t_relation_solve(jet, u, n, tol, metric)
    us = [np.asarray(u, dtype=complex)] + list(rep.correctors)
    sp = ctx.space((1,))
    p = _deg(sp, us[0], "u")
    degrees = [p] + [1] * n
    sysu = {}
    for m in range(1, n + 1):
        for I in multi_indices(n + 1, m):
            if 1 in I:
                k = m - 1
                sysu[I] = _parity(k) * math.factorial(k) * us[k]
            else:
                sysu[I] = _parity(m + 1) * math.factorial(m) * s.a(m)
    M = MasseySystem(ctx.D, [us[0]] + [s.a(1)] * n, degrees, sysu, ctx.module)
    Q = M.pp_sum(tuple(range(1, n + 2)))
    delta = _parity(n + 1) * Q
    return CompatibleDelta(n, M, Q, delta, math.factorial(n) * rep.v, M.max_residual(), rep.method)


def compatible_delta(D, s, u, n, tol=DEFAULT_TOL, metric=None):
    """delta_n[u] through the a(t)-compatible system built from jet correctors.

    Raises NotInDomain when u has no correctors at order n.
    """
    jet = series_jet(D, s, max(n, s.order))
    return _compatible(_Context(D), jet, s.padded(max(n, s.order)), u, n, tol, metric)


def compare_with_page(jet, cd, tol=DEFAULT_TOL, metric=None, page=None):
    """|class of delta - class of the jet delta_n u| in the page coordinates."""
    page = build_page(jet, cd.n, tol, metric) if page is None else page
    u = cd.system.inputs[0]
    ref = page.delta(page.reps.project(u)) if page.reps.dim else np.zeros_like(u)
    a = page.class_of(cd.delta) if page.reps.dim else np.zeros(0)
    b = page.class_of(ref) if page.reps.dim else np.zeros(0)
    return float(np.linalg.norm(a - b)) / max(1.0, float(np.linalg.norm(b)))


# ---------------------------------------------------------------- modules

class ModuleAction:
    """A graded module over a DGLA, stored as a right action.

    ``R[k, i, j]`` is the f_k coefficient of f_i . e_j (f module basis, e
    algebra basis).  The left operator is rho(x) f = -(-1)^(|f||x|) f . x.
    """

    def __init__(self, algebra, space, d, R):
        self.algebra = algebra
        self.space = space
        self.d = GradedMap.zero(space, shift=1) if d is None else d
        R = np.asarray(R, dtype=complex)
        if R.shape != (space.total_dim, space.total_dim, algebra.space.total_dim):
            raise ValueError("action tensor has the wrong shape")
        self.R = R

    @classmethod
    def from_representation(cls, algebra, space, d, rho):
        """Build from the left tensor rho[k, j, i] = (rho(e_j) f_i)_k."""
        rho = np.asarray(rho, dtype=complex)
        fd = space.degree_of
        ed = algebra.space.degree_of
        sign = -(_parity(1) ** np.outer(fd, ed))  # indexed (i, j)
        R = rho.transpose(0, 2, 1) * sign[None, :, :]
        return cls(algebra, space, d, R)

    def act(self, f, x):
        """Right action f . x."""
        return np.einsum("kij,i,j->k", self.R, f, x)

    def rho(self, x):
        """Matrix of f -> rho(x) f for homogeneous x."""
        q = self.algebra.space.homogeneous_degree(x)
        if q is None:
            return np.zeros((self.space.total_dim,) * 2, dtype=complex)
        fd = self.space.degree_of
        M = np.einsum("kij,j->ki", self.R, x)
        return -M * (_parity(q) ** fd)[None, :]

    def action_blocks(self):
        sp, asp = self.space, self.algebra.space
        out = {}
        for p in range(len(sp.dims)):
            for q in range(len(asp.dims)):
                k = p + q
                if k >= len(sp.dims) or not (sp.dim(p) and asp.dim(q) and sp.dim(k)):
                    continue
                blk = self.R[sp.slice(k), sp.slice(p), asp.slice(q)]
                if np.any(blk != 0):
                    out[(p, q)] = blk
        return out

    @classmethod
    def from_blocks(cls, algebra, space, d, blocks):
        R = np.zeros((space.total_dim, space.total_dim, algebra.space.total_dim), dtype=complex)
        for (p, q), blk in blocks.items():
            R[space.slice(p + q), space.slice(p), algebra.space.slice(q)] = blk
        return cls(algebra, space, d, R)


def validate_module(ma, tol=AXIOM_TOL, raise_on_failure=True):
    """d_E^2 = 0, Leibniz d(f.x) = (df).x + (-1)^{|f|} f.(dx) and
    (f.x).y - (-1)^{|x||y|}(f.y).x = f.[x,y] on basis elements."""
    R, C = ma.R, ma.algebra.gla.C
    dE, dL = ma.d.matrix(), ma.algebra.dmatrix
    fd = ma.space.degree_of
    ed = ma.algebra.space.degree_of
    out = {"d_squared": 0.0, "leibniz": 0.0, "representation": 0.0}
    if ma.space.total_dim and ma.algebra.space.total_dim:
        out["d_squared"] = float(np.abs(dE @ dE).max()) / _scale(dE) ** 2
        lhs = np.einsum("lk,kij->lij", dE, R)
        rhs = np.einsum("mi,lmj->lij", dE, R) + _parity(1) ** fd[None, :, None] * np.einsum("mj,lim->lij", dL, R)
        out["leibniz"] = float(np.abs(lhs - rhs).max()) / (max(_scale(dE), _scale(dL)) * _scale(R))
        # (f_i . e_j) . e_k  -  (-1)^{|j||k|} (f_i . e_k) . e_j  -  f_i . [e_j, e_k]
        t1 = np.einsum("mij,lmk->lijk", R, R)
        sgn = _parity(1) ** np.outer(ed, ed)
        t2 = np.einsum("mik,lmj->lijk", R, R) * sgn[None, None, :, :]
        t3 = np.einsum("mjk,lim->lijk", C, R)
        out["representation"] = float(np.abs(t1 - t2 - t3).max()) / (_scale(R) * max(_scale(R), _scale(C)))
    if raise_on_failure:
        for k, v in out.items():
            if v > tol:
                raise AxiomViolation(f"module_{k}", (), v)
    return out


def module_jet(ma, s, order=None):
    """d_t^E = d_E + rho(a(t)) as an OperatorJet on the module."""
    order = s.order if order is None else order
    s = s.padded(order)
    maps = [GradedMap.from_matrix(ma.space, ma.space, 1, ma.rho(a), tol=0.0) for a in s.coeffs]
    return OperatorJet(ma.space, ma.d, maps)


def hybrid_massey(ma, e, ys, tol=DEFAULT_TOL):
    """Massey product of a module cocycle e with algebra cocycles y_2..y_n."""
    M = build_massey_system(ma.algebra, [e] + list(ys), tol, module=ma)
    return M, massey_product(M, tol)


def hybrid_compatible_delta(ma, s, e, n, tol=DEFAULT_TOL, metric=None):
    """delta_n[e] on the module through the hybrid a(t)-compatible system."""
    jet = module_jet(ma, s, max(n, s.order))
    return _compatible(_Context(ma.algebra, ma), jet, s.padded(max(n, s.order)), e, n, tol, metric)
