"""Operator jets d_t = d0 + sum A_i t^i and the tower of pages they induce.

A vector u is related to v at order n (u T_n v) when correctors
u_1..u_{n-1} exist with

    d_t(u + u_1 t + ... + u_{n-1} t^{n-1}) = v t^n + O(t^{n+1}).

Z_n is the set of u admitting correctors, B_n = Range(T_{n-1}) + im d0,
and the page G_n = Z_n / B_n carries delta_n = n! * (class of v).
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NotFlat, NotInDomain
from .graded import (
    DEFAULT_TOL,
    GradedMap,
    HermitianMetric,
    Subspace,
    adjoint_map,
    lstsq_min_norm,
    null_basis,
    numerical_rank,
    range_basis,
)

FLAT_TOL = 1e-10


class OperatorJet:
    """Truncated power series of degree-homogeneous maps on one graded space."""

    def __init__(self, space, d0, coeffs):
        self.space = space
        self.d0 = d0
        self.coeffs = tuple(coeffs)
        self.shift = d0.shift
        for a in (d0,) + self.coeffs:
            if a.source != space or a.target != space:
                raise ValueError("jet coefficients must act on the jet's space")
            if a.shift != self.shift:
                raise ValueError("jet coefficients must share one degree shift")

    @property
    def order(self):
        return len(self.coeffs)

    def coeff(self, i):
        if i == 0:
            return self.d0
        if 1 <= i <= self.order:
            return self.coeffs[i - 1]
        return GradedMap.zero(self.space, shift=self.shift)

    def at(self, t):
        out = self.d0
        for i, a in enumerate(self.coeffs, start=1):
            out = out + (t ** i) * a
        return out

    def adjoint(self, metric=None):
        return OperatorJet(self.space, adjoint_map(self.d0, metric),
                           [adjoint_map(a, metric) for a in self.coeffs])

    def truncated(self, order):
        return OperatorJet(self.space, self.d0, self.coeffs[:order])

    def scale(self):
        return max([a.norm() for a in (self.d0,) + self.coeffs] + [0.0])

    def frame_blocks(self, metric):
        """Coefficient blocks in the metric frame: list over i of per-degree blocks."""
        return [metric.frame_map(self.coeff(i)) for i in range(self.order + 1)]

    def __repr__(self):
        return f"OperatorJet({self.space.dims}, order={self.order}, shift={self.shift})"


@dataclass
class FlatnessReport:
    residuals: list
    scales: list
    accepted: bool
    first_failure: object
    tol: float
    audit_residuals: list = field(default_factory=list)

    @property
    def relative(self):
        return [r / s if s > 0 else r for r, s in zip(self.residuals, self.scales)]

    @property
    def exact_through(self):
        """Largest k with every coefficient of d_t o d_t up to k vanishing."""
        k = -1
        for r, s in zip(self.residuals + self.audit_residuals, self.scales + [1.0] * len(self.audit_residuals)):
            if r > self.tol * max(s, 1.0):
                break
            k += 1
        return k


def square_coefficient(jet, k):
    """The k-th coefficient of d_t o d_t and the scale of its factors."""
    acc = GradedMap.zero(jet.space, shift=2 * jet.shift)
    scale = 0.0
    for i in range(k + 1):
        a, b = jet.coeff(i), jet.coeff(k - i)
        acc = acc + (a @ b)
        scale += a.norm() * b.norm()
    return acc, scale


def validate_flat_jet(jet, tol=FLAT_TOL, raise_on_failure=True):
    """Per-order residuals of sum_{i+j=k} A_i A_j for k = 0..order.

    Orders order+1..2*order are recorded as a truncation audit only.
    """
    residuals, scales = [], []
    first = None
    for k in range(jet.order + 1):
        sq, sc = square_coefficient(jet, k)
        r = sq.norm()
        residuals.append(r)
        scales.append(sc)
        if first is None and r > tol * max(sc, 1.0):
            first = k
    audit = [square_coefficient(jet, k)[0].norm() for k in range(jet.order + 1, 2 * jet.order + 1)]
    rep = FlatnessReport(residuals, scales, first is None, first, tol, audit)
    if first is not None and raise_on_failure:
        raise NotFlat(first, residuals[first])
    return rep


# ---------------------------------------------------------------- relation T_n

@dataclass
class CorrectedRepresentative:
    u: np.ndarray
    correctors: list
    order: int
    v: np.ndarray
    residual_norms: list
    method: str = "sequential"

    def series_coefficients(self, jet, upto=None):
        """Coefficients of d_t(u + u_1 t + ...) for k = 0..upto."""
        upto = self.order if upto is None else upto
        us = [self.u] + list(self.correctors)
        out = []
        for k in range(upto + 1):
            c = np.zeros(jet.space.total_dim, dtype=complex)
            for j, uj in enumerate(us):
                if j <= k:
                    c = c + jet.coeff(k - j)(uj)
            out.append(c)
        return out


def _degree(space, u):
    p = space.homogeneous_degree(u)
    return p


def _stack(fblocks, p, n, first=0):
    """Block lower-triangular matrix of coefficients first..first+n-1 acting on
    (u_0, .., u_{n-1}) in degree p (frame coordinates)."""
    if n == 0:
        return np.zeros((0, 0), dtype=complex)
    blk = fblocks[0][p]
    r, c = blk.shape
    M = np.zeros((n * r, n * c), dtype=complex)
    for k in range(n):
        for j in range(k + first + 1):
            i = k + first - j
            if j >= n or i >= len(fblocks):
                continue
            M[k * r:(k + 1) * r, j * c:(j + 1) * c] = fblocks[i][p]
    return M


def _frame_blocks_upto(jet, metric, n):
    return [metric.frame_map(jet.coeff(i)) for i in range(n + 1)]


def t_relation_solve(jet, u, n, tol=DEFAULT_TOL, metric=None):
    """Find minimal-norm correctors for u at order n and return the n-th coefficient v.

    Correctors are solved order by order against d0.  If a greedy choice
    makes a later order unsolvable, the correctors are re-solved jointly.
    """
    if not 1 <= n:
        raise ValueError("order must be >= 1")
    space = jet.space
    metric = HermitianMetric.identity(space) if metric is None else metric
    u = np.asarray(u, dtype=complex)
    p = _degree(space, u)
    if p is None:
        if np.linalg.norm(u) == 0:
            zero = np.zeros_like(u)
            return CorrectedRepresentative(u, [zero] * (n - 1), n, zero, [0.0] * n)
        raise ValueError("t_relation_solve needs a homogeneous vector")
    q = p + jet.shift
    fb = _frame_blocks_upto(jet, metric, n)
    uf = metric.to_frame(space.component(u, p), p)
    scale = max(jet.scale(), 1.0) * max(np.linalg.norm(uf), 1e-300)

    def coef(k, us):
        c = np.zeros(space.dim(q), dtype=complex)
        for j, uj in enumerate(us):
            if j <= k and (k - j) < len(fb) and fb[k - j][p].size:
                c = c + fb[k - j][p] @ uj
        return c

    r0 = float(np.linalg.norm(coef(0, [uf])))
    if r0 > tol * scale:
        raise NotInDomain(0, r0)
    us = [uf]
    res = [r0]
    method = "sequential"
    d0b = fb[0][p]
    for k in range(1, n):
        rhs = -coef(k, us)
        if d0b.size:
            x, r = lstsq_min_norm(d0b, rhs, tol)
        else:
            x, r = np.zeros(space.dim(p), dtype=complex), float(np.linalg.norm(rhs))
        if r > tol * scale:
            method = "joint"
            break
        us.append(x)
        res.append(r)
    if method == "joint":
        us, res = _joint_correctors(fb, p, uf, n, tol, scale)
    v = coef(n, us)
    to_amb = lambda y: space.embed(p, metric.from_frame(y, p))
    corr = [to_amb(y) for y in us[1:]]
    v_amb = space.embed(q, metric.from_frame(v, q)) if space.dim(q) else np.zeros(space.total_dim, complex)
    return CorrectedRepresentative(u, corr, n, v_amb, res, method)


def _joint_correctors(fb, p, uf, n, tol, scale):
    """Solve for (u_1..u_{n-1}) at once; raise NotInDomain if impossible."""
    d = len(uf)
    M = _stack(fb, p, n)  # acts on (u_0..u_{n-1})
    r = fb[0][p].shape[0]
    A = M[:, d:]
    b = -(M[:, :d] @ uf)
    if A.shape[1] == 0:
        x = np.zeros(0, dtype=complex)
    else:
        x, _ = lstsq_min_norm(A, b, tol)
    resid = A @ x - b if A.shape[1] else -b
    per = [float(np.linalg.norm(resid[k * r:(k + 1) * r])) for k in range(n)]
    for k, rk in enumerate(per):
        if rk > tol * scale:
            raise NotInDomain(k, rk)
    us = [uf] + [x[(j - 1) * d:j * d] for j in range(1, n)]
    return us, per


def relation_holds(jet, u, v, n, tol=DEFAULT_TOL, metric=None):
    """Whether u T_n v, decided by one joint least-squares solve."""
    space = jet.space
    metric = HermitianMetric.identity(space) if metric is None else metric
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    p = space.homogeneous_degree(u)
    if p is None:
        qv = space.homogeneous_degree(v)
        if qv is None:
            return np.linalg.norm(v) == 0 or False
        p = qv - jet.shift
    q = p + jet.shift
    fb = _frame_blocks_upto(jet, metric, n)
    d = space.dim(p)
    M = _stack(fb, p, n + 1)
    r = space.dim(q)
    uf = metric.to_frame(space.component(u, p), p)
    vf = metric.to_frame(space.component(v, q), q)
    target = np.concatenate([np.zeros(n * r, dtype=complex), vf])
    A = M[:, d:n * d]
    b = target - M[:, :d] @ uf
    other = np.linalg.norm(u - space.embed(p, space.component(u, p))) + \
        np.linalg.norm(v - space.embed(q, space.component(v, q)))
    if other > 1e-12 * (1 + np.linalg.norm(u) + np.linalg.norm(v)):
        return False
    if A.shape[1]:
        x, res = lstsq_min_norm(A, b, tol)
    else:
        res = float(np.linalg.norm(b))
    scale = max(jet.scale(), 1.0) * max(np.linalg.norm(uf) + np.linalg.norm(vf), 1e-300)
    return res <= tol * scale * 10


# ---------------------------------------------------------------- pages

def _domain_frame(fb, p, n, tol):
    """Frame basis of the stacked solution space at order n in degree p."""
    M = _stack(fb, p, n)
    d = fb[0][p].shape[1]
    if M.shape[0] == 0:
        return np.eye(n * d, dtype=complex)
    return null_basis(M, tol)


def page_spaces(jet, n, tol=DEFAULT_TOL, metric=None):
    """(Z_n, B_n) as graded metric-orthonormal subspaces."""
    if n < 1:
        raise ValueError("page index starts at 1")
    space = jet.space
    metric = HermitianMetric.identity(space) if metric is None else metric
    fb = _frame_blocks_upto(jet, metric, n)
    zb, bb = {}, {}
    for p in range(len(space.dims)):
        d = space.dim(p)
        q = p + jet.shift
        if d:
            K = _domain_frame(fb, p, n, tol)
            Z = range_basis(K[:d], tol) if K.shape[1] else K[:d]
            if Z.shape[1]:
                zb[p] = metric.from_frame(Z, p)
        if d and space.dim(q):
            gens = [fb[0][p]]
            if n >= 2:
                K = _domain_frame(fb, p, n - 1, tol)
                if K.shape[1]:
                    V = np.zeros((space.dim(q), K.shape[1]), dtype=complex)
                    for i in range(1, n):
                        j = n - 1 - i
                        V += fb[i][p] @ K[j * d:(j + 1) * d]
                    gens.append(V)
            G = np.hstack(gens)
            B = range_basis(G, tol) if G.size else G[:, :0]
            if B.shape[1]:
                bb[q] = metric.from_frame(B, q)
    return Subspace.from_blocks(space, metric, zb), Subspace.from_blocks(space, metric, bb)


@dataclass
class Page:
    n: int
    Zn: Subspace
    Bn: Subspace
    reps: Subspace
    delta: GradedMap
    delta_blocks: list
    witnesses: dict
    square_residual: float

    @property
    def Gn_dims(self):
        return self.reps.dims_by_degree()

    @property
    def total_dim(self):
        return self.reps.dim

    def rep_block(self, p):
        return self.reps.block(p)

    def delta_matrix(self):
        """delta_n on the representative basis as one square matrix."""
        return self.reps.coordinates(self.delta.matrix() @ self.reps.basis) if self.reps.dim else np.zeros((0, 0))

    def class_of(self, x):
        """Coordinates of the class of x in G_n (projection onto the representatives)."""
        return self.reps.coordinates(x)


def build_page(jet, n, tol=DEFAULT_TOL, metric=None, spaces=None):
    """Page n with representatives in Z_n orthogonal to B_n and delta_n = n! tau_n."""
    space = jet.space
    metric = HermitianMetric.identity(space) if metric is None else metric
    Zn, Bn = page_spaces(jet, n, tol, metric) if spaces is None else spaces
    W = Bn.complement_in(Zn, tol)
    fact = math.factorial(n)
    nblocks = [None] * len(space.dims)
    coord_blocks = [None] * len(space.dims)
    witnesses = {}
    for p in range(len(space.dims)):
        q = p + jet.shift
        Wp = W.block(p)
        Wq = W.block(q) if 0 <= q < len(space.dims) else np.zeros((0, 0))
        D = np.zeros((Wq.shape[1], Wp.shape[1]), dtype=complex)
        for j in range(Wp.shape[1]):
            w = space.embed(p, Wp[:, j])
            rep = t_relation_solve(jet, w, n, tol, metric)
            witnesses[(p, j)] = rep
            if Wq.shape[1]:
                vq = metric.to_frame(space.component(rep.v, q), q)
                D[:, j] = fact * (metric.to_frame(Wq, q).conj().T @ vq)
        coord_blocks[p] = D
        if 0 <= q < len(space.dims) and Wp.shape[1]:
            Gp = metric.grams[p]
            nblocks[p] = Wq @ D @ (Wp.conj().T @ Gp) if Wq.shape[1] else None
    delta = GradedMap(space, space, jet.shift, nblocks)
    sq = delta @ delta
    # delta_n is built from n! times the coefficients, so compare against that scale
    scale = max(delta.norm(), fact * max([jet.d0.norm()] + [a.norm() for a in jet.coeffs]), 1e-150) ** 2
    page = Page(n, Zn, Bn, W, delta, coord_blocks, witnesses, sq.norm() / scale)
    return page


@dataclass
class Tower:
    pages: list
    stopped_early: bool = False
    reason: str = ""

    def __iter__(self):
        return iter(self.pages)

    def __len__(self):
        return len(self.pages)

    def __getitem__(self, i):
        return self.pages[i]


def page_tower(jet, max_n, tol=DEFAULT_TOL, metric=None, stop_early=True):
    if max_n > jet.order:
        raise ValueError(f"max_n={max_n} exceeds jet order {jet.order}")
    pages = []
    stopped, reason = False, ""
    for n in range(1, max_n + 1):
        page = build_page(jet, n, tol, metric)
        pages.append(page)
        if stop_early and page.total_dim == 0 and n < max_n:
            stopped, reason = True, f"G_{n} = 0; all later pages vanish"
            break
    return Tower(pages, stopped, reason)


def next_page_dims(page, tol=DEFAULT_TOL):
    """dim ker delta_n - rank delta_n per degree (the predicted next page)."""
    blocks = page.delta_blocks
    nd = len(blocks)
    shift = page.delta.shift
    dims = page.Gn_dims
    ranks = [0] * nd
    for p, D in enumerate(blocks):
        if D is not None and D.size:
            ranks[p] = numerical_rank(np.linalg.svd(D, compute_uv=False), tol)
    out = []
    for p in range(nd):
        ker = dims[p] - ranks[p]
        src = p - shift
        im = ranks[src] if 0 <= src < nd else 0
        out.append(ker - im)
    return out


def range_T_basis(jet, n, p, tol=DEFAULT_TOL, metric=None):
    """Frame basis of Range(T_n) in degree p + shift (from sources of degree p)."""
    space = jet.space
    metric = HermitianMetric.identity(space) if metric is None else metric
    fb = _frame_blocks_upto(jet, metric, n)
    d = space.dim(p)
    q = p + jet.shift
    K = _domain_frame(fb, p, n, tol)
    V = np.zeros((space.dim(q), K.shape[1]), dtype=complex)
    for i in range(1, n + 1):
        j = n - i
        V += fb[i][p] @ K[j * d:(j + 1) * d]
    return range_basis(V, tol) if V.size else V[:, :0]


def admissible_corrector_shifts(jet, n, p, tol=DEFAULT_TOL, metric=None):
    """Frame basis of corrector changes (u_0 = 0) preserving the relation at order n."""
    space = jet.space
    metric = HermitianMetric.identity(space) if metric is None else metric
    fb = _frame_blocks_upto(jet, metric, n)
    d = space.dim(p)
    M = _stack(fb, p, n)[:, d:]
    if M.shape[1] == 0:
        return np.zeros((0, 0), dtype=complex)
    return null_basis(M, tol)
