"""Dense complex linear algebra on graded spaces.

Everything here works blockwise by degree.  A metric is a positive
definite Gram matrix per degree; it is factored once by Cholesky and all
rank decisions are made in the resulting orthonormal frame, where the
metric adjoint is the plain conjugate transpose.
"""
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .errors import Inconsistent, RankStabilityWarning

DEFAULT_TOL = 1e-9


# ---------------------------------------------------------------- rank rule

def rank_cutoff(s, tol=DEFAULT_TOL):
    """Cutoff used for every rank decision: tol * sigma_max, or tol absolutely
    when sigma_max <= tol."""
    smax = float(s[0]) if len(s) else 0.0
    return tol * smax if smax > tol else tol


def numerical_rank(s, tol=DEFAULT_TOL, warn=True):
    cut = rank_cutoff(s, tol)
    r = int(np.count_nonzero(s > cut))
    if warn and len(s):
        near = (s > cut / 10.0) & (s < cut * 10.0)
        if np.any(near):
            warnings.warn(
                f"singular value {s[near][0]:.3e} within 10x of rank cutoff {cut:.3e}",
                RankStabilityWarning,
                stacklevel=3,
            )
    return r


def _svd(M):
    if M.size == 0:
        m, n = M.shape
        return np.eye(m, dtype=complex), np.zeros(0), np.eye(n, dtype=complex)
    return np.linalg.svd(M)


def null_basis(M, tol=DEFAULT_TOL):
    """Orthonormal (Euclidean) basis of the numerical kernel of a matrix."""
    M = np.asarray(M, dtype=complex)
    _, s, vh = _svd(M)
    r = numerical_rank(s, tol)
    return vh[r:].conj().T


def range_basis(M, tol=DEFAULT_TOL):
    """Orthonormal (Euclidean) basis of the numerical column space."""
    M = np.asarray(M, dtype=complex)
    u, s, _ = _svd(M)
    r = numerical_rank(s, tol)
    return u[:, :r]


def lstsq_min_norm(M, b, tol=DEFAULT_TOL):
    """Minimal-norm least-squares solution with the package rank rule.

    Returns (x, residual_norm).  No consistency check is made here.
    """
    M = np.asarray(M, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if M.size == 0:
        x = np.zeros(M.shape[1], dtype=complex)
        return x, float(np.linalg.norm(b))
    u, s, vh = np.linalg.svd(M, full_matrices=False)
    r = numerical_rank(s, tol)
    coef = (u[:, :r].conj().T @ b) / s[:r]
    x = vh[:r].conj().T @ coef
    return x, float(np.linalg.norm(M @ x - b))


def orthonormalize(V, tol=DEFAULT_TOL):
    return range_basis(V, tol)


# ---------------------------------------------------------------- spaces

class GradedSpace:
    """Finite-dimensional complex vector space graded in degrees 0..top."""

    def __init__(self, dims, labels=None):
        dims = tuple(int(d) for d in dims)
        if any(d < 0 for d in dims):
            raise ValueError("graded dimensions must be nonnegative")
        self.dims = dims
        self.offsets = tuple(int(x) for x in np.concatenate([[0], np.cumsum(dims)]))
        self.total_dim = self.offsets[-1]
        if labels is not None and len(labels) != self.total_dim:
            raise ValueError("one label per basis vector expected")
        self.labels = None if labels is None else tuple(labels)

    @property
    def top(self):
        return len(self.dims) - 1

    def dim(self, p):
        return self.dims[p] if 0 <= p < len(self.dims) else 0

    def slice(self, p):
        if not 0 <= p < len(self.dims):
            return slice(0, 0)
        return slice(self.offsets[p], self.offsets[p + 1])

    @cached_property
    def degree_of(self):
        return np.repeat(np.arange(len(self.dims)), self.dims)

    def embed(self, p, x):
        """Place a degree-p coordinate vector (or matrix) in the total space."""
        x = np.asarray(x, dtype=complex)
        out = np.zeros((self.total_dim,) + x.shape[1:], dtype=complex)
        out[self.slice(p)] = x
        return out

    def component(self, x, p):
        return np.asarray(x)[self.slice(p)]

    def homogeneous_degree(self, x, tol=1e-12):
        """Degree of a homogeneous vector, or None (zero or mixed)."""
        x = np.asarray(x)
        norms = [np.linalg.norm(x[self.slice(p)]) for p in range(len(self.dims))]
        big = max(norms) if norms else 0.0
        if big == 0:
            return None
        hit = [p for p, n in enumerate(norms) if n > tol * big]
        return hit[0] if len(hit) == 1 else None

    def __eq__(self, other):
        return isinstance(other, GradedSpace) and self.dims == other.dims

    def __hash__(self):
        return hash(self.dims)

    def __repr__(self):
        return f"GradedSpace({list(self.dims)})"


class GradedMap:
    """Degree-homogeneous linear map, stored as one block per source degree.

    ``blocks[p]`` maps degree p of the source into degree p + shift of the
    target.
    """

    def __init__(self, source, target, shift, blocks):
        self.source = source
        self.target = target
        self.shift = int(shift)
        bl = []
        for p in range(len(source.dims)):
            want = (target.dim(p + shift), source.dim(p))
            b = blocks[p] if p < len(blocks) and blocks[p] is not None else np.zeros(want)
            b = np.asarray(b, dtype=complex)
            if b.shape != want:
                raise ValueError(f"block {p} has shape {b.shape}, expected {want}")
            bl.append(b)
        self.blocks = tuple(bl)

    @classmethod
    def zero(cls, source, target=None, shift=1):
        target = source if target is None else target
        return cls(source, target, shift, [None] * len(source.dims))

    @classmethod
    def identity(cls, space):
        return cls(space, space, 0, [np.eye(d) for d in space.dims])

    @classmethod
    def from_matrix(cls, source, target, shift, M, tol=1e-12):
        M = np.asarray(M, dtype=complex)
        if M.shape != (target.total_dim, source.total_dim):
            raise ValueError("matrix shape does not match the graded spaces")
        blocks = [M[target.slice(p + shift), source.slice(p)] for p in range(len(source.dims))]
        out = cls(source, target, shift, blocks)
        stray = np.linalg.norm(M - out.matrix())
        if stray > tol * max(1.0, np.linalg.norm(M)):
            raise ValueError(f"matrix has entries outside degree-{shift} blocks ({stray:.2e})")
        return out

    def matrix(self):
        M = np.zeros((self.target.total_dim, self.source.total_dim), dtype=complex)
        for p, b in enumerate(self.blocks):
            if b.size:
                M[self.target.slice(p + self.shift), self.source.slice(p)] = b
        return M

    def block(self, p):
        if 0 <= p < len(self.blocks):
            return self.blocks[p]
        return np.zeros((self.target.dim(p + self.shift), 0), dtype=complex)

    def __call__(self, x):
        return self.matrix() @ np.asarray(x, dtype=complex)

    def __matmul__(self, other):
        if isinstance(other, GradedMap):
            if other.target != self.source:
                raise ValueError("cannot compose: space mismatch")
            blocks = [self.block(p + other.shift) @ other.block(p) for p in range(len(other.source.dims))]
            return GradedMap(other.source, self.target, self.shift + other.shift, blocks)
        return self(other)

    def _check_like(self, other):
        if (other.source, other.target, other.shift) != (self.source, self.target, self.shift):
            raise ValueError("maps live on different spaces or degrees")

    def __add__(self, other):
        self._check_like(other)
        return GradedMap(self.source, self.target, self.shift,
                         [a + b for a, b in zip(self.blocks, other.blocks)])

    def __sub__(self, other):
        return self + (-1) * other

    def __rmul__(self, c):
        return GradedMap(self.source, self.target, self.shift, [c * b for b in self.blocks])

    def __neg__(self):
        return (-1) * self

    def norm(self):
        return float(np.sqrt(sum(np.linalg.norm(b) ** 2 for b in self.blocks)))

    def __repr__(self):
        return f"GradedMap({self.source.dims} -> {self.target.dims}, shift={self.shift})"


class HermitianMetric:
    """Per-degree positive definite Gram matrices; <x, y> = y^H G x."""

    def __init__(self, space, grams, check=True):
        self.space = space
        gs = []
        for p, d in enumerate(space.dims):
            g = np.eye(d) if grams is None or grams[p] is None else grams[p]
            g = np.asarray(g, dtype=complex)
            if g.shape != (d, d):
                raise ValueError(f"Gram block {p} has shape {g.shape}")
            if check and d:
                if np.linalg.norm(g - g.conj().T) > 1e-10 * max(1.0, np.linalg.norm(g)):
                    raise ValueError(f"Gram block {p} is not Hermitian")
                if np.linalg.eigvalsh(g).min() <= 0:
                    raise ValueError(f"Gram block {p} is not positive definite")
            gs.append(g)
        self.grams = tuple(gs)
        self.chol = tuple(np.linalg.cholesky(g) if g.size else g for g in gs)

    @classmethod
    def identity(cls, space):
        return cls(space, None, check=False)

    @cached_property
    def is_identity(self):
        return all(np.allclose(g, np.eye(len(g)), atol=0, rtol=0) for g in self.grams)

    def gram(self):
        return sla.block_diag(*self.grams) if self.space.total_dim else np.zeros((0, 0))

    # Frame: G = L L^H, frame coordinates y = L^H x are Euclidean.
    def to_frame(self, x, p=None):
        x = np.asarray(x, dtype=complex)
        if p is not None:
            return self.chol[p].conj().T @ x if x.shape[0] else x
        out = np.empty_like(x)
        for q in range(len(self.space.dims)):
            s = self.space.slice(q)
            out[s] = self.chol[q].conj().T @ x[s]
        return out

    def from_frame(self, y, p=None):
        y = np.asarray(y, dtype=complex)
        if p is not None:
            if not y.shape[0]:
                return y
            return sla.solve_triangular(self.chol[p].conj().T, y, lower=False)
        out = np.empty_like(y)
        for q in range(len(self.space.dims)):
            s = self.space.slice(q)
            if s.stop > s.start:
                out[s] = sla.solve_triangular(self.chol[q].conj().T, y[s], lower=False)
        return out

    def frame_map(self, m, target_metric=None):
        """Blocks of a GradedMap written in orthonormal frames."""
        tm = self if target_metric is None else target_metric
        out = []
        for p, b in enumerate(m.blocks):
            q = p + m.shift
            if b.size == 0:
                out.append(b)
                continue
            bt = tm.chol[q].conj().T @ b
            # right-multiply by L_p^{-H}
            out.append(sla.solve_triangular(self.chol[p], bt.conj().T, lower=True).conj().T)
        return out

    def frame_matrix(self):
        """Block-diagonal L^H, so that frame coordinates are L^H x."""
        return sla.block_diag(*[c.conj().T for c in self.chol]) if self.space.total_dim else np.zeros((0, 0))

    def inner(self, x, y):
        x = np.asarray(x, dtype=complex)
        y = np.asarray(y, dtype=complex)
        return complex(np.vdot(self.to_frame(y), self.to_frame(x)))

    def norm(self, x):
        return float(np.linalg.norm(self.to_frame(x)))


def _metric_or_identity(metric, space):
    return HermitianMetric.identity(space) if metric is None else metric


# ---------------------------------------------------------------- subspaces

class Subspace:
    """Subspace with a metric-orthonormal basis (columns of ``basis``).

    ``degrees`` holds the degree of each column when the basis is
    homogeneous, and is None otherwise.
    """

    def __init__(self, space, metric, basis, degrees=None):
        self.space = space
        self.metric = _metric_or_identity(metric, space)
        basis = np.asarray(basis, dtype=complex)
        if basis.ndim != 2:
            basis = basis.reshape(space.total_dim, -1) if space.total_dim else np.zeros((0, 0), complex)
        self.basis = basis
        self.degrees = None if degrees is None else np.asarray(degrees, dtype=int)

    @classmethod
    def from_blocks(cls, space, metric, blocks):
        """Assemble from per-degree blocks (each metric-orthonormal in its degree)."""
        cols, degs = [], []
        for p in range(len(space.dims)):
            b = blocks.get(p) if isinstance(blocks, dict) else blocks[p]
            if b is None or space.dim(p) == 0:
                continue
            b = np.asarray(b, dtype=complex).reshape(space.dim(p), -1)
            for j in range(b.shape[1]):
                cols.append(space.embed(p, b[:, j]))
                degs.append(p)
        basis = np.array(cols).T if cols else np.zeros((space.total_dim, 0), dtype=complex)
        return cls(space, metric, basis, degs)

    @classmethod
    def zero(cls, space, metric=None):
        return cls(space, metric, np.zeros((space.total_dim, 0)), [])

    @classmethod
    def whole(cls, space, metric=None):
        metric = _metric_or_identity(metric, space)
        return cls.from_blocks(space, metric, {p: metric.from_frame(np.eye(d), p) for p, d in enumerate(space.dims)})

    @classmethod
    def span(cls, space, metric, vectors, tol=DEFAULT_TOL, graded=True):
        """Orthonormalized span of the given columns (split by degree if graded)."""
        metric = _metric_or_identity(metric, space)
        V = np.asarray(vectors, dtype=complex)
        if V.ndim != 2:
            V = V.reshape(space.total_dim, -1)
        if graded:
            blocks = {}
            for p in range(len(space.dims)):
                Vp = metric.to_frame(V[space.slice(p)], p)
                if Vp.size == 0:
                    continue
                Q = range_basis(Vp, tol)
                if Q.shape[1]:
                    blocks[p] = metric.from_frame(Q, p)
            return cls.from_blocks(space, metric, blocks)
        Q = range_basis(metric.to_frame(V), tol)
        return cls(space, metric, metric.from_frame(Q))

    @property
    def dim(self):
        return self.basis.shape[1]

    def block(self, p):
        """Degree-p coordinates of the degree-p columns."""
        if self.degrees is None:
            raise ValueError("subspace basis is not homogeneous")
        return self.basis[self.space.slice(p)][:, self.degrees == p]

    def dims_by_degree(self):
        if self.degrees is not None:
            return [int(np.count_nonzero(self.degrees == p)) for p in range(len(self.space.dims))]
        out = []
        for p in range(len(self.space.dims)):
            Bp = self.metric.to_frame(self.basis[self.space.slice(p)], p)
            out.append(int(np.linalg.matrix_rank(Bp, tol=1e-8)) if Bp.size else 0)
        return out

    def frame_basis(self):
        return self.metric.to_frame(self.basis)

    def project(self, x):
        F = self.frame_basis()
        y = self.metric.to_frame(np.asarray(x, dtype=complex))
        return self.metric.from_frame(F @ (F.conj().T @ y))

    def coordinates(self, x):
        """Coefficients of the orthogonal projection of x in this basis."""
        F = self.frame_basis()
        return F.conj().T @ self.metric.to_frame(np.asarray(x, dtype=complex))

    def residual(self, x):
        """Metric norm of the component of x orthogonal to the subspace."""
        x = np.asarray(x, dtype=complex)
        return self.metric.norm(x - self.project(x))

    def orthogonality_defect(self):
        F = self.frame_basis()
        return float(np.linalg.norm(F.conj().T @ F - np.eye(self.dim))) if self.dim else 0.0

    def complement_in(self, other, tol=DEFAULT_TOL):
        """Orthogonal complement of self inside the larger subspace ``other``."""
        return _per_degree(other, self, lambda A, B: _complement(A, B, tol))

    def __repr__(self):
        return f"Subspace(dim={self.dim}, by_degree={self.dims_by_degree()})"


def _complement(A, B, tol):
    """Frame-orthonormal complement of span(B) inside span(A)."""
    if A.shape[1] == 0:
        return A
    R = A - B @ (B.conj().T @ A) if B.shape[1] else A
    return range_basis(R, tol)


def _per_degree(A, B, fn):
    """Apply a frame-level binary operation degree by degree."""
    space, metric = A.space, A.metric
    if A.degrees is None or B.degrees is None:
        Q = fn(A.frame_basis(), B.frame_basis())
        return Subspace(space, metric, metric.from_frame(Q))
    blocks = {}
    for p in range(len(space.dims)):
        Ap = metric.to_frame(A.block(p), p)
        Bp = metric.to_frame(B.block(p), p)
        Q = fn(Ap, Bp)
        if Q.shape[1]:
            blocks[p] = metric.from_frame(Q, p)
    return Subspace.from_blocks(space, metric, blocks)


# ---------------------------------------------------------------- operations

def kernel(m, metric=None, tol=DEFAULT_TOL, target_metric=None):
    """Numerical kernel of a graded map, metric-orthonormal basis per degree."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    metric = _metric_or_identity(metric, m.source)
    if metric.space != m.source:
        raise ValueError("metric does not match the map's source")
    tm = _target_metric(m, metric, target_metric)
    fb = metric.frame_map(m, tm)
    blocks = {}
    for p, b in enumerate(fb):
        if m.source.dim(p) == 0:
            continue
        N = null_basis(b, tol) if b.shape[0] else np.eye(m.source.dim(p), dtype=complex)
        if N.shape[1]:
            blocks[p] = metric.from_frame(N, p)
    return Subspace.from_blocks(m.source, metric, blocks)


def image(m, metric=None, tol=DEFAULT_TOL, target_metric=None):
    """Numerical image of a graded map, metric-orthonormal in the target."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    metric = _metric_or_identity(metric, m.source)
    if metric.space != m.source:
        raise ValueError("metric does not match the map's source")
    tm = _target_metric(m, metric, target_metric)
    fb = metric.frame_map(m, tm)
    blocks = {}
    for p, b in enumerate(fb):
        q = p + m.shift
        if b.size == 0:
            continue
        U = range_basis(b, tol)
        if U.shape[1]:
            blocks[q] = tm.from_frame(U, q)
    return Subspace.from_blocks(m.target, tm, blocks)


def _target_metric(m, metric, target_metric):
    if target_metric is not None:
        return target_metric
    if m.target == m.source:
        return metric
    return HermitianMetric.identity(m.target)


def adjoint_map(m, metric=None, target_metric=None):
    """Metric adjoint: <m x, y> = <x, m* y>; the degree shift is negated."""
    metric = _metric_or_identity(metric, m.source)
    tm = _target_metric(m, metric, target_metric)
    nblocks = [None] * len(m.target.dims)
    for p, b in enumerate(m.blocks):
        q = p + m.shift
        if not 0 <= q < len(m.target.dims):
            continue
        if b.size == 0:
            nblocks[q] = np.zeros((m.source.dim(p), m.target.dim(q)))
            continue
        # G_p^{-1} b^H G_q
        nblocks[q] = sla.cho_solve((metric.chol[p], True), b.conj().T @ tm.grams[q])
    return GradedMap(m.target, m.source, -m.shift, nblocks)


def solve_min_norm(m, rhs, metric=None, tol=DEFAULT_TOL, target_metric=None):
    """Minimal-norm x with m x = rhs; raises Inconsistent when the residual
    exceeds tol * |rhs|."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    metric = _metric_or_identity(metric, m.source)
    tm = _target_metric(m, metric, target_metric)
    rhs = np.asarray(rhs, dtype=complex)
    fb = metric.frame_map(m, tm)
    x = np.zeros(m.source.total_dim, dtype=complex)
    bf = tm.to_frame(rhs)
    covered = np.zeros(m.target.total_dim, dtype=bool)
    for p, b in enumerate(fb):
        q = p + m.shift
        sq = m.target.slice(q)
        covered[sq] = True
        if b.size == 0:
            continue
        y, _ = lstsq_min_norm(b, bf[sq], tol)
        x[m.source.slice(p)] = metric.from_frame(y, p)
    res = tm.norm(m(x) - rhs)
    scale = tm.norm(rhs)
    if res > tol * scale and res > 0:
        raise Inconsistent(res, scale)
    return x


def principal_angles(A, B):
    """Principal angles between two subspaces, ascending, in [0, pi/2]."""
    FA, FB = A.frame_basis(), B.frame_basis()
    if FA.shape[1] > FB.shape[1]:
        FA, FB = FB, FA
    k = FA.shape[1]
    if k == 0:
        return []
    R = FA - FB @ (FB.conj().T @ FA) if FB.shape[1] else FA
    s = np.linalg.svd(R, compute_uv=False)
    return sorted(float(x) for x in np.arcsin(np.clip(s, 0.0, 1.0)))


def angle_tolerance(tol):
    # meets are decided on principal angles; sqrt(tol) keeps a generous margin
    return max(np.sqrt(tol), 1e-12)


def subspace_meet(A, B, tol=DEFAULT_TOL):
    """Intersection via principal vectors with angle below angle_tolerance(tol)."""
    smax = np.sin(angle_tolerance(tol))

    def meet(FA, FB):
        if FA.shape[1] == 0 or FB.shape[1] == 0:
            return FA[:, :0]
        if FA.shape[1] > FB.shape[1]:
            FA, FB = FB, FA
        R = FA - FB @ (FB.conj().T @ FA)
        _, s, vh = np.linalg.svd(R)
        s_full = np.zeros(FA.shape[1])
        s_full[: len(s)] = s
        keep = s_full <= smax
        Q = FA @ vh.conj().T[:, keep]
        return range_basis(Q, 1e-8) if Q.shape[1] else Q

    return _per_degree(A, B, meet)


def subspace_sum(A, B, tol=DEFAULT_TOL):
    def add(FA, FB):
        M = np.hstack([FA, FB])
        return range_basis(M, tol) if M.shape[1] else M

    return _per_degree(A, B, add)


def same_subspace(A, B, tol=1e-8):
    """Equal dimension and max principal angle <= tol."""
    if A.dim != B.dim:
        return False
    ang = principal_angles(A, B)
    return (max(ang) if ang else 0.0) <= tol


def max_angle(A, B):
    ang = principal_angles(A, B)
    return max(ang) if ang else 0.0


def inclusion_defect(A, B):
    """Largest metric distance from a unit vector of A to the subspace B."""
    if A.dim == 0:
        return 0.0
    FA, FB = A.frame_basis(), B.frame_basis()
    R = FA - FB @ (FB.conj().T @ FA) if FB.shape[1] else FA
    return float(np.linalg.norm(R, 2))
