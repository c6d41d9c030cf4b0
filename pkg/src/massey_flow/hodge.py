"""Harmonic representatives for the page tower.

H_n is the meet of Z_n (built from d_t) and Z_n^* (built from the
metric adjoint family d_t^*).  The operators delta~_n and delta~_n^* are
computed independently from the two families, so their adjointness on
H_n is a genuine check.
"""
import math
from dataclasses import dataclass

import numpy as np

from .errors import IsomorphismFailure
from .graded import (
    DEFAULT_TOL,
    GradedMap,
    HermitianMetric,
    Subspace,
    inclusion_defect,
    max_angle,
    null_basis,
    subspace_meet,
    subspace_sum,
)
from .jets import build_page, page_spaces, t_relation_solve


def dual_spaces(jet, metric=None, n=1, tol=DEFAULT_TOL):
    """Z_n^* computed from the adjoint jet (d0^*, A_1^*, ...)."""
    metric = HermitianMetric.identity(jet.space) if metric is None else metric
    return page_spaces(jet.adjoint(metric), n, tol, metric)[0]


@dataclass
class HarmonicPage:
    n: int
    Hn: Subspace
    delta_tilde: GradedMap
    delta_tilde_star: GradedMap
    D: np.ndarray        # delta~ in the H_n basis
    Dstar: np.ndarray    # delta~^* in the H_n basis
    metric: HermitianMetric
    Zn: Subspace
    Zn_star: Subspace
    Bn: Subspace

    @property
    def dims(self):
        return self.Hn.dims_by_degree()

    def adjointness_defect(self):
        if self.D.size == 0:
            return 0.0
        return float(np.linalg.norm(self.Dstar - self.D.conj().T) / max(1.0, np.linalg.norm(self.D)))

    def form_T(self):
        """Matrix of B_n for T_t = d_t + d_t^* on H_n: delta~ + delta~^*."""
        return self.D + self.Dstar


def harmonic_page(jet, metric=None, n=1, tol=DEFAULT_TOL, page=None, check=True):
    space = jet.space
    metric = HermitianMetric.identity(space) if metric is None else metric
    adj = jet.adjoint(metric)
    if page is None:
        Zn, Bn = page_spaces(jet, n, tol, metric)
        gdims = None
    else:
        Zn, Bn = page.Zn, page.Bn
        gdims = page.Gn_dims
    Zs = page_spaces(adj, n, tol, metric)[0]
    H = subspace_meet(Zn, Zs, tol)
    fact = math.factorial(n)
    k = H.dim
    D = np.zeros((k, k), dtype=complex)
    Ds = np.zeros((k, k), dtype=complex)
    for j in range(k):
        h = H.basis[:, j]
        v = t_relation_solve(jet, h, n, tol, metric).v
        vs = t_relation_solve(adj, h, n, tol, metric).v
        D[:, j] = fact * H.coordinates(v)
        Ds[:, j] = fact * H.coordinates(vs)
    # off-degree entries are zero by construction; clean numerical dust
    if H.degrees is not None and k:
        dg = H.degrees
        D[dg[:, None] != dg[None, :] + jet.shift] = 0
        Ds[dg[:, None] != dg[None, :] - jet.shift] = 0
    amb = lambda M, s: _ambient_map(space, H, M, s)
    hp = HarmonicPage(n, H, amb(D, jet.shift), amb(Ds, -jet.shift), D, Ds, metric, Zn, Zs, Bn)
    if check:
        if gdims is None:
            W = Bn.complement_in(Zn, tol)
            gdims = W.dims_by_degree()
        if hp.dims != gdims:
            raise IsomorphismFailure(f"dim H_{n} = {hp.dims} but dim G_{n} = {gdims}")
    return hp


def _ambient_map(space, H, M, shift):
    """Ambient GradedMap acting as M after projecting onto H."""
    blocks = []
    for p in range(len(space.dims)):
        q = p + shift
        if not (0 <= q < len(space.dims)) or H.degrees is None:
            blocks.append(None)
            continue
        cp = np.flatnonzero(H.degrees == p)
        cq = np.flatnonzero(H.degrees == q)
        if not len(cp) or not len(cq):
            blocks.append(None)
            continue
        Hp = H.basis[space.slice(p)][:, cp]
        Hq = H.basis[space.slice(q)][:, cq]
        blocks.append(Hq @ M[np.ix_(cq, cp)] @ (Hp.conj().T @ H.metric.grams[p]))
    return GradedMap(space, space, shift, blocks)


@dataclass
class PhiReport:
    n: int
    dims_H: list
    dims_G: list
    max_angle: float
    conjugation_defect: float
    adjointness_defect: float
    split_defect: float
    dual_orthogonality_defect: float
    tol: float

    @property
    def passed(self):
        return (
            self.dims_H == self.dims_G
            and self.max_angle <= self.tol
            and self.conjugation_defect <= self.tol
        )


def verify_phi(jet, metric=None, n=1, tol=1e-7, page=None, hpage=None, rank_tol=DEFAULT_TOL):
    """Check that H_n realizes G_n and that delta~_n corresponds to delta_n."""
    metric = HermitianMetric.identity(jet.space) if metric is None else metric
    page = build_page(jet, n, rank_tol, metric) if page is None else page
    hp = harmonic_page(jet, metric, n, rank_tol, page=page, check=False) if hpage is None else hpage
    W, H = page.reps, hp.Hn
    ang = max_angle(W, H) if W.dim == H.dim else float("inf")
    if W.dim == H.dim and W.dim:
        C = W.coordinates(H.basis)  # H basis expressed in W coordinates
        DW = page.delta_matrix()
        lhs = DW @ C
        rhs = C @ hp.D
        conj = float(np.linalg.norm(lhs - rhs) / max(1.0, np.linalg.norm(DW)))
    else:
        conj = 0.0 if W.dim == H.dim else float("inf")
    split = inclusion_defect(page.Zn, subspace_sum(H, page.Bn)) + inclusion_defect(subspace_sum(H, page.Bn), page.Zn)
    if H.dim and page.Bn.dim:
        cross = float(np.linalg.norm(H.frame_basis().conj().T @ page.Bn.frame_basis()))
    else:
        cross = 0.0
    dual_orth = 0.0
    if hp.Zn_star.dim and page.Bn.dim:
        dual_orth = float(np.linalg.norm(hp.Zn_star.frame_basis().conj().T @ page.Bn.frame_basis(), 2))
    return PhiReport(n, hp.dims, page.Gn_dims, ang, conj, hp.adjointness_defect(), split + cross, dual_orth, tol)


def next_harmonic_from_kernels(hp, tol=DEFAULT_TOL):
    """ker delta~_n meet ker delta~_n^* inside H_n, as an ambient subspace."""
    H = hp.Hn
    if H.dim == 0:
        return Subspace.zero(H.space, H.metric)
    M = np.vstack([hp.D, hp.Dstar])
    blocks = {}
    for p in range(len(H.space.dims)):
        cols = np.flatnonzero(H.degrees == p)
        if not len(cols):
            continue
        N = null_basis(M[:, cols], tol)
        if N.shape[1]:
            blocks[p] = H.basis[H.space.slice(p)][:, cols] @ N
    return Subspace.from_blocks(H.space, H.metric, blocks)


def probe_dual_equals_bperp(jet, metric=None, n=1, tol=DEFAULT_TOL):
    """Experimental: does Z_n^* coincide with the orthogonal complement of B_n?

    Returns a dict with the dimensions and the largest principal angle.
    Nothing else in the package depends on the outcome.
    """
    metric = HermitianMetric.identity(jet.space) if metric is None else metric
    Zs = dual_spaces(jet, metric, n, tol)
    _, Bn = page_spaces(jet, n, tol, metric)
    Bperp = Bn.complement_in(Subspace.whole(jet.space, metric), tol)
    equal_dim = Zs.dim == Bperp.dim
    ang = max_angle(Zs, Bperp) if equal_dim else None
    return {
        "n": n,
        "dim_Zstar": Zs.dim,
        "dim_Bperp": Bperp.dim,
        "contained": inclusion_defect(Zs, Bperp) <= 1e-8,
        "equal": bool(equal_dim and ang <= 1e-8),
        "max_angle": ang,
    }
