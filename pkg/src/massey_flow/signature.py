"""Star structure, the odd signature operator and its page forms.

The grading runs over 0..2l-1.  ``pairing`` is the matrix P with
int(a . b) = b^H P a, and ``star`` the matrix S with <a, b> = int(a . S b),
which amounts to G = S^H P for the metric Gram matrix G.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidStar, NotHermitian, PairingNotDescending, StarJetMismatch, Unresolved
from .graded import DEFAULT_TOL, HermitianMetric
from .hodge import harmonic_page
from .jets import build_page, next_page_dims, page_spaces
from .oracle import track_family


def _check_grading(space, ell):
    if len(space.dims) != 2 * ell:
        raise StarJetMismatch(f"grading 0..{len(space.dims) - 1} does not match l = {ell}")
    for p in range(2 * ell):
        if space.dim(p) != space.dim(2 * ell - 1 - p):
            raise StarJetMismatch(f"dim {p} = {space.dim(p)} but dim {2 * ell - 1 - p} = {space.dim(2 * ell - 1 - p)}")


def _offdegree_defect(space, M, ell):
    """Norm of the entries of M that do not map degree p to 2l-1-p."""
    mask = np.ones(M.shape, dtype=bool)
    for p in range(2 * ell):
        mask[space.slice(2 * ell - 1 - p), space.slice(p)] = False
    return float(np.linalg.norm(M[mask]))


@dataclass
class StarStructure:
    space: object
    ell: int
    matrix: np.ndarray  # block p -> 2l-1-p

    def __post_init__(self):
        _check_grading(self.space, self.ell)
        self.matrix = np.asarray(self.matrix, dtype=complex)

    def block(self, p):
        return self.matrix[self.space.slice(2 * self.ell - 1 - p), self.space.slice(p)]

    def __call__(self, w):
        return self.matrix @ w


@dataclass
class PairingStructure:
    space: object
    ell: int
    matrix: np.ndarray  # int(a . b) = b^H P a

    def __post_init__(self):
        _check_grading(self.space, self.ell)
        self.matrix = np.asarray(self.matrix, dtype=complex)

    def __call__(self, a, b):
        return complex(np.vdot(b, self.matrix @ a))


def star_from_pairing(pairing, metric):
    """S = P^{-H} G, the unique map with <a, b> = int(a . S b)."""
    return StarStructure(pairing.space, pairing.ell, np.linalg.solve(pairing.matrix.conj().T, metric.gram()))


def pairing_from_star(star, metric):
    return PairingStructure(star.space, star.ell, np.linalg.solve(star.matrix.conj().T, metric.gram()))


@dataclass
class StarReport:
    block_defect: float
    isometry_defect: float
    self_adjoint_defect: float
    involution_defect: float
    tol: float

    @property
    def passed(self):
        return max(self.block_defect, self.isometry_defect, self.self_adjoint_defect, self.involution_defect) <= self.tol


def validate_star(star, metric=None, tol=1e-9, raise_on_failure=True):
    """Check that * is an isometry, self-adjoint and squares to the identity."""
    metric = HermitianMetric.identity(star.space) if metric is None else metric
    G = metric.gram()
    S = star.matrix
    scale = max(1.0, float(np.linalg.norm(G)))
    rep = StarReport(
        _offdegree_defect(star.space, S, star.ell) / max(1.0, float(np.linalg.norm(S))),
        float(np.linalg.norm(S.conj().T @ G @ S - G)) / scale,
        float(np.linalg.norm(G @ S - S.conj().T @ G)) / scale,
        float(np.linalg.norm(S @ S - np.eye(len(S)))),
        tol,
    )
    if raise_on_failure:
        for name, val in (("degree", rep.block_defect), ("isometry", rep.isometry_defect),
                          ("self-adjoint", rep.self_adjoint_defect), ("involution", rep.involution_defect)):
            if val > tol:
                raise InvalidStar(name, val)
    return rep


def validate_pairing(pairing, metric=None, star=None, tol=1e-9):
    """Hermitian symmetry of the pairing and, given a star, G = S^H P."""
    P = pairing.matrix
    scale = max(1.0, float(np.linalg.norm(P)))
    out = {
        "degree": _offdegree_defect(pairing.space, P.conj().T, pairing.ell) / scale,
        "hermitian": float(np.linalg.norm(P - P.conj().T)) / scale,
    }
    if star is not None:
        metric = HermitianMetric.identity(pairing.space) if metric is None else metric
        G = metric.gram()
        out["compatibility"] = float(np.linalg.norm(star.matrix.conj().T @ P - G)) / max(1.0, float(np.linalg.norm(G)))
    out["passed"] = all(v <= tol for v in out.values())
    return out


# ---------------------------------------------------------------- mu and Psi

def mu_matrix(star):
    """mu = i^l (-1)^{p(p+1)/2} * on degree p."""
    space, ell = star.space, star.ell
    M = np.zeros_like(star.matrix)
    for p in range(2 * ell):
        c = (1j ** ell) * (-1) ** int(p * (p + 1) // 2)
        M[:, space.slice(p)] = c * star.matrix[:, space.slice(p)]
    return M


def mu(star, w):
    return mu_matrix(star) @ np.asarray(w, dtype=complex)


def even_indices(space):
    return np.concatenate([np.arange(space.slice(p).start, space.slice(p).stop)
                           for p in range(0, len(space.dims), 2)]).astype(int)


def psi_matrix(star, sign=+1):
    """Psi_{+-} as a (total x even) matrix: w -> (w +- mu w) / sqrt 2."""
    idx = even_indices(star.space)
    n = star.space.total_dim
    E = np.zeros((n, len(idx)), dtype=complex)
    E[idx, np.arange(len(idx))] = 1.0
    return (E + sign * mu_matrix(star) @ E) / math.sqrt(2)


def psi_plus(star, w):
    """Psi_+ of an even vector given in even coordinates."""
    return psi_matrix(star) @ np.asarray(w, dtype=complex)


def psi_plus_inverse(star, v):
    """Inverse on the +1 eigenspace of mu: sqrt 2 times the even part."""
    return math.sqrt(2) * np.asarray(v, dtype=complex)[even_indices(star.space)]


# ---------------------------------------------------------------- D_t

def _T_ambient(jet, metric, t):
    from .graded import adjoint_map
    d = jet.at(t)
    return d.matrix() + adjoint_map(d, metric).matrix()


def _D_explicit_from(d, star):
    """i^l (-1)^{k-1} (* d - d *) on degree 2k, restricted to even coordinates."""
    space, ell = star.space, star.ell
    S = star.matrix
    M = S @ d - d @ S
    idx = even_indices(space)
    out = np.zeros((len(idx), len(idx)), dtype=complex)
    col = 0
    for p in range(0, 2 * ell, 2):
        k = p // 2
        sl = space.slice(p)
        c = (1j ** ell) * (-1) ** int(k - 1)
        block = c * M[:, sl]
        out[:, col:col + space.dim(p)] = block[idx]
        col += space.dim(p)
    return out


def assemble_D(jet, star, metric=None, t=0.0, check=True, tol=1e-9):
    """D_t on even degrees (ambient even coordinates), via Psi_+ conjugation,
    cross-checked against the explicit formula."""
    metric = HermitianMetric.identity(jet.space) if metric is None else metric
    if star.space != jet.space:
        raise StarJetMismatch("star and jet live on different spaces")
    T = _T_ambient(jet, metric, t)
    P = psi_matrix(star)
    idx = even_indices(jet.space)
    D = math.sqrt(2) * (T @ P)[idx]
    if check:
        Dx = _D_explicit_from(jet.at(t).matrix(), star)
        scale = max(1.0, float(np.linalg.norm(D)))
        err = float(np.linalg.norm(D - Dx)) / scale
        if err > tol:
            raise StarJetMismatch(f"Psi conjugation and explicit D differ by {err:.3e}; "
                                  "the adjoint family does not match (-1)^p * d *")
        off = float(np.linalg.norm((T @ P)[np.setdiff1d(np.arange(len(T)), idx)] -
                                   (mu_matrix(star) @ T @ P)[np.setdiff1d(np.arange(len(T)), idx)]))
        if off > tol * scale:
            raise StarJetMismatch(f"T does not preserve the +1 eigenspace of mu (defect {off:.3e})")
    return D


def mu_commutation_defect(jet, star, metric=None, ts=(-0.3, 0.0, 0.2, 0.5)):
    metric = HermitianMetric.identity(jet.space) if metric is None else metric
    M = mu_matrix(star)
    worst = 0.0
    for t in ts:
        T = _T_ambient(jet, metric, t)
        worst = max(worst, float(np.linalg.norm(T @ M - M @ T)) / max(1.0, float(np.linalg.norm(T))))
    return worst


def even_metric(metric):
    """Gram matrix and frame map of the even part."""
    idx = even_indices(metric.space)
    G = metric.gram()[np.ix_(idx, idx)]
    F = metric.frame_matrix()[np.ix_(idx, idx)]
    return G, F


def D_coefficients(jet, star, metric=None, frame=True):
    """Taylor coefficients of D_t; Hermitian matrices when ``frame`` is set."""
    metric = HermitianMetric.identity(jet.space) if metric is None else metric
    out = []
    for i in range(jet.order + 1):
        c = _D_explicit_from(jet.coeff(i).matrix(), star)
        if frame:
            _, F = even_metric(metric)
            c = F @ c @ np.linalg.inv(F)
            c = (c + c.conj().T) / 2
        out.append(c)
    return out


def track_D_branches(jet, star, metric=None, radius=None, samples=None, fit_degree=None, max_n=3):
    fit_degree = max_n + 2 if fit_degree is None else fit_degree
    return track_family(D_coefficients(jet, star, metric), radius, samples, fit_degree)


# ---------------------------------------------------------------- forms

@dataclass
class HermitianFormReport:
    name: str
    matrix: np.ndarray
    eigenvalues: np.ndarray
    signature: tuple          # (n_plus, n_zero, n_minus)
    zero_tol: float
    basis_degrees: list = field(default_factory=list)
    hermitian_defect: float = 0.0

    @property
    def sig(self):
        return self.signature[0] - self.signature[2]

    @property
    def nullity(self):
        return self.signature[1]

    @property
    def dim(self):
        return self.matrix.shape[0]

    def as_dict(self):
        return {
            "name": self.name,
            "dim": self.dim,
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "signature": self.sig,
            "n_plus": self.signature[0], "n_zero": self.signature[1], "n_minus": self.signature[2],
            "zero_tol": self.zero_tol,
            "hermitian_defect": self.hermitian_defect,
        }


def hermitian_defect(M):
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M - M.conj().T)) / max(1.0, float(np.linalg.norm(M)))


def hermitian_signature(M, zero_tol=None, herm_tol=1e-10):
    """(n_plus, n_zero, n_minus) of a Hermitian matrix."""
    M = np.asarray(M, dtype=complex)
    if M.size == 0:
        return (0, 0, 0)
    h = hermitian_defect(M)
    if h > herm_tol:
        raise NotHermitian(h)
    w = np.linalg.eigvalsh((M + M.conj().T) / 2)
    zt = default_zero_tol(M) if zero_tol is None else zero_tol
    return (int(np.sum(w > zt)), int(np.sum(np.abs(w) <= zt)), int(np.sum(w < -zt)))


def default_zero_tol(M):
    return 1e-7 * max(1.0, float(np.linalg.norm(M, 2))) if M.size else 1e-7


def _report(name, M, zero_tol, degrees, herm_tol):
    h = hermitian_defect(M)
    if h > herm_tol:
        raise NotHermitian(h)
    Mh = (M + M.conj().T) / 2 if M.size else M
    w = np.linalg.eigvalsh(Mh) if M.size else np.zeros(0)
    zt = default_zero_tol(M) if zero_tol is None else zero_tol
    return HermitianFormReport(name, Mh, w, hermitian_signature(Mh, zt), zt, list(degrees), h)


def form_BnD(jet, star, metric=None, n=1, tol=DEFAULT_TOL, hpage=None, zero_tol=None, herm_tol=1e-8):
    """B_n(D) on the even harmonic space: i^l (-1)^{k-1} <(* dt - dt *) v, w>."""
    metric = HermitianMetric.identity(jet.space) if metric is None else metric
    hp = harmonic_page(jet, metric, n, tol, check=False) if hpage is None else hpage
    H = hp.Hn
    even = [j for j in range(H.dim) if H.degrees[j] % 2 == 0]
    B = H.basis[:, even]
    S = star.matrix
    dt = hp.delta_tilde.matrix()
    G = metric.gram()
    M = np.zeros((len(even), len(even)), dtype=complex)
    for c, j in enumerate(even):
        k = H.degrees[j] // 2
        coef = (1j ** star.ell) * (-1) ** int(k - 1)
        v = B[:, c]
        img = coef * (S @ (dt @ v) - dt @ (S @ v))
        M[:, c] = B.conj().T @ (G @ img)
    return _report(f"B_{n}(D)", M, zero_tol, H.degrees[even].tolist(), herm_tol)


def descent_defect(page, pairing):
    """max |int a . b| over a in a basis of B_n^k and b in a basis of Z_n^{2l-1-k}."""
    space, ell = page.Zn.space, pairing.ell
    worst = 0.0
    P = pairing.matrix
    for k in range(2 * ell):
        if page.Bn.degrees is None:
            break
        A = page.Bn.basis[:, page.Bn.degrees == k]
        Bz = page.Zn.basis[:, page.Zn.degrees == 2 * ell - 1 - k]
        if A.shape[1] and Bz.shape[1]:
            # normalise both bases in the Euclidean sense so the defect is scale free
            A = A / np.linalg.norm(A, axis=0)
            Bz = Bz / np.linalg.norm(Bz, axis=0)
            worst = max(worst, float(np.abs(Bz.conj().T @ P @ A).max()))
    return worst / max(1.0, float(np.linalg.norm(P, 2)))


def q_coefficient(ell):
    return 1j * (-1) ** ((ell + 1) // 2) if ell % 2 else (-1) ** (ell // 2)


def form_Qn(jet, pairing, n=1, tol=DEFAULT_TOL, page=None, metric=None, zero_tol=None,
            descent_tol=1e-9, herm_tol=1e-8):
    """Q_n on G_n^{l-1}: c_l int(delta_n v . w) with c_l = i(-1)^{(l+1)/2} or (-1)^{l/2}."""
    page = build_page(jet, n, tol, metric) if page is None else page
    dd = descent_defect(page, pairing)
    if dd > descent_tol:
        raise PairingNotDescending(dd)
    ell = pairing.ell
    W = page.reps
    cols = np.flatnonzero(W.degrees == ell - 1) if W.dim else np.zeros(0, dtype=int)
    R = W.basis[:, cols]
    dR = page.delta.matrix() @ R
    M = q_coefficient(ell) * (R.conj().T @ pairing.matrix @ dR)
    return _report(f"Q_{n}", M, zero_tol, [ell - 1] * len(cols), herm_tol)


# ---------------------------------------------------------------- spectral flow

@dataclass
class FlowRow:
    n: int
    count: int
    sig_Q: int
    sig_BD: int
    nullity_Q: int
    nullity_BD: int
    eigenvalues_BD: list

    def as_dict(self):
        return dict(self.__dict__)


@dataclass
class SpectralFlowReport:
    rows: list
    spectral_flow: int
    complete: bool
    residual_even_dims: list
    mode: str  # "star" or "T"
    convention: str = ("SF counts branches crossing from negative (t<0) to positive (t>0) minus "
                       "the reverse; odd orders contribute their signature, even orders contribute 0")

    def as_dict(self):
        return {
            "mode": self.mode,
            "rows": [r.as_dict() for r in self.rows],
            "spectral_flow": self.spectral_flow,
            "complete": self.complete,
            "residual_even_dims": self.residual_even_dims,
            "convention": self.convention,
        }


def local_spectral_flow(jet, star=None, metric=None, max_n=3, tol=DEFAULT_TOL, pairing=None, strict=False):
    """Per-order counts and signatures, and the local spectral flow through t = 0.

    Without a star the T family is used: counts are dim H_n and the form is
    delta~ + delta~^*, whose spectrum is symmetric.
    """
    metric = HermitianMetric.identity(jet.space) if metric is None else metric
    if star is not None and pairing is None:
        pairing = pairing_from_star(star, metric)
    rows = []
    sf = 0
    last_page = None
    for n in range(1, max_n + 1):
        page = build_page(jet, n, tol, metric)
        hp = harmonic_page(jet, metric, n, tol, page=page)
        if star is None:
            M = hp.form_T()
            rep = _report(f"B_{n}(T)", M, None, hp.Hn.degrees.tolist() if hp.Hn.degrees is not None else [], 1e-8)
            row = FlowRow(n, hp.Hn.dim, rep.sig, rep.sig, rep.nullity, rep.nullity, rep.eigenvalues.tolist())
        else:
            q = form_Qn(jet, pairing, n, tol, page=page)
            b = form_BnD(jet, star, metric, n, tol, hpage=hp)
            count = sum(page.Gn_dims[p] for p in range(0, len(jet.space.dims), 2))
            row = FlowRow(n, count, q.sig, b.sig, q.nullity, b.nullity, b.eigenvalues.tolist())
        rows.append(row)
        if n % 2 == 1:
            sf += row.sig_Q
        last_page = page
    nxt = next_page_dims(last_page, tol) if last_page is not None else []
    if star is None:
        residual = nxt
        unresolved = sum(nxt)
    else:
        residual = [nxt[p] if p % 2 == 0 else 0 for p in range(len(nxt))]
        unresolved = sum(residual)
    if unresolved and strict:
        raise Unresolved(max_n, unresolved)
    return SpectralFlowReport(rows, int(sf), unresolved == 0, residual, "T" if star is None else "star")
