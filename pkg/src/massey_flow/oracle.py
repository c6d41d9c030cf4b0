"""Brute-force ground truth from eigenvalue branches of T_t = d_t + d_t^*.

The family is sampled on a symmetric grid around t = 0, eigenpairs are
matched from sample to sample, and the branches are fitted by polynomials.
Derivatives at 0 come from the fits.  Everything is done in the metric
frame, where T_t is an ordinary Hermitian matrix.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import MatchingAmbiguity
from .graded import HermitianMetric, Subspace, max_angle, orthonormalize
from .hodge import harmonic_page

CLUSTER_TOL = 1e-10
MIN_OVERLAP = 0.7
GAP_REF = 1e-4
PERSIST_TOL = 1e-12


def frame_jet_matrices(jet, metric=None):
    """Full frame matrices of d0, A_1, ... (coordinates y = L^H x)."""
    metric = HermitianMetric.identity(jet.space) if metric is None else metric
    F = metric.frame_matrix()
    Finv = np.linalg.inv(F) if F.size else F
    return [F @ jet.coeff(i).matrix() @ Finv for i in range(jet.order + 1)]


def T_coefficients(jet, metric=None):
    return [a + a.conj().T for a in frame_jet_matrices(jet, metric)]


def assemble_T(jet, metric=None, t=0.0):
    """T_t = d_t + d_t^* as a Hermitian matrix in the metric frame."""
    out = np.zeros((jet.space.total_dim,) * 2, dtype=complex)
    for i, c in enumerate(T_coefficients(jet, metric)):
        out += (t ** i) * c
    return out


def _polyval(coeffs, t):
    out = np.zeros_like(coeffs[0], dtype=complex)
    for i, c in enumerate(coeffs):
        out = out + (t ** i) * c
    return out


def default_radius(coeffs):
    growth = max([np.linalg.norm(c, 2) ** (1.0 / i) for i, c in enumerate(coeffs) if i] + [1.0])
    return 1e-2 / growth


@dataclass
class EigenBranchFamily:
    ts: np.ndarray             # sample grid, shape (S,)
    values: np.ndarray         # lambda_alpha(t_k), shape (S, m)
    vectors: np.ndarray        # phi_alpha(t_k) as columns, shape (S, dim, m)
    cluster_sizes: np.ndarray  # size of the degenerate cluster containing each branch
    lam_coeffs: np.ndarray     # Taylor coefficients of the fitted lambda, shape (m, D+1)
    vec_coeffs: np.ndarray     # Taylor coefficients of the fitted vectors, shape (D+1, dim, m)
    fit_residuals: np.ndarray  # per branch, max deviation of the lambda fit
    vector_residuals: np.ndarray
    radius: float
    fit_degree: int
    taylor: list = field(repr=False, default_factory=list)  # coefficients of the family
    lam_fit: np.ndarray = None  # direct least-squares fit of the sampled eigenvalues

    def fit_disagreement(self, n):
        """Largest gap between the Rayleigh and the direct-fit value of lambda^{(n)}(0)."""
        if self.lam_fit is None or n > self.fit_degree:
            return 0.0
        return float(math.factorial(n) * np.abs(self.lam_coeffs[:, n] - self.lam_fit[:, n]).max(initial=0.0))

    @property
    def size(self):
        return self.values.shape[1]

    def derivative(self, n):
        """lambda_alpha^{(n)}(0) for every branch."""
        if n > self.fit_degree:
            return np.zeros(self.size)
        return math.factorial(n) * self.lam_coeffs[:, n].real

    def phi0(self):
        return self.vec_coeffs[0]

    def sample_defect(self):
        """max_k || T_k phi - lambda phi || over samples and branches."""
        worst = 0.0
        for k, t in enumerate(self.ts):
            T = _polyval(self.taylor, t)
            V = self.vectors[k]
            worst = max(worst, float(np.linalg.norm(T @ V - V * self.values[k], axis=0).max(initial=0.0)))
        return worst


def _clusters(w, tol):
    groups, cur = [], [0]
    for i in range(1, len(w)):
        if w[i] - w[i - 1] <= tol:
            cur.append(i)
        else:
            groups.append(cur)
            cur = [i]
    groups.append(cur)
    return groups


def _sweep(taylor, ts, cluster_tol):
    m = taylor[0].shape[0]
    S = len(ts)
    values = np.zeros((S, m))
    vectors = np.zeros((S, m, m), dtype=complex)
    csize = np.zeros((S, m), dtype=int)
    scales = np.zeros(S)
    prev = None
    for k, t in enumerate(ts):
        T = _polyval(taylor, t)
        T = (T + T.conj().T) / 2
        w, V = np.linalg.eigh(T)
        ctol = cluster_tol * max(1.0, float(np.abs(w).max(initial=0.0)))
        groups = _clusters(w, ctol)
        scales[k] = max(1.0, float(np.abs(w).max(initial=0.0)))
        if prev is None:
            values[k], vectors[k] = w, V
            for g in groups:
                csize[k, g] = len(g)
            prev = V
            continue
        O = np.abs(prev.conj().T @ V)  # rows: previous branches, cols: new eigenvectors
        rows, cols = linear_sum_assignment(-O)
        branch_of = np.empty(m, dtype=int)
        branch_of[cols] = rows
        weakest = 1.0
        for g in groups:
            br = branch_of[g]
            Vg = V[:, g]
            M = Vg.conj().T @ prev[:, br]
            U, s, Wh = np.linalg.svd(M)
            weakest = min(weakest, float(s.min()))
            aligned = Vg @ (U @ Wh)  # closest rotation of the cluster onto the old vectors
            vectors[k][:, br] = aligned
            values[k, br] = np.real(np.einsum("ij,ij->j", aligned.conj(), T @ aligned))
            csize[k, br] = len(g)
        if weakest < MIN_OVERLAP:
            raise MatchingAmbiguity(ts[k - 1], t, weakest)
        prev = vectors[k]
    return values, vectors, csize, scales


def _fit_weights(values, scales):
    """Sample weights per branch from the distance to the nearest eigenvalue
    that is not persistently degenerate with it.

    Eigenvector noise behaves like eps*|T|/gap, so nearly degenerate samples
    get little weight.  Branches that coincide at every sample share an
    eigenspace and do not count against each other.
    """
    S, m = values.shape
    noise = PERSIST_TOL * scales[:, None, None]
    diff = np.abs(values[:, :, None] - values[:, None, :])
    persistent = np.all(diff <= noise, axis=0)
    diff = np.where(persistent[None], np.inf, diff)
    gap = diff.min(axis=2)
    return np.minimum(1.0, gap / (GAP_REF * scales[:, None]))


def _fit(ts, Y, degree, radius, weights=None):
    """Weighted least-squares Taylor coefficients of each column of Y (rows = samples)."""
    s = ts / radius
    V = np.vander(s, degree + 1, increasing=True)
    w = np.ones(len(ts)) if weights is None else weights
    wy = w.reshape((-1,) + (1,) * (np.ndim(Y) - 1))
    c, *_ = np.linalg.lstsq(V * w[:, None], Y * wy, rcond=None)
    scale = radius ** -np.arange(degree + 1)
    return c * scale.reshape((-1,) + (1,) * (c.ndim - 1)), V @ c


def rayleigh_jets(taylor, vec, degree):
    """Taylor coefficients of <T_t phi(t), phi(t)> / <phi(t), phi(t)> per branch.

    Quadratic in the vector error, so far less sensitive to eigensolver noise
    than differentiating the sampled eigenvalues.
    """
    D = degree
    m = vec.shape[2]
    num = np.zeros((D + 1, m), dtype=complex)
    den = np.zeros((D + 1, m), dtype=complex)
    Tphi = np.zeros((D + 1,) + vec.shape[1:], dtype=complex)
    for i, C in enumerate(taylor):
        for j in range(D + 1 - i):
            Tphi[i + j] += C @ vec[j]
    for j in range(D + 1):
        for k in range(D + 1 - j):
            num[j + k] += np.einsum("ia,ia->a", vec[j].conj(), Tphi[k])
            den[j + k] += np.einsum("ia,ia->a", vec[j].conj(), vec[k])
    # series division num / den
    q = np.zeros((D + 1, m), dtype=complex)
    for k in range(D + 1):
        acc = num[k] - sum(q[i] * den[k - i] for i in range(k))
        q[k] = acc / den[0]
    return q.real.T


def track_family(taylor, radius=None, samples=None, fit_degree=5, max_shrink=6,
                 cluster_tol=CLUSTER_TOL):
    """Track the eigenvalue branches of sum_i t^i C_i near t = 0.

    ``taylor`` is the list of Hermitian coefficients C_i.  On ambiguous
    matching the radius is halved up to ``max_shrink`` times.
    """
    taylor = [np.asarray(c, dtype=complex) for c in taylor]
    samples = 4 * fit_degree + 1 if samples is None else int(samples)
    if samples < 2 * fit_degree + 3:
        raise ValueError(f"need at least {2 * fit_degree + 3} samples for degree {fit_degree}")
    if samples % 2 == 0:
        samples += 1  # keep t = 0 on the grid
    r = default_radius(taylor) if radius is None else float(radius)
    for attempt in range(max_shrink + 1):
        ts = np.linspace(-r, r, samples)
        try:
            values, vectors, csize, scales = _sweep(taylor, ts, cluster_tol)
            break
        except MatchingAmbiguity:
            if attempt == max_shrink:
                raise
            r /= 2
    m = values.shape[1]
    D = fit_degree
    lam_fit = np.zeros((m, D + 1))
    vec = np.zeros((D + 1, m, m), dtype=complex)
    lres = np.zeros(m)
    vres = np.zeros(m)
    weights = _fit_weights(values, scales)
    for a in range(m):
        # fit only on samples where the branch sits in its usual cluster: a
        # larger cluster (e.g. the kernel at t = 0) carries an arbitrary basis,
        # and a cluster that splits off at the grid edge breaks continuity
        sizes, counts = np.unique(csize[:, a], return_counts=True)
        usual = sizes[np.argmax(counts)]
        keep = csize[:, a] == usual
        if keep.sum() < D + 2:
            keep = csize[:, a] <= usual
        if keep.sum() < D + 2:
            keep[:] = True
        w = weights[keep, a]
        w = np.maximum(w / w.max(), 1e-8) if w.max() > 0 else np.ones_like(w)
        c, fitted = _fit(ts[keep], values[keep, a], D, r, w)
        lam_fit[a] = c
        lres[a] = float(np.abs(fitted - values[keep, a]).max())
        cv, fv = _fit(ts[keep], vectors[keep][:, :, a], D, r, w)
        vec[:, :, a] = cv
        vres[a] = float((np.abs(fv - vectors[keep][:, :, a]).max(axis=1) * w).max())
    lam = rayleigh_jets(taylor, vec, D)
    return EigenBranchFamily(ts, values, vectors, csize, lam, vec, lres, vres, r, D, taylor, lam_fit)


def track_branches(jet, metric=None, radius=None, samples=None, fit_degree=None, max_n=3):
    """Eigen-branches of T_t for a jet; fit degree defaults to max_n + 2."""
    fit_degree = max_n + 2 if fit_degree is None else fit_degree
    return track_family(T_coefficients(jet, metric), radius, samples, fit_degree)


@dataclass
class VanishingFlag:
    A: list            # A[n] = branch indices with lambda^{(i)}(0) ~ 0 for i < n
    V: list            # V[n] = orthonormal frame basis of span{phi_alpha(0) : alpha in A[n]}
    derivatives: np.ndarray  # shape (max_n + 1, m)
    zero_tol: list
    borderline: list   # (n, alpha, value) with |value| within a factor 100 of zero_tol

    def sizes(self):
        return [len(a) for a in self.A]


def vanishing_flag(family, max_n, zero_tol=None):
    if family.fit_degree < max_n:
        raise ValueError("fit degree must be at least max_n")
    m = family.size
    derivs = np.array([family.derivative(n) for n in range(max_n + 1)])
    A = [np.arange(m)]
    tols, border = [], []
    phi0 = family.phi0()
    for n in range(max_n + 1):
        cur = A[n]
        vals = derivs[n, cur]
        ztol = 1e-6 * max(1.0, float(np.abs(derivs[n]).max(initial=0.0))) if zero_tol is None else zero_tol
        tols.append(ztol)
        for a, v in zip(cur, vals):
            if ztol / 100 < abs(v) < ztol * 100:
                border.append((n, int(a), float(v)))
        if n < max_n:
            A.append(cur[np.abs(vals) <= ztol])
    V = [orthonormalize(phi0[:, a], 1e-8) if len(a) else np.zeros((m, 0), dtype=complex) for a in A]
    return VanishingFlag(A, V, derivs, tols, border)


def bilinear_form_direct(family, n, indices):
    """Matrix of B_n on the branches ``indices``: entry [b, a] is
    n! sum_{i+j=n} <C_i phi_a^{(j)}, phi_b(0)> from the fitted vector jets."""
    idx = np.asarray(indices, dtype=int)
    taylor = family.taylor
    vec = family.vec_coeffs
    phi0 = vec[0][:, idx]
    acc = np.zeros((len(idx), len(idx)), dtype=complex)
    for i in range(min(n, len(taylor) - 1) + 1):
        j = n - i
        if j > family.fit_degree:
            continue
        acc += phi0.conj().T @ (taylor[i] @ vec[j][:, idx])
    return math.factorial(n) * acc


def form_Bn_direct(jet, metric, family, n, flag=None):
    """B_n on V_n in the branch basis, computed from vector jets (not from lambda).

    ``jet`` and ``metric`` are only used to check that ``family`` was built
    from them.
    """
    if jet is not None:
        ref = T_coefficients(jet, metric)
        if len(ref) > len(family.taylor) or any(
            np.linalg.norm(a - b) > 1e-12 * max(1.0, np.linalg.norm(a)) for a, b in zip(ref, family.taylor)
        ):
            raise ValueError("family was not built from this jet and metric")
    flag = vanishing_flag(family, n) if flag is None else flag
    return bilinear_form_direct(family, n, flag.A[n])


def diagonality_defect(B):
    if B.size == 0:
        return 0.0
    off = B - np.diag(np.diag(B))
    return float(np.abs(off).max() / max(1e-300, np.abs(np.diag(B)).max(), 1.0))


def vn_subspace(jet, metric, flag, n):
    """V_n as a (generally inhomogeneous) ambient subspace."""
    metric = HermitianMetric.identity(jet.space) if metric is None else metric
    Y = flag.V[n]
    return Subspace(jet.space, metric, metric.from_frame(Y))


@dataclass
class Comparison:
    n: int
    dim_V: int
    dim_H: int
    max_angle: float
    eig_oracle: list
    eig_algebraic: list
    eig_defect: float
    tol: float

    @property
    def passed(self):
        return self.dim_V == self.dim_H and self.max_angle <= self.tol and self.eig_defect <= self.tol

    def as_dict(self):
        return {
            "n": self.n, "dim_V": self.dim_V, "dim_H": self.dim_H,
            "max_angle": self.max_angle, "eig_defect": self.eig_defect,
            "eig_oracle": self.eig_oracle, "eig_algebraic": self.eig_algebraic,
            "passed": self.passed,
        }


def multiset_defect(a, b):
    a, b = np.sort(np.asarray(a, float)), np.sort(np.asarray(b, float))
    if a.shape != b.shape:
        return float("inf")
    if not a.size:
        return 0.0
    return float(np.abs(a - b).max() / max(1.0, np.abs(a).max(), np.abs(b).max()))


def compare_Vn_Hn(jet, metric, family, n, tol=1e-5, flag=None, hpage=None, rank_tol=1e-9):
    """Compare the oracle V_n with the harmonic page H_n, including B_n spectra."""
    metric = HermitianMetric.identity(jet.space) if metric is None else metric
    flag = vanishing_flag(family, n) if flag is None else flag
    hp = harmonic_page(jet, metric, n, rank_tol, check=False) if hpage is None else hpage
    V = vn_subspace(jet, metric, flag, n)
    H = Subspace(hp.Hn.space, metric, hp.Hn.basis)
    ang = max_angle(V, H) if V.dim == H.dim else float("inf")
    lam = sorted(float(x) for x in flag.derivatives[n, flag.A[n]]) if n < flag.derivatives.shape[0] else []
    alg = sorted(float(x) for x in np.linalg.eigvalsh(hp.form_T())) if hp.D.size else []
    return Comparison(n, V.dim, H.dim, float(ang), lam, alg, multiset_defect(lam, alg), tol)


@dataclass
class StabilityReport:
    max_relative_change: float
    tol: float
    per_order: list

    @property
    def passed(self):
        return self.max_relative_change <= self.tol


def stability_gate(taylor, max_n, radius=None, samples=None, fit_degree=None, tol=1e-5):
    """Refit at half the radius and compare the derivative multisets of the
    vanishing branches order by order."""
    fit_degree = max_n + 2 if fit_degree is None else fit_degree
    f1 = track_family(taylor, radius, samples, fit_degree)
    f2 = track_family(taylor, f1.radius / 2, samples, fit_degree)
    fl1, fl2 = vanishing_flag(f1, max_n), vanishing_flag(f2, max_n)
    worst, per = 0.0, []
    for n in range(1, max_n + 1):
        a = fl1.derivatives[n, fl1.A[n]]
        b = fl2.derivatives[n, fl2.A[n]]
        d = multiset_defect(a, b)
        per.append(d)
        worst = max(worst, d)
    return StabilityReport(worst, tol, per)
