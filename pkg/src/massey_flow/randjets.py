"""Random flat jets and metrics for property tests and fixtures."""
import numpy as np
import scipy.linalg as sla

from .errors import GenerationFailed
from .graded import GradedMap, GradedSpace, HermitianMetric, lstsq_min_norm, null_basis
from .jets import OperatorJet


def _cgauss(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


class Layout:
    """Splitting of each degree into exact, harmonic and coexact slots.

    ``pieces`` lists elementary complexes (p, i, j, k): slot i of degree p
    maps to slot j of degree p+1 with weight t^k (k = 0 belongs to d0).
    """

    def __init__(self, dims, pieces):
        self.dims = tuple(dims)
        self.pieces = list(pieces)
        used = [set() for _ in dims]
        for p, i, j, k in self.pieces:
            used[p].add(i)
            used[p + 1].add(j)
        self.harmonic = [[i for i in range(d) if i not in used[p]] for p, d in enumerate(dims)]

    def std(self, power):
        """Standard matrix of the t^power arrows."""
        n = sum(self.dims)
        off = np.concatenate([[0], np.cumsum(self.dims)]).astype(int)
        M = np.zeros((n, n))
        for p, i, j, k in self.pieces:
            if k == power:
                M[off[p + 1] + j, off[p] + i] = 1.0
        return M

    def page_dims(self, n):
        """dim G_n per degree: harmonic slots plus both ends of pieces with k >= n."""
        out = [len(h) for h in self.harmonic]
        for p, i, j, k in self.pieces:
            if k >= n:
                out[p] += 1
                out[p + 1] += 1
        return out


def random_layout(dims, rng, max_power=0, d0_pieces=None):
    """Random layout; pieces with power 0 form d0, others are deformation arrows."""
    free = [list(range(d)) for d in dims]
    for f in free:
        rng.shuffle(f)
    pieces = []
    for p in range(len(dims) - 1):
        room = min(len(free[p]), len(free[p + 1]))
        if room == 0:
            continue
        count = int(rng.integers(0, room + 1)) if d0_pieces is None else min(d0_pieces, room)
        count = min(count, max(room - 1, 0)) if room > 1 and d0_pieces is None else count
        for _ in range(count):
            i, j = free[p].pop(), free[p + 1].pop()
            k = 0 if max_power == 0 else int(rng.integers(0, max_power + 1))
            pieces.append((p, i, j, k))
    return Layout(dims, pieces)


def _basis_change(space, rng, scale=1.0):
    return [_cgauss(rng, d, d) * scale + 2 * np.eye(d) for d in space.dims]


def random_differential(space, rng, layout=None, basis=None):
    """Random d0 of degree +1 with d0 o d0 = 0, built from a layout."""
    layout = random_layout(space.dims, rng) if layout is None else layout
    S = _basis_change(space, rng) if basis is None else basis
    Sfull = sla.block_diag(*S)
    D = Sfull @ layout.std(0) @ np.linalg.inv(Sfull)
    return GradedMap.from_matrix(space, space, 1, D, tol=1e-9)


def random_metric(space, rng, magnitude=0.3):
    """Gram matrices exp(H_p) with H_p random Hermitian of size ~ magnitude."""
    grams = []
    for d in space.dims:
        H = _cgauss(rng, d, d)
        H = (H + H.conj().T) / 2
        nrm = np.linalg.norm(H, 2) if d else 1.0
        grams.append(sla.expm(magnitude * H / max(nrm, 1e-300)) if d else np.zeros((0, 0)))
    return HermitianMetric(space, grams)


def _poly_mul(P, Q, order):
    out = [np.zeros_like(P[0]) for _ in range(order + 1)]
    for i, a in enumerate(P):
        for j, b in enumerate(Q):
            if i + j <= order:
                out[i + j] = out[i + j] + a @ b
    return out


def _poly_exp(Z, order):
    """Taylor coefficients of exp(Z(t)) for a matrix polynomial Z with Z(0) = 0."""
    n = Z[0].shape[0]
    result = [np.eye(n, dtype=complex)] + [np.zeros((n, n), dtype=complex) for _ in range(order)]
    term = [np.eye(n, dtype=complex)] + [np.zeros((n, n), dtype=complex) for _ in range(order)]
    for k in range(1, order + 1):
        term = _poly_mul(term, Z, order)
        term = [c / k for c in term]
        result = [a + b for a, b in zip(result, term)]
    return result


def _skew_blocks(space, metric, rng, scale):
    """Block-diagonal generator that is skew for the metric (so exp is unitary)."""
    G = metric.gram()
    n = space.total_dim
    X = np.zeros((n, n), dtype=complex)
    for p, d in enumerate(space.dims):
        if d:
            s = space.slice(p)
            K = _cgauss(rng, d, d)
            K = (K - K.conj().T) / 2
            # metric-skew: X = G^{-1} K
            X[s, s] = np.linalg.solve(G[s, s], K) * scale
    return X


def conjugation_jet(space, d0, order, rng, metric=None, scale=1.0, second=True):
    """d_t = g(t) d0 g(t)^{-1} with g = exp(tX + t^2 Y), truncated at ``order``."""
    metric = HermitianMetric.identity(space) if metric is None else metric
    X = _skew_blocks(space, metric, rng, scale)
    Y = _skew_blocks(space, metric, rng, scale) if second else np.zeros_like(X)
    Z = [np.zeros_like(X), X, Y] + [np.zeros_like(X)] * max(order - 2, 0)
    Z = Z[: order + 1]
    g = _poly_exp(Z, order)
    ginv = _poly_exp([-z for z in Z], order)
    D0 = d0.matrix()
    coeffs = _poly_mul(_poly_mul(g, [D0], order), ginv, order)
    maps = [GradedMap.from_matrix(space, space, 1, c, tol=1e-9) for c in coeffs]
    return OperatorJet(space, maps[0], maps[1:])


def _anticommutator_matrix(space, d0):
    """Matrix of X -> d0 X + X d0 on degree +1 maps (vectorized per block)."""
    dims = space.dims
    top = len(dims) - 1
    shapes = [(dims[p + 1], dims[p]) for p in range(top)]
    sizes = [a * b for a, b in shapes]
    offs = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
    out_shapes = [(space.dim(p + 2), dims[p]) for p in range(top)]
    out_sizes = [a * b for a, b in out_shapes]
    out_offs = np.concatenate([[0], np.cumsum(out_sizes)]).astype(int)
    N, M = offs[-1], out_offs[-1]
    L = np.zeros((M, N), dtype=complex)
    for col in range(N):
        e = np.zeros(N)
        e[col] = 1.0
        X = unpack(space, e, offs, shapes)
        Y = d0 @ X + X @ d0
        L[:, col] = pack(Y, out_offs, out_shapes)
    return L, (offs, shapes), (out_offs, out_shapes)


def unpack(space, vec, offs, shapes):
    blocks = []
    for p in range(len(space.dims)):
        if p < len(shapes):
            blocks.append(np.asarray(vec[offs[p]:offs[p + 1]]).reshape(shapes[p]))
        else:
            blocks.append(None)
    return GradedMap(space, space, 1, blocks)


def pack(m, offs, shapes):
    out = np.zeros(offs[-1], dtype=complex)
    for p, shp in enumerate(shapes):
        out[offs[p]:offs[p + 1]] = m.block(p).reshape(-1)
    return out


def _harmonic_arrows(layout, rng, basis):
    """Random cocycle mapping harmonic slots of degree p to those of p+1, for
    a set of pairwise non-adjacent p (so that its square vanishes)."""
    dims = layout.dims
    n = sum(dims)
    off = np.concatenate([[0], np.cumsum(dims)]).astype(int)
    H = np.zeros((n, n), dtype=complex)
    p = int(rng.integers(0, 2))
    while p < len(dims) - 1:
        for i in layout.harmonic[p]:
            for j in layout.harmonic[p + 1]:
                H[off[p + 1] + j, off[p] + i] = _cgauss(rng)
        p += 2
    Sfull = sla.block_diag(*basis)
    return Sfull @ H @ np.linalg.inv(Sfull)


def obstruction_jet(space, d0, order, rng, layout=None, basis=None, max_tries=20, tol=1e-9):
    """Solve the flatness equations order by order from a random A_1 with
    d0 A_1 + A_1 d0 = 0 (harmonic arrows plus a random gauge term).

    Raises GenerationFailed when every attempt hits an obstruction.
    """
    L, (offs, shapes), (oo, oshapes) = _anticommutator_matrix(space, d0)
    D0 = d0.matrix()
    for _ in range(max_tries):
        if layout is not None:
            h = _harmonic_arrows(layout, rng, basis)
        else:
            K = null_basis(L, 1e-12) if L.shape[0] else np.eye(L.shape[1], dtype=complex)
            h = unpack(space, K @ _cgauss(rng, K.shape[1]), offs, shapes).matrix()
        X = sla.block_diag(*[_cgauss(rng, d, d) for d in space.dims]) * 0.5
        a1 = h + (D0 @ X - X @ D0)
        mats = [a1]
        ok = True
        K = null_basis(L, 1e-12) if L.size else np.zeros((L.shape[1], 0))
        for k in range(2, order + 1):
            rhs = sum(mats[i - 1] @ mats[k - i - 1] for i in range(1, k))
            b = -pack(GradedMap.from_matrix(space, space, 2, rhs, tol=1e-8), oo, oshapes)
            x, res = lstsq_min_norm(L, b, tol) if L.size else (np.zeros(L.shape[1], complex), np.linalg.norm(b))
            if res > 1e-9 * max(1.0, np.linalg.norm(b)) and k > 2 and K.shape[1]:
                # let A_{k-1} move inside ker L: its own equation is unaffected
                cols = []
                for c in range(K.shape[1]):
                    dk = unpack(space, K[:, c], offs, shapes).matrix()
                    cols.append(pack(GradedMap.from_matrix(space, space, 2, a1 @ dk + dk @ a1, tol=1e-8), oo, oshapes))
                M = np.hstack([L, np.array(cols).T])
                y, res = lstsq_min_norm(M, b, tol)
                x = y[: L.shape[1]]
                mats[k - 2] = mats[k - 2] + unpack(space, K @ y[L.shape[1]:], offs, shapes).matrix()
            if res > 1e-9 * max(1.0, np.linalg.norm(b)):
                ok = False
                break
            mats.append(unpack(space, x, offs, shapes).matrix())
        coeffs = [GradedMap.from_matrix(space, space, 1, m, tol=1e-8) for m in mats]
        if ok:
            return OperatorJet(space, d0, coeffs)
    raise GenerationFailed(f"flatness obstruction persisted after {max_tries} attempts")


def elementary_jet(space, layout, order, rng, basis, scale=0.5):
    """d_t = S g(t) D(t) g(t)^{-1} S^{-1}: elementary complexes with t^k arrows,
    conjugated by a fixed basis change S and a non-unitary g = exp(tX + t^2 Y)."""
    n = space.total_dim
    D = [layout.std(k).astype(complex) for k in range(order + 1)]
    X = sla.block_diag(*[_cgauss(rng, d, d) for d in space.dims]) * scale
    Y = sla.block_diag(*[_cgauss(rng, d, d) for d in space.dims]) * scale
    Z = ([np.zeros((n, n), dtype=complex), X, Y] + [np.zeros((n, n), dtype=complex)] * order)[: order + 1]
    g = _poly_exp(Z, order)
    ginv = _poly_exp([-z for z in Z], order)
    S = sla.block_diag(*basis)
    Sinv = np.linalg.inv(S)
    coeffs = _poly_mul(_poly_mul(g, D, order), ginv, order)
    maps = [GradedMap.from_matrix(space, space, 1, S @ c @ Sinv, tol=1e-9) for c in coeffs]
    return OperatorJet(space, maps[0], maps[1:])


def random_flat_jet(dims, order, seed, mode="b", metric_magnitude=0.0, max_power=None):
    """Random flat jet.  Returns (jet, metric, info).

    mode "a": unitary conjugation of a random d0 (isospectral family).
    mode "b": order-by-order minimal-norm solution from a random A_1.
    mode "c": conjugated direct sum of elementary complexes C --t^k--> C,
              whose page dimensions are known in closed form (info["layout"]).
    """
    rng = np.random.default_rng(seed)
    space = GradedSpace(dims)
    metric = random_metric(space, rng, metric_magnitude) if metric_magnitude > 0 else HermitianMetric.identity(space)
    basis = _basis_change(space, rng)
    info = {"mode": mode, "seed": seed}
    if mode == "a":
        layout = random_layout(dims, rng)
        d0 = random_differential(space, rng, layout, basis)
        jet = conjugation_jet(space, d0, order, rng, metric)
    elif mode == "b":
        layout = random_layout(dims, rng)
        d0 = random_differential(space, rng, layout, basis)
        jet = obstruction_jet(space, d0, order, rng, layout, basis)
    elif mode == "c":
        layout = random_layout(dims, rng, max_power=order if max_power is None else max_power)
        jet = elementary_jet(space, layout, order, rng, basis)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    info["layout"] = layout
    return jet, metric, info
