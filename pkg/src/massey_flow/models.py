"""Model builders and problem serialization.

The torus model stands in for the de Rham complex of a flat torus of
dimension m = 2l-1: harmonic forms are constant forms, so the complex is
Lambda*(C^m) (x) F with zero differential, a flat series a(t) of constant
1-forms with values in a Lie algebra g, and the family
d_t = rho(a(t)) acting on Lambda*(C^m) (x) F.
"""
import copy
import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .dgla import (
    DGLA,
    GLA,
    FlatSeries,
    ModuleAction,
    extend_flat_series,
    module_jet,
    series_jet,
    validate_dgla,
    validate_flat_series,
    validate_module,
)
from .errors import InvalidDirection, MasseyFlowError, ParseError, RecursionViolation
from .graded import GradedMap, GradedSpace, HermitianMetric
from .jets import OperatorJet, validate_flat_jet
from .randjets import random_flat_jet
from .signature import PairingStructure, StarStructure, validate_pairing, validate_star

SCHEMA = "massey-flow/v1"


# ---------------------------------------------------------------- exterior algebra

def _perm_sign(seq):
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


class ExteriorAlgebra:
    """Lambda*(C^m) with basis dx^I, I ascending, ordered by degree then lexicographically."""

    def __init__(self, m):
        self.m = m
        self.basis = [I for p in range(m + 1) for I in itertools.combinations(range(1, m + 1), p)]
        self.index = {I: k for k, I in enumerate(self.basis)}
        self.dims = tuple(math.comb(m, p) for p in range(m + 1))

    def label(self, I):
        return "1" if not I else "^".join(f"dx{i}" for i in I)

    def wedge(self, I, J):
        """(sign, K) with dx^I ^ dx^J = sign dx^K, or (0, None)."""
        if set(I) & set(J):
            return 0, None
        return _perm_sign(I + J), tuple(sorted(I + J))

    def orientation_sign(self, I, J):
        """Sign of dx^I ^ dx^J relative to dx^1 ^ ... ^ dx^m (0 unless complementary)."""
        s, K = self.wedge(I, J)
        return s if K == tuple(range(1, self.m + 1)) else 0

    def gram(self, g):
        """Gram matrix of the induced metric on forms: <dx^I, dx^J> = det(g^{-1}[I, J])."""
        ginv = np.linalg.inv(g)
        n = len(self.basis)
        G = np.zeros((n, n))
        for a, I in enumerate(self.basis):
            for b, J in enumerate(self.basis):
                if len(I) != len(J):
                    continue
                if not I:
                    G[a, b] = 1.0
                    continue
                ix = [i - 1 for i in I]
                jx = [j - 1 for j in J]
                G[a, b] = np.linalg.det(ginv[np.ix_(ix, jx)])
        return G


# ---------------------------------------------------------------- coefficient algebras

@dataclass
class Fiber:
    """A Lie algebra g (structure constants c[k,i,j]) acting on F by rho."""
    name: str
    labels: list
    c: np.ndarray          # (dim g)^3
    rho: np.ndarray        # rho[j] is the matrix of rho(X_j) on F
    gram: np.ndarray       # Hermitian metric on F: <f_a, f_b> = gram[b, a]
    f_labels: list
    adjoint: bool = False

    @property
    def dim_g(self):
        return len(self.labels)

    @property
    def dim_f(self):
        return len(self.f_labels)

    def element(self, spec):
        """Fiber element from a label, a coordinate vector or a {label: coeff} mapping."""
        if isinstance(spec, str):
            v = np.zeros(self.dim_g, dtype=complex)
            v[self.labels.index(spec)] = 1.0
            return v
        if isinstance(spec, dict):
            v = np.zeros(self.dim_g, dtype=complex)
            for k, c in spec.items():
                v[self.labels.index(k)] += complex(c)
            return v
        v = np.asarray(spec, dtype=complex).reshape(-1)
        if v.shape != (self.dim_g,):
            raise InvalidDirection(f"fiber element needs {self.dim_g} coordinates")
        return v


def _adjoint_fiber(name, labels, mats):
    """Adjoint representation of a matrix Lie algebra with the trace form <X,Y> = tr(Y^H X)."""
    n = len(mats)
    basis = np.array([m.reshape(-1) for m in mats]).T
    c = np.zeros((n, n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            br = mats[i] @ mats[j] - mats[j] @ mats[i]
            c[:, i, j] = np.linalg.lstsq(basis, br.reshape(-1), rcond=None)[0]
    c[np.abs(c) < 1e-14] = 0
    rho = np.array([c[:, j, :] for j in range(n)])
    gram = np.array([[np.trace(mats[b].conj().T @ mats[a]) for a in range(n)] for b in range(n)])
    return Fiber(name, labels, c, rho, gram, list(labels), adjoint=True)


def abelian_fiber(weights=(1.0,)):
    """u(1) acting on C^r with rho(c) = c diag(weights); the weight-1 case is the line module."""
    w = np.asarray(weights, dtype=float)
    r = len(w)
    return Fiber("abelian", ["c"], np.zeros((1, 1, 1), dtype=complex), np.diag(w).astype(complex)[None],
                 np.eye(r, dtype=complex), [f"f{k + 1}" for k in range(r)])


def sl2_fiber():
    H = np.array([[1, 0], [0, -1]], dtype=complex)
    E = np.array([[0, 1], [0, 0]], dtype=complex)
    F = np.array([[0, 0], [1, 0]], dtype=complex)
    return _adjoint_fiber("sl2", ["H", "E", "F"], [H, E, F])


def gl_fiber(n=2):
    """gl(n) = complexified u(n), adjoint representation, basis E_ij."""
    mats, labels = [], []
    for i in range(n):
        for j in range(n):
            m = np.zeros((n, n), dtype=complex)
            m[i, j] = 1
            mats.append(m)
            labels.append(f"E{i + 1}{j + 1}")
    return _adjoint_fiber(f"u{n}", labels, mats)


def nilpotent_fiber():
    """Abelian u(1) acting on C^2 through a nilpotent matrix (no metric compatibility)."""
    N = np.array([[0, 1], [0, 0]], dtype=complex)
    return Fiber("nilpotent", ["c"], np.zeros((1, 1, 1), dtype=complex), N[None], np.eye(2, dtype=complex), ["f1", "f2"])


def get_fiber(name, weights=None, rank=None):
    if isinstance(name, Fiber):
        return name
    if name == "abelian":
        return abelian_fiber((1.0,) if weights is None else weights)
    if name == "sl2":
        return sl2_fiber()
    if name in ("u", "un", "u(n)", "gl"):
        return gl_fiber(2 if rank is None else rank)
    if name.startswith("u") and name[1:].isdigit():
        return gl_fiber(int(name[1:]))
    if name == "nilpotent":
        return nilpotent_fiber()
    raise InvalidDirection(f"unknown coefficient algebra {name!r}")


# ---------------------------------------------------------------- tensor constructions

def _tensor_space(ext, k):
    dims = tuple(d * k for d in ext.dims)
    return GradedSpace(dims)


def _tensor_labels(ext, labels):
    return [f"{ext.label(I)}*{x}" for I in ext.basis for x in labels]


def tensor_gla(ext, fiber):
    """Lambda*(C^m) (x) g with [a(x)X, b(x)Y] = (a^b)(x)[X,Y]."""
    k = fiber.dim_g
    sp = _tensor_space(ext, k)
    N = sp.total_dim
    C = np.zeros((N, N, N), dtype=complex)
    if np.any(fiber.c):
        for a, I in enumerate(ext.basis):
            for b, J in enumerate(ext.basis):
                s, K = ext.wedge(I, J)
                if not s:
                    continue
                c = ext.index[K]
                C[c * k:(c + 1) * k, a * k:(a + 1) * k, b * k:(b + 1) * k] = s * fiber.c
    return GLA(sp, C)


def tensor_module(ext, fiber, algebra):
    """Lambda*(C^m) (x) F with rho(a(x)X)(b(x)f) = (a^b)(x)rho(X)f."""
    kg, kf = fiber.dim_g, fiber.dim_f
    sp = _tensor_space(ext, kf)
    N, Ng = sp.total_dim, algebra.space.total_dim
    rho = np.zeros((N, Ng, N), dtype=complex)
    for a, I in enumerate(ext.basis):
        for b, J in enumerate(ext.basis):
            s, K = ext.wedge(I, J)
            if not s:
                continue
            c = ext.index[K]
            for j in range(kg):
                rho[c * kf:(c + 1) * kf, a * kg + j, b * kf:(b + 1) * kf] = s * fiber.rho[j]
    return ModuleAction.from_representation(algebra, sp, None, rho)


def one_form(ext, fiber, terms):
    """sum over (i, X) of dx^i (x) X as an algebra element."""
    k = fiber.dim_g
    v = np.zeros(sum(ext.dims) * k, dtype=complex)
    for i, X in terms:
        if not 1 <= int(i) <= ext.m:
            raise InvalidDirection(f"form index {i} outside 1..{ext.m}")
        c = ext.index[(int(i),)]
        v[c * k:(c + 1) * k] += fiber.element(X)
    return v


def torus_metric(ext, fiber, g):
    """sqrt(det g) Lambda(g^{-1}) (x) fiber metric, per degree."""
    k = fiber.dim_f
    vol = math.sqrt(np.linalg.det(g))
    G = vol * np.kron(ext.gram(g), fiber.gram)
    sp = _tensor_space(ext, k)
    return HermitianMetric(sp, [G[sp.slice(p), sp.slice(p)] for p in range(len(sp.dims))])


def torus_pairing(ext, fiber):
    """P with int(a . b) = b^H P a: P[(J,b),(I,a)] = sign(dx^I ^ dx^J) <f_a, f_b>."""
    n = len(ext.basis)
    E = np.zeros((n, n))
    for a, I in enumerate(ext.basis):
        for b, J in enumerate(ext.basis):
            E[b, a] = ext.orientation_sign(I, J)
    return np.kron(E, fiber.gram)


# ---------------------------------------------------------------- problem spec

@dataclass
class ProblemSpec:
    name: str
    space: GradedSpace
    jet: OperatorJet
    metric: HermitianMetric
    ell: int = None
    star: StarStructure = None
    pairing: PairingStructure = None
    dgla: DGLA = None
    flat_series: FlatSeries = None
    module: ModuleAction = None
    labels: list = None
    algebra_labels: list = None
    tolerances: dict = field(default_factory=dict)
    seed: int = None
    meta: dict = field(default_factory=dict)

    @property
    def dims(self):
        return self.space.dims

    def label_index(self, label):
        if self.labels is None or label not in self.labels:
            raise KeyError(label)
        return self.labels.index(label)

    def basis_vector(self, label):
        v = np.zeros(self.space.total_dim, dtype=complex)
        v[self.label_index(label)] = 1
        return v

    def algebra_vector(self, label):
        sp = self.dgla.space
        v = np.zeros(sp.total_dim, dtype=complex)
        v[self.algebra_labels.index(label)] = 1
        return v

    def validate(self, tol=1e-9):
        """Run every applicable structural validator; list of (name, defect, passed, detail)."""
        out = []
        rep = validate_flat_jet(self.jet, self.tolerances.get("flat", 1e-10), raise_on_failure=False)
        rel = max(rep.relative + [0.0])
        out.append(("jet_flatness", rel, rep.accepted,
                    "" if rep.accepted else f"NotFlat({rep.first_failure})"))
        if self.dgla is not None:
            r = validate_dgla(self.dgla, raise_on_failure=False)
            worst = max(r.as_dict().items(), key=lambda kv: kv[1] if isinstance(kv[1], float) else -1)
            ok = r.max_defect <= 1e-10
            detail = ""
            if not ok:
                detail = f"{worst[0]} at basis {r.worst.get(worst[0])}"
            out.append(("dgla_axioms", r.max_defect, ok, detail))
            if self.flat_series is not None:
                fr = validate_flat_series(self.dgla, self.flat_series, raise_on_failure=False)
                bad = [n for n, x in enumerate(fr.residuals, start=1) if x > 1e-10]
                out.append(("flat_series", fr.max_residual, not bad, f"RecursionViolation({bad[0]})" if bad else ""))
                if self.module is not None:
                    mr = validate_module(self.module, raise_on_failure=False)
                    m = max(mr.values())
                    out.append(("module_axioms", m, m <= 1e-10, "" if m <= 1e-10 else max(mr, key=mr.get)))
                    ref = module_jet(self.module, self.flat_series, self.jet.order)
                else:
                    ref = series_jet(self.dgla, self.flat_series, self.jet.order)
                dj = max(float(np.linalg.norm(ref.coeff(i).matrix() - self.jet.coeff(i).matrix()))
                         for i in range(self.jet.order + 1))
                out.append(("jet_matches_series", dj, dj <= 1e-10, ""))
        if self.star is not None:
            sr = validate_star(self.star, self.metric, tol, raise_on_failure=False)
            m = max(sr.block_defect, sr.isometry_defect, sr.self_adjoint_defect, sr.involution_defect)
            out.append(("star", m, sr.passed, ""))
        if self.pairing is not None:
            pr = validate_pairing(self.pairing, self.metric, self.star, tol)
            m = max(v for k, v in pr.items() if k != "passed")
            out.append(("pairing", m, m <= tol, ""))
        return out

    # serialization ------------------------------------------------------
    def to_dict(self):
        return _spec_to_dict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    @classmethod
    def from_dict(cls, doc):
        return _spec_from_dict(doc)

    @classmethod
    def from_json(cls, text):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"not valid JSON: {exc}") from exc
        return cls.from_dict(doc)

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(fh.read())

    def digest(self):
        return hashlib.sha256(self.to_json().encode()).hexdigest()


def _spec_from_parts(name, ext, fiber, dgla, series, ma, metric, ell, order, meta, seed=None, tolerances=None):
    jet = module_jet(ma, series, order)
    P = torus_pairing(ext, fiber)
    pairing = PairingStructure(ma.space, ell, P)
    S = np.linalg.solve(P.conj().T, metric.gram())
    star = StarStructure(ma.space, ell, S)
    return ProblemSpec(name, ma.space, jet, metric, ell, star, pairing, dgla, series, ma,
                       _tensor_labels(ext, fiber.f_labels), _tensor_labels(ext, fiber.labels),
                       dict(tolerances or {}), seed, meta)


def build_torus_model(ell, coefficient_algebra="abelian", direction=None, order=3, weights=None, rank=None,
                      power=1, higher=None, base_metric=None, name=None):
    """Torus model on Lambda*(C^{2l-1}) (x) F.

    ``direction`` is a list of (form index, fiber element) pairs giving the
    coefficient of t^power; ``higher`` maps further powers to such lists.
    Remaining coefficients are solved from the flatness recursion, which
    with d = 0 demands sum_{i+j=k}[a_i, a_j] = 0.
    """
    if ell not in (1, 2, 3):
        raise InvalidDirection("ell must be 1, 2 or 3")
    m = 2 * ell - 1
    fiber = get_fiber(coefficient_algebra, weights, rank)
    if direction is None:
        direction = [(1, {"c": 1j})] if fiber.name in ("abelian", "nilpotent") else [(1, _default_direction(fiber))]
    ext = ExteriorAlgebra(m)
    L = DGLA(tensor_gla(ext, fiber))
    given = {power: direction}
    for k, terms in (higher or {}).items():
        given[int(k)] = terms
    order = max([order] + list(given))
    coeffs = [one_form(ext, fiber, given[k]) if k in given else None for k in range(1, order + 1)]
    try:
        series = extend_flat_series(L, coeffs, order)
    except RecursionViolation as exc:
        raise InvalidDirection(f"direction is not flat: {exc}") from exc
    ma = tensor_module(ext, fiber, L)
    g = np.eye(m) if base_metric is None else np.asarray(base_metric, dtype=float)
    metric = torus_metric(ext, fiber, g)
    meta = {
        "model": "torus",
        "coefficient_algebra": fiber.name,
        "form_dimension": m,
        "base_metric": g.tolist(),
        "fiber_gram": _cenc(fiber.gram),
        "star_from_metric": True,
    }
    name = name or f"torus-l{ell}-{fiber.name}"
    return _spec_from_parts(name, ext, fiber, L, series, ma, metric, ell, order, meta)


def _default_direction(fiber):
    if fiber.name == "sl2":
        return {"H": 1j}
    return {fiber.labels[0]: 1j}


def random_torus_model(seed, ell=2, max_power=2, order=3):
    """Line bundle model with random integer weights and a random real direction.

    The connection is i * (real 1-form) (x) diag(weights), hence unitary, and
    flat because the coefficient algebra is abelian.
    """
    rng = np.random.default_rng(seed)
    m = 2 * ell - 1
    rank = int(rng.integers(1, 3)) if ell < 3 else 1
    weights = [float(w) for w in rng.choice([-2, -1, 1, 2], size=rank)]
    power = int(rng.integers(1, max_power + 1))
    theta = rng.standard_normal(m)
    terms = [(i + 1, {"c": 1j * theta[i]}) for i in range(m)]
    higher = {}
    if power < order:
        theta2 = rng.standard_normal(m)
        higher[power + 1] = [(i + 1, {"c": 1j * theta2[i]}) for i in range(m)]
    A = rng.standard_normal((m, m)) * 0.3
    g = sla.expm(A + A.T)
    spec = build_torus_model(ell, abelian_fiber(weights), terms, order, power=power, higher=higher,
                             base_metric=g, name=f"random-torus-l{ell}-s{seed}")
    spec.seed = seed
    spec.meta["weights"] = weights
    return spec


# ---------------------------------------------------------------- small jets

def _jet_from_blocks(space, blocks_per_coeff):
    maps = [GradedMap(space, space, 1, b) for b in blocks_per_coeff]
    return OperatorJet(space, maps[0], maps[1:])


def shift_model(order=3):
    """C --t--> C: T_t has eigenvalues +-t."""
    sp = GradedSpace((1, 1))
    one = [np.ones((1, 1)), None]
    zero = [None, None]
    jet = _jet_from_blocks(sp, [zero, one] + [zero] * (order - 1))
    return ProblemSpec("shift", sp, jet, HermitianMetric.identity(sp), labels=["e0", "e1"],
                       meta={"model": "shift"})


def order2_shift_model(order=3):
    """C --t^2--> C: eigenvalues +-t^2."""
    sp = GradedSpace((1, 1))
    one = [np.ones((1, 1)), None]
    zero = [None, None]
    jet = _jet_from_blocks(sp, [zero, zero, one] + [zero] * (order - 2))
    return ProblemSpec("order2-shift", sp, jet, HermitianMetric.identity(sp), labels=["e0", "e1"],
                       meta={"model": "order2-shift"})


def constant_model(order=3):
    """d_t = d_0 an isomorphism C -> C on the circle grading; nothing vanishes."""
    sp = GradedSpace((1, 1))
    d0 = [np.ones((1, 1)), None]
    zero = [None, None]
    jet = _jet_from_blocks(sp, [d0] + [zero] * order)
    S = np.array([[0, 1], [1, 0]], dtype=complex)
    star = StarStructure(sp, 1, S)
    pairing = PairingStructure(sp, 1, S.copy())
    return ProblemSpec("constant", sp, jet, HermitianMetric.identity(sp), 1, star, pairing,
                       labels=["e0", "e1"], meta={"model": "constant"})


def build_random_flat_jet(dims, order, seed, mode="b", metric_magnitude=0.0, max_power=None):
    jet, metric, info = random_flat_jet(dims, order, seed, mode, metric_magnitude, max_power)
    meta = {"model": "random", "mode": mode}
    if mode == "c":
        meta["page_dims"] = {str(n): list(info["layout"].page_dims(n)) for n in range(1, order + 1)}
    labels = [f"e{p}_{k}" for p, d in enumerate(dims) for k in range(d)]
    return ProblemSpec(f"random-{mode}-s{seed}", jet.space, jet, metric, labels=labels, seed=seed, meta=meta)


def conjugation_model(seed=3, dims=(2, 3, 1), order=3):
    spec = build_random_flat_jet(dims, order, seed, mode="a")
    spec.name = "conjugation"
    return spec


# ---------------------------------------------------------------- DGLA fixtures

def _series_matrix_exp(Y, order):
    out = [np.eye(len(Y), dtype=complex)]
    for k in range(1, order + 1):
        out.append(out[-1] @ Y / k)
    return out


def _poly_mul(P, Q, order):
    out = [np.zeros_like(P[0]) for _ in range(order + 1)]
    for i, a in enumerate(P):
        for j, b in enumerate(Q):
            if i + j <= order:
                out[i + j] = out[i + j] + a @ b
    return out


def random_dgla_model(seed, m=2, n=3, order=4):
    """Lambda*(C^m) (x) gl(n) with d = ad(b_0) and a(t) = b(t) - b_0, where

        b(t) = sum_i dx^i (x) P e^{tY} D_i(t) e^{-tY} P^{-1}

    and D_i(t) are diagonal polynomials.  The B_i(t) commute, so b(t) is a
    Maurer-Cartan series.  Per-entry vanishing orders of D_i make the weight
    spaces jump at different pages.
    """
    rng = np.random.default_rng(seed)
    fiber = gl_fiber(n)
    ext = ExteriorAlgebra(m)
    gla = tensor_gla(ext, fiber)
    vanish = rng.integers(0, 4, size=n)
    P = np.eye(n) + 0.3 * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    Pinv = np.linalg.inv(P)
    Y = 0.4 * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    E = _series_matrix_exp(Y, order)
    Einv = _series_matrix_exp(-Y, order)
    bs = [np.zeros(gla.space.total_dim, dtype=complex) for _ in range(order + 1)]
    for i in range(1, m + 1):
        diag = np.zeros((order + 1, n), dtype=complex)
        for j in range(n):
            for k in range(vanish[j], order + 1):
                diag[k, j] = rng.standard_normal() + 1j * rng.standard_normal()
        Dpoly = [np.diag(diag[k]) for k in range(order + 1)]
        B = _poly_mul(_poly_mul(E, Dpoly, order), Einv, order)
        for k in range(order + 1):
            X = P @ B[k] @ Pinv
            bs[k] = bs[k] + one_form(ext, fiber, [(i, X.reshape(-1))])
    d = GradedMap.from_matrix(gla.space, gla.space, 1, gla.ad(bs[0]), tol=0.0)
    L = DGLA(gla, d)
    series = FlatSeries(bs[1:])
    jet = series_jet(L, series, order)
    labels = _tensor_labels(ext, fiber.labels)
    return ProblemSpec(f"random-dgla-s{seed}", gla.space, jet, HermitianMetric.identity(gla.space), None, None, None,
                       L, series, None, labels, labels, {}, seed,
                       {"model": "random-dgla", "vanishing_orders": [int(v) for v in vanish]})


def dgla_torus_model(ell=2, coefficient_algebra="sl2", direction=None, order=3):
    """The tensor DGLA itself as the problem (no separate module)."""
    spec = build_torus_model(ell, coefficient_algebra, direction, order)
    L, s = spec.dgla, spec.flat_series
    jet = series_jet(L, s, order)
    return ProblemSpec(f"dgla-{spec.name}", L.space, jet, HermitianMetric.identity(L.space), None, None, None,
                       L, s, None, spec.algebra_labels, spec.algebra_labels, {}, None,
                       {"model": "dgla-torus", "coefficient_algebra": spec.meta["coefficient_algebra"]})


def abelian_dgla_model(ell=2, order=3):
    """Lambda*(C^m) with zero bracket; a(t) = t dx^1 + t^2 dx^2."""
    terms2 = [(2, {"c": 1.0})] if ell > 1 else None
    spec = build_torus_model(ell, "abelian", [(1, {"c": 1.0})], order, higher={2: terms2} if terms2 else None)
    L = spec.dgla
    jet = series_jet(L, spec.flat_series, order)
    return ProblemSpec("abelian", L.space, jet, HermitianMetric.identity(L.space), None, None, None,
                       L, spec.flat_series, None, spec.algebra_labels, spec.algebra_labels, {}, None,
                       {"model": "abelian"})


def obstructed_model():
    """sl2 tensor DGLA with Massey inputs dx1*E, dx2*F, dx3*H: [E,F] = H is a nonzero class."""
    spec = dgla_torus_model(2, "sl2", order=1)
    spec.name = "obstructed"
    spec.meta["massey_inputs"] = ["dx1*E", "dx2*F", "dx3*H"]
    return spec


def corrupted_bracket_model():
    """sl2 tensor DGLA with one structure constant altered (antisymmetry kept)."""
    spec = dgla_torus_model(2, "sl2", order=1)
    C = spec.dgla.gla.C.copy()
    # [H, E] = 2E in degree 0: change the coefficient to 3, on both orderings
    h = spec.algebra_labels.index("1*H")
    e = spec.algebra_labels.index("1*E")
    C[e, h, e] = 3.0
    C[e, e, h] = -3.0
    spec.dgla = DGLA(GLA(spec.dgla.space, C), spec.dgla.d)
    spec.name = "corrupted-bracket"
    return spec


def nonflat_model():
    """A jet whose first coefficient does not anticommute with d0."""
    sp = GradedSpace((1, 1, 1))
    d0 = [np.ones((1, 1)), None, None]
    a1 = [None, np.ones((1, 1)), None]
    jet = _jet_from_blocks(sp, [d0, a1])
    return ProblemSpec("non-flat", sp, jet, HermitianMetric.identity(sp), labels=["e0", "e1", "e2"],
                       meta={"model": "non-flat"})


def line_module_model(order=3, power=1):
    """Weight-1 line module over the abelian torus DGLA at l = 2 (8-dimensional)."""
    return build_torus_model(2, "abelian", [(1, {"c": 1j})], order, power=power,
                             name="line-module" if power == 1 else f"line-module-p{power}")


def nilpotent_module_model(order=3):
    """Rank-2 module with nilpotent action: a(t) = t dx^1 + t^2 dx^2 (not a star model)."""
    spec = build_torus_model(2, "nilpotent", [(1, {"c": 1.0})], order, higher={2: [(2, {"c": 1.0})]},
                             name="nilpotent-module")
    spec.star = None
    spec.pairing = None
    spec.meta["star_from_metric"] = False
    return spec


# ---------------------------------------------------------------- metric perturbation

def _random_symmetric(rng, n, magnitude):
    A = rng.standard_normal((n, n))
    A = A + A.T
    nrm = np.linalg.norm(A, 2)
    return A * (magnitude / nrm) if nrm else A


def _random_hermitian(rng, n, magnitude):
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    A = A + A.conj().T
    nrm = np.linalg.norm(A, 2)
    return A * (magnitude / nrm) if nrm else A


def perturb_metric(spec, magnitude, seed):
    """New spec with the metric replaced by G^{1/2} exp(H) G^{1/2}, |H| = magnitude.

    Torus models perturb the flat base metric instead and re-derive the
    form metric and the star from it.
    """
    if not 0 <= magnitude < 1:
        raise ValueError("magnitude must lie in [0, 1)")
    out = copy.deepcopy(spec)
    if magnitude == 0:
        return out
    rng = np.random.default_rng(seed)
    if spec.meta.get("model") == "torus" and spec.meta.get("star_from_metric"):
        g = np.asarray(spec.meta["base_metric"], dtype=float)
        r = sla.sqrtm(g).real
        g2 = r @ sla.expm(_random_symmetric(rng, len(g), magnitude)) @ r
        g2 = 0.5 * (g2 + g2.T)
        ext = ExteriorAlgebra(spec.meta["form_dimension"])
        F = _cdec(spec.meta["fiber_gram"])
        fib = Fiber("", [], np.zeros((0, 0, 0)), np.zeros((0, len(F), len(F))), F, [None] * len(F))
        out.metric = torus_metric(ext, fib, g2)
        out.meta["base_metric"] = g2.tolist()
        if out.pairing is not None:
            S = np.linalg.solve(out.pairing.matrix.conj().T, out.metric.gram())
            out.star = StarStructure(out.space, out.ell, S)
        return out
    grams = []
    for G in spec.metric.grams:
        if not G.size:
            grams.append(G)
            continue
        r = sla.sqrtm(G)
        G2 = r @ sla.expm(_random_hermitian(rng, len(G), magnitude)) @ r
        grams.append(0.5 * (G2 + G2.conj().T))
    out.metric = HermitianMetric(spec.space, grams)
    if out.star is not None and out.pairing is not None:
        S = np.linalg.solve(out.pairing.matrix.conj().T, out.metric.gram())
        out.star = StarStructure(out.space, out.ell, S)
    return out


# ---------------------------------------------------------------- JSON codec

def _cenc(a):
    a = np.asarray(a, dtype=complex)
    if a.ndim == 0:
        # + 0.0 folds -0.0 into 0.0 so encode/decode/encode is a fixed point
        return [float(a.real) + 0.0, float(a.imag) + 0.0]
    return [_cenc(x) for x in a]


def _cdec(x, shape=None):
    try:
        arr = np.asarray(x, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"malformed complex array: {exc}") from exc
    if arr.size == 0:
        if shape is None:
            raise ParseError("empty array without a known shape")
        return np.zeros(shape, dtype=complex)
    if arr.shape[-1] != 2:
        raise ParseError("complex entries must be [re, im] pairs")
    out = arr[..., 0] + 1j * arr[..., 1]
    if shape is not None and out.shape != tuple(shape):
        raise ParseError(f"array has shape {out.shape}, expected {tuple(shape)}")
    return out


def _map_enc(m):
    return [_cenc(b) for b in m.blocks]


def _map_dec(space, shift, blocks, target=None):
    target = space if target is None else target
    if len(blocks) != len(space.dims):
        raise ParseError(f"expected {len(space.dims)} degree blocks, got {len(blocks)}")
    bl = [_cdec(b, (target.dim(p + shift), space.dim(p))) for p, b in enumerate(blocks)]
    return GradedMap(space, target, shift, bl)


def _antidiag_enc(space, M, ell):
    return [_cenc(M[space.slice(2 * ell - 1 - p), space.slice(p)]) for p in range(len(space.dims))]


def _antidiag_dec(space, blocks, ell):
    M = np.zeros((space.total_dim, space.total_dim), dtype=complex)
    if len(blocks) != len(space.dims):
        raise ParseError("star/pairing needs one block per degree")
    for p, b in enumerate(blocks):
        q = 2 * ell - 1 - p
        M[space.slice(q), space.slice(p)] = _cdec(b, (space.dim(q), space.dim(p)))
    return M


def _tensor_blocks_enc(blocks):
    return [{"degrees": [int(m), int(n)], "block": _cenc(b)} for (m, n), b in sorted(blocks.items())]


def _tensor_blocks_dec(items, out_space, left_space, right_space):
    out = {}
    for it in items:
        try:
            m, n = (int(x) for x in it["degrees"])
            shape = (out_space.dim(m + n), left_space.dim(m), right_space.dim(n))
            out[(m, n)] = _cdec(it["block"], shape)
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed structure block: {exc}") from exc
    return out


def _json_safe(x):
    if isinstance(x, dict):
        return {str(k): _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    return x


def _spec_to_dict(spec):
    doc = {
        "schema": SCHEMA,
        "name": spec.name,
        "seed": spec.seed,
        "ell": spec.ell,
        "dims": list(spec.space.dims),
        "labels": spec.labels,
        "jet": {"shift": spec.jet.shift,
                "coefficients": [_map_enc(spec.jet.coeff(i)) for i in range(spec.jet.order + 1)]},
        "metric": [_cenc(g) for g in spec.metric.grams],
        "star": None if spec.star is None else _antidiag_enc(spec.space, spec.star.matrix, spec.ell),
        "pairing": None if spec.pairing is None else _antidiag_enc(spec.space, spec.pairing.matrix, spec.ell),
        "dgla": None,
        "flat_series": None,
        "module": None,
        "tolerances": _json_safe(spec.tolerances),
        "meta": _json_safe(spec.meta),
    }
    if spec.dgla is not None:
        L = spec.dgla
        doc["dgla"] = {
            "dims": list(L.space.dims),
            "labels": spec.algebra_labels,
            "differential": _map_enc(L.d),
            "bracket": _tensor_blocks_enc(L.gla.structure_blocks()),
        }
    if spec.flat_series is not None:
        doc["flat_series"] = [_cenc(a) for a in spec.flat_series.coeffs]
    if spec.module is not None:
        doc["module"] = {
            "differential": _map_enc(spec.module.d),
            "action": _tensor_blocks_enc(spec.module.action_blocks()),
        }
    return doc


def _req(doc, key):
    if key not in doc:
        raise ParseError(f"missing field {key!r}")
    return doc[key]


def _spec_from_dict(doc):
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object")
    if doc.get("schema") != SCHEMA:
        raise ParseError(f"unsupported schema {doc.get('schema')!r}")
    try:
        dims = [int(d) for d in _req(doc, "dims")]
        space = GradedSpace(dims)
        jd = _req(doc, "jet")
        shift = int(jd.get("shift", 1))
        coeffs = [_map_dec(space, shift, c) for c in _req(jd, "coefficients")]
        if not coeffs:
            raise ParseError("jet needs at least d0")
        jet = OperatorJet(space, coeffs[0], coeffs[1:])
        grams = [_cdec(g, (d, d)) for g, d in zip(_req(doc, "metric"), dims)]
        if len(grams) != len(dims):
            raise ParseError("one metric block per degree expected")
        metric = HermitianMetric(space, grams)
        ell = doc.get("ell")
        star = pairing = None
        if doc.get("star") is not None:
            star = StarStructure(space, ell, _antidiag_dec(space, doc["star"], ell))
        if doc.get("pairing") is not None:
            pairing = PairingStructure(space, ell, _antidiag_dec(space, doc["pairing"], ell))
        dgla = series = module = None
        alabels = None
        if doc.get("dgla") is not None:
            dd = doc["dgla"]
            lsp = GradedSpace([int(d) for d in _req(dd, "dims")])
            blocks = _tensor_blocks_dec(_req(dd, "bracket"), lsp, lsp, lsp)
            gla = GLA.from_blocks(lsp, blocks)
            dgla = DGLA(gla, _map_dec(lsp, 1, _req(dd, "differential")))
            alabels = dd.get("labels")
        if doc.get("flat_series") is not None:
            if dgla is None:
                raise ParseError("flat_series needs a dgla")
            series = FlatSeries([_cdec(a, (dgla.space.total_dim,)) for a in doc["flat_series"]])
        if doc.get("module") is not None:
            if dgla is None:
                raise ParseError("module needs a dgla")
            md = doc["module"]
            blocks = _tensor_blocks_dec(_req(md, "action"), space, space, dgla.space)
            module = ModuleAction.from_blocks(dgla, space, _map_dec(space, 1, _req(md, "differential")), blocks)
    except MasseyFlowError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(str(exc)) from exc
    return ProblemSpec(doc.get("name", "unnamed"), space, jet, metric, ell, star, pairing, dgla, series, module,
                       doc.get("labels"), alabels, dict(doc.get("tolerances") or {}), doc.get("seed"),
                       dict(doc.get("meta") or {}))


# ---------------------------------------------------------------- shipped fixtures

def fixture_builders():
    return {
        "shift": shift_model,
        "order2-shift": order2_shift_model,
        "constant": constant_model,
        "torus": lambda: line_module_model(order=3),
        "torus-sl2": lambda: build_torus_model(2, "sl2", order=3),
        "circle": lambda: build_torus_model(1, "abelian", order=3),
        "torus-l3": lambda: build_torus_model(3, "abelian", order=3),
        "conjugation": conjugation_model,
        "abelian": abelian_dgla_model,
        "sl2": lambda: dgla_torus_model(2, "sl2", order=3),
        "obstructed": obstructed_model,
        "corrupted-bracket": corrupted_bracket_model,
        "non-flat": nonflat_model,
        "nilpotent-module": nilpotent_module_model,
        "random-dgla": lambda: random_dgla_model(4),
    }


def build_fixture(name):
    try:
        return fixture_builders()[name]()
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}") from None
