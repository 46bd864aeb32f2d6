"""Chevalley-Eilenberg complexes of a momentum map and their homotopy operators.

Cochains are coefficient arrays: a ``q``-cochain is an array of shape
``(C(dim, q), n)`` indexed by increasing index tuples (``itertools.combinations``
order), each row the coefficients of the value on ``e_i ^ e_j ^ ...``.

The representation on 1-forms is ``rho_X(b) = [alpha_X, b]_pi``; the scalar
variant uses ``rho_X(f) = {H_X, f}``.  Homotopies are Moore-Penrose
pseudo-inverses of the assembled differentials; a second construction via
the Casimir operator is available as a cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations, permutations

import numpy as np

from . import liealg
from .errors import HomotopyConditioningError
from .fields import hk_norm
from .liealg import casimir_data
from .momentum import MomentumMap1, ScalarMomentumMap
from .poisson import PoissonStructure, koszul_coef, koszul_matrix, scalar_derivation_matrix

PINV_RCOND = 1e-10


@dataclass
class Pseudoinverse:
    matrix: np.ndarray
    rank: int
    smallest_retained: float
    largest: float


def pseudo_inverse(A: np.ndarray, rcond: float = PINV_RCOND, name: str = "operator") -> Pseudoinverse:
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    largest = float(s[0]) if s.size else 0.0
    keep = s > rcond * largest if largest > 0 else np.zeros_like(s, dtype=bool)
    rank = int(np.count_nonzero(keep))
    if rank == 0:
        raise HomotopyConditioningError(f"{name}: pseudo-inverse has rank 0", 0.0)
    smallest = float(s[keep][-1])
    P = (Vt[:rank].T / s[:rank]) @ U[:, :rank].T
    return Pseudoinverse(P, rank, smallest, largest)


def _pair_index(n: int) -> dict:
    return {p: k for k, p in enumerate(combinations(range(n), 2))}


@dataclass(eq=False)
class ComplexContext:
    """Assembled differentials for ``C^q(g, V)`` with ``V`` truncated 1-forms or scalars."""

    pi: PoissonStructure
    structure_constants: np.ndarray
    rep: np.ndarray  # (dim, n, n): rho_{e_i}
    lam: np.ndarray  # Laplace eigenvalue per coefficient of V
    kind: str  # "oneform" or "scalar"
    model: object = None
    rcond: float = PINV_RCOND
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.D0 = _assemble_d0(self.rep)
        self.D1 = _assemble_d1(self.rep, self.structure_constants)
        self.D2 = _assemble_d2(self.rep, self.structure_constants)

    @property
    def dim(self) -> int:
        return self.structure_constants.shape[0]

    @property
    def n(self) -> int:
        return self.rep.shape[1]

    @property
    def algebra(self) -> liealg.LieAlgebra:
        return liealg.LieAlgebra(self.structure_constants)

    def _pinv(self, key: str) -> Pseudoinverse:
        if key not in self._cache:
            A = {"h0": self.D0, "h1": self.D1, "h2": self.D2}[key]
            if A.size == 0:
                self._cache[key] = Pseudoinverse(np.zeros(A.shape[::-1]), 0, 0.0, 0.0)
            else:
                self._cache[key] = pseudo_inverse(A, self.rcond, name=key)
        return self._cache[key]

    @property
    def H0(self) -> np.ndarray:
        return self._pinv("h0").matrix

    @property
    def H1(self) -> np.ndarray:
        return self._pinv("h1").matrix

    @property
    def H2(self) -> np.ndarray:
        return self._pinv("h2").matrix

    def pinv_info(self, key: str) -> Pseudoinverse:
        return self._pinv(key)

    def export(self, path) -> None:
        """Dump the assembled matrices as an ``.npz`` archive."""
        np.savez(path, D0=self.D0, D1=self.D1, D2=self.D2, rep=self.rep,
                 structure_constants=self.structure_constants, lam=self.lam)


def _assemble_d0(rep):
    dim, n, _ = rep.shape
    return rep.reshape(dim * n, n)


def _assemble_d1(rep, c):
    dim, n, _ = rep.shape
    pairs = list(combinations(range(dim), 2))
    D = np.zeros((len(pairs) * n, dim * n))
    eye = np.eye(n)
    for p, (i, j) in enumerate(pairs):
        rows = slice(p * n, (p + 1) * n)
        D[rows, j * n : (j + 1) * n] += rep[i]
        D[rows, i * n : (i + 1) * n] -= rep[j]
        for k in range(dim):
            if c[i, j, k] != 0.0:
                D[rows, k * n : (k + 1) * n] -= c[i, j, k] * eye
    return D


def _assemble_d2(rep, c):
    dim, n, _ = rep.shape
    pairs = _pair_index(dim)
    triples = list(combinations(range(dim), 3))
    D = np.zeros((len(triples) * n, len(pairs) * n))
    eye = np.eye(n)

    def add(rows, a, b, block):
        # add block acting on c(e_a, e_b)
        if a == b:
            return
        sign = 1.0
        if a > b:
            a, b, sign = b, a, -1.0
        col = pairs[(a, b)]
        D[rows, col * n : (col + 1) * n] += sign * block

    for t, (i, j, k) in enumerate(triples):
        rows = slice(t * n, (t + 1) * n)
        add(rows, j, k, rep[i])
        add(rows, i, k, -rep[j])
        add(rows, i, j, rep[k])
        for l in range(dim):
            if c[i, j, l] != 0.0:
                add(rows, l, k, -c[i, j, l] * eye)
            if c[i, k, l] != 0.0:
                add(rows, l, j, c[i, k, l] * eye)
            if c[j, k, l] != 0.0:
                add(rows, l, i, -c[j, k, l] * eye)
    return D


def build_context(pi: PoissonStructure, model: MomentumMap1, rcond: float = PINV_RCOND) -> ComplexContext:
    rep = np.stack([koszul_matrix(pi, model.forms[i]) for i in range(model.dim)])
    return ComplexContext(pi, np.array(model.algebra.structure_constants), rep, pi.backend.lam1,
                          "oneform", model, rcond)


def build_scalar_context(pi: PoissonStructure, model: ScalarMomentumMap,
                         rcond: float = PINV_RCOND) -> ComplexContext:
    b = pi.backend
    rep = np.stack([scalar_derivation_matrix(pi, b.d0(model.hamiltonians[i])) for i in range(model.dim)])
    return ComplexContext(pi, np.array(model.algebra.structure_constants), rep, b.lam0, "scalar", model, rcond)


# -- differentials on cochain arrays ---------------------------------------------


def rho(ctx: ComplexContext, X, b: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return np.einsum("i,ijk,k->j", X, ctx.rep, np.asarray(b, dtype=float))


def d0(ctx: ComplexContext, b: np.ndarray) -> np.ndarray:
    return (ctx.D0 @ np.asarray(b, dtype=float)).reshape(ctx.dim, ctx.n)


def d1(ctx: ComplexContext, g: np.ndarray) -> np.ndarray:
    return (ctx.D1 @ np.asarray(g, dtype=float).ravel()).reshape(-1, ctx.n)


def d2(ctx: ComplexContext, c: np.ndarray) -> np.ndarray:
    if ctx.dim < 3:
        return np.zeros((0, ctx.n))
    return (ctx.D2 @ np.asarray(c, dtype=float).ravel()).reshape(-1, ctx.n)


def h0(ctx: ComplexContext, g: np.ndarray) -> np.ndarray:
    return ctx.H0 @ np.asarray(g, dtype=float).ravel()


def h1(ctx: ComplexContext, c: np.ndarray) -> np.ndarray:
    return (ctx.H1 @ np.asarray(c, dtype=float).ravel()).reshape(ctx.dim, ctx.n)


def h2(ctx: ComplexContext, c3: np.ndarray) -> np.ndarray:
    return (ctx.H2 @ np.asarray(c3, dtype=float).ravel()).reshape(-1, ctx.n)


def cochain_norm(ctx: ComplexContext, g: np.ndarray, k: float = 0) -> float:
    """Root-sum-square of the ``H^k`` norms of the components."""
    g = np.asarray(g, dtype=float).reshape(-1, ctx.n)
    return float(np.sqrt(np.sum(hk_norm(g, ctx.lam, k) ** 2)))


def homotopy_residual(ctx: ComplexContext, g: np.ndarray) -> float:
    """Relative residual of ``d0 h0 + h1 d1 = id`` on the 1-cochain ``g``."""
    g = np.asarray(g, dtype=float).reshape(ctx.dim, ctx.n)
    nrm = np.linalg.norm(g)
    if nrm == 0.0:
        return 0.0
    r = d0(ctx, h0(ctx, g)) + h1(ctx, d1(ctx, g)) - g
    return float(np.linalg.norm(r) / nrm)


def homotopy_residual2(ctx: ComplexContext, c: np.ndarray) -> float:
    """Relative residual of ``d1 h1 + h2 d2 = id`` on the 2-cochain ``c``."""
    c = np.asarray(c, dtype=float)
    nrm = np.linalg.norm(c)
    if nrm == 0.0:
        return 0.0
    r = d1(ctx, h1(ctx, c)) + h2(ctx, d2(ctx, c)) - c
    return float(np.linalg.norm(r) / nrm)


def complex_residuals(ctx: ComplexContext) -> dict:
    """Relative spectral norms of ``D1 D0`` and ``D2 D1``."""
    out = {}
    n10 = np.linalg.norm(ctx.D1, 2) * np.linalg.norm(ctx.D0, 2)
    out["d1d0"] = float(np.linalg.norm(ctx.D1 @ ctx.D0, 2) / n10) if n10 > 0 else 0.0
    if ctx.dim >= 3:
        n21 = np.linalg.norm(ctx.D2, 2) * np.linalg.norm(ctx.D1, 2)
        out["d2d1"] = float(np.linalg.norm(ctx.D2 @ ctx.D1, 2) / n21) if n21 > 0 else 0.0
    else:
        out["d2d1"] = 0.0
    return out


# -- independent evaluation of the CE differential ------------------------------


def ce_differential_direct(apply_rho, c: np.ndarray, q: int, structure_constants: np.ndarray) -> np.ndarray:
    """Textbook CE differential of a ``q``-cochain via alternating sums.

    ``apply_rho(i, v)`` evaluates the representation of ``e_i`` on a vector.
    The cochain is expanded to a fully antisymmetric tensor first.
    """
    sc = np.asarray(structure_constants, dtype=float)
    dim = sc.shape[0]
    n = c.shape[-1]
    full = np.zeros((dim,) * q + (n,))
    for idx, tup in enumerate(combinations(range(dim), q)):
        for perm in permutations(range(q)):
            sign = _perm_sign(perm)
            full[tuple(tup[p] for p in perm)] = sign * c[idx]
    out = []
    for tup in combinations(range(dim), q + 1):
        acc = np.zeros(n)
        for i in range(q + 1):
            rest = tup[:i] + tup[i + 1 :]
            acc += (-1) ** i * apply_rho(tup[i], full[rest] if q else c[0])
        for i in range(q + 1):
            for j in range(i + 1, q + 1):
                rest = tuple(t for s, t in enumerate(tup) if s not in (i, j))
                br = sc[tup[i], tup[j]]
                val = np.zeros(n)
                for l in range(dim):
                    if br[l] != 0.0:
                        val += br[l] * full[(l,) + rest]
                acc += (-1) ** (i + j) * val
        out.append(acc)
    return np.array(out)


def _perm_sign(perm) -> int:
    sign = 1
    perm = list(perm)
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            sign = -sign
    return sign


def d2_direct(pi: PoissonStructure, model: MomentumMap1, c: np.ndarray) -> np.ndarray:
    """Degree-2 CE differential evaluated bracket-by-bracket (no assembled matrices)."""
    def apply_rho(i, v):
        return koszul_coef(pi, model.forms[i], v)

    return ce_differential_direct(apply_rho, np.asarray(c, dtype=float), 2, model.algebra.structure_constants)


# -- diagnostics --------------------------------------------------------------------


def _weights(ctx: ComplexContext, k: float, copies: int) -> np.ndarray:
    return np.tile((1.0 + ctx.lam) ** (k / 2.0), copies)


def homotopy_norm_constants(ctx: ComplexContext, ks=(0, 1, 2, 3), ss=(0, 1, 2, 3),
                            iterations: int = 200, seed: int = 0) -> dict:
    """Power-iteration estimates of ``C_k`` in ``|h0 g|_k <= C_k |g|_{k+s}``.

    Returns ``{"C": {s: {k: C}}, "fitted_s": s}`` where the fitted ``s`` is the
    smallest loss whose constants grow least from ``k = min(ks)`` to ``max(ks)``.
    """
    H = ctx.H0
    rng = np.random.default_rng(seed)
    start = rng.standard_normal(H.shape[1])
    table = {}
    for s in ss:
        table[s] = {}
        for k in ks:
            A = (_weights(ctx, k, 1)[:, None] * H) / _weights(ctx, k + s, ctx.dim)[None, :]
            v = start / np.linalg.norm(start)
            sigma = 0.0
            for _ in range(iterations):
                w = A.T @ (A @ v)
                nw = np.linalg.norm(w)
                if nw == 0.0:
                    break
                v = w / nw
                sigma = float(np.sqrt(nw))
            table[s][k] = sigma
    kmin, kmax = min(ks), max(ks)
    growth = {s: np.log(max(table[s][kmax], 1e-300) / max(table[s][kmin], 1e-300)) for s in ss}
    best = min(ss, key=lambda s: (round(growth[s], 9), s))
    return {"C": table, "fitted_s": int(best), "growth": {s: float(g) for s, g in growth.items()}}


def casimir_homotopy_check(ctx: ComplexContext, samples: int = 50, seed: int = 0,
                           null_tol: float = 1e-8) -> dict:
    """Compare the pseudo-inverse homotopy with the Casimir construction.

    With ``Omega = sum_a theta(e_a) theta(e^a)`` on cochains and
    ``K = sum_a i(e_a) theta(e^a)``, the maps ``Omega^+ K`` form a homotopy on
    the complement of the invariant cochains.  Raises
    :class:`~poisson_rigidity.errors.NotSemisimpleError` for non-semisimple algebras.
    """
    kd = casimir_data(ctx.algebra)
    c = ctx.structure_constants
    dim, n = ctx.dim, ctx.n
    Dual = kd.dual_basis
    eye = np.eye(n)
    pairs = _pair_index(dim)
    npairs = len(pairs)

    theta1 = []
    for a in range(dim):
        T = np.zeros((dim * n, dim * n))
        for b in range(dim):
            T[b * n : (b + 1) * n, b * n : (b + 1) * n] += ctx.rep[a]
            for l in range(dim):
                if c[a, b, l] != 0.0:
                    T[b * n : (b + 1) * n, l * n : (l + 1) * n] -= c[a, b, l] * eye
        theta1.append(T)

    def pair_block(M, row_pair, x, y, block):
        if x == y:
            return
        sign = 1.0
        if x > y:
            x, y, sign = y, x, -1.0
        col = pairs[(x, y)]
        M[row_pair * n : (row_pair + 1) * n, col * n : (col + 1) * n] += sign * block

    theta2 = []
    for a in range(dim):
        T = np.zeros((npairs * n, npairs * n))
        for (y, z), pidx in pairs.items():
            pair_block(T, pidx, y, z, ctx.rep[a])
            for l in range(dim):
                if c[a, y, l] != 0.0:
                    pair_block(T, pidx, l, z, -c[a, y, l] * eye)
                if c[a, z, l] != 0.0:
                    pair_block(T, pidx, y, l, -c[a, z, l] * eye)
        theta2.append(T)

    def dual(ops, a):
        return sum(Dual[a, b] * ops[b] for b in range(dim))

    rep = list(ctx.rep)
    Omega0 = sum(rep[a] @ dual(rep, a) for a in range(dim))
    Omega1 = sum(theta1[a] @ dual(theta1, a) for a in range(dim))

    # K0 g = sum_a rho(e_a) g(e^a)
    K0 = np.zeros((n, dim * n))
    for a in range(dim):
        for b in range(dim):
            K0[:, b * n : (b + 1) * n] += Dual[a, b] * rep[a]
    # (K1 c)(e_m) = sum_a (theta(e^a) c)(e_a, e_m)
    K1 = np.zeros((dim * n, npairs * n))
    for a in range(dim):
        Ta = dual(theta2, a)
        for m in range(dim):
            if a == m:
                continue
            x, y, sign = (a, m, 1.0) if a < m else (m, a, -1.0)
            pidx = pairs[(x, y)]
            K1[m * n : (m + 1) * n, :] += sign * Ta[pidx * n : (pidx + 1) * n, :]

    O0p = np.linalg.pinv(Omega0, rcond=ctx.rcond)
    O1p = np.linalg.pinv(Omega1, rcond=ctx.rcond)
    Ht0 = O0p @ K0
    Ht1 = O1p @ K1

    # invariant 1-cochains: null space of Omega1
    u, s, vt = np.linalg.svd(Omega1)
    null = vt[s <= null_tol * s[0]].T if s.size else np.zeros((dim * n, 0))
    P_noninv = np.eye(dim * n) - null @ null.T

    S_pinv = ctx.D0 @ ctx.H0 + ctx.H1 @ ctx.D1
    S_cas = ctx.D0 @ Ht0 + Ht1 @ ctx.D1

    rng = np.random.default_rng(seed)
    worst_cas = worst_agree = worst_h0 = 0.0
    for _ in range(samples):
        g = P_noninv @ rng.standard_normal(dim * n)
        ng = np.linalg.norm(g)
        worst_cas = max(worst_cas, np.linalg.norm(S_cas @ g - g) / ng)
        worst_agree = max(worst_agree, np.linalg.norm(S_cas @ g - S_pinv @ g) / ng)
        worst_h0 = max(worst_h0, np.linalg.norm(Ht0 @ g - ctx.H0 @ g) / ng)

    # invariant cocycles: invariant cochains annihilated by d1
    inv_cocycle_dim = 0
    inv_cocycle_residual = 0.0
    if null.shape[1]:
        img = ctx.D1 @ null
        sv = np.linalg.svd(img, compute_uv=False)
        scale = max(np.linalg.norm(ctx.D1, 2), 1.0)
        inv_cocycle_dim = int(np.count_nonzero(sv <= 1e-8 * scale)) + max(0, null.shape[1] - sv.size)
        inv_cocycle_residual = float(sv.min() / scale) if sv.size else 0.0

    return {
        "casimir_identity_residual": float(worst_cas),
        "agreement_with_pinv": float(worst_agree),
        "h0_agreement": float(worst_h0),
        "invariant_cochain_dim": int(null.shape[1]),
        "invariant_cocycle_dim": inv_cocycle_dim,
        "min_invariant_coboundary_sv": inv_cocycle_residual,
        "omega0_min_eig": float(np.min(np.abs(np.linalg.eigvals(Omega0)))),
        "identity_full_residual": float(np.linalg.norm(S_cas @ P_noninv - P_noninv, 2)),
        "killing": kd.killing.tolist(),
    }
