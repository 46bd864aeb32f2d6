"""Finite-dimensional Lie algebras and Lie bialgebras.

Structure constants are stored densely as ``c[i, j, k]`` with
``[e_i, e_j] = sum_k c[i, j, k] e_k``.  A cobracket is stored as a full
array ``d[i, j, k]`` antisymmetric in ``(j, k)`` so that
``delta(e_i) = sum_{j<k} d[i, j, k] e_j ^ e_k``.  Bivectors are handled
as antisymmetric matrices ``B`` with ``B[j, k]`` the coefficient of
``e_j ^ e_k`` for ``j < k``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import DimensionError, NotSemisimpleError

MAX_DIM = 16


@dataclass(frozen=True)
class LieAlgebra:
    structure_constants: np.ndarray

    def __post_init__(self):
        c = np.array(self.structure_constants, dtype=float)
        if c.ndim != 3 or not (c.shape[0] == c.shape[1] == c.shape[2]):
            raise DimensionError(f"structure constants must be (n, n, n), got {c.shape}")
        if c.shape[0] < 1 or c.shape[0] > MAX_DIM:
            raise DimensionError(f"dimension must be in [1, {MAX_DIM}], got {c.shape[0]}")
        if not np.allclose(c, -c.transpose(1, 0, 2), atol=1e-14):
            raise ValueError("structure constants are not antisymmetric in (i, j)")
        c.setflags(write=False)
        object.__setattr__(self, "structure_constants", c)

    @property
    def dim(self) -> int:
        return self.structure_constants.shape[0]

    def ad(self, x) -> np.ndarray:
        """Matrix of ``ad_x`` acting on coefficient vectors (column convention)."""
        x = _as_vector(x, self.dim)
        # (ad_x)[k, j] = sum_i x_i c[i, j, k]
        return np.einsum("i,ijk->kj", x, self.structure_constants)


@dataclass(frozen=True)
class LieBialgebra:
    base: LieAlgebra
    cobracket: np.ndarray = field(default=None)

    def __post_init__(self):
        n = self.base.dim
        d = np.zeros((n, n, n)) if self.cobracket is None else np.array(self.cobracket, dtype=float)
        if d.shape != (n, n, n):
            raise DimensionError(f"cobracket must have shape {(n, n, n)}, got {d.shape}")
        if not np.allclose(d, -d.transpose(0, 2, 1), atol=1e-14):
            raise ValueError("cobracket is not antisymmetric in (j, k)")
        d.setflags(write=False)
        object.__setattr__(self, "cobracket", d)

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def structure_constants(self) -> np.ndarray:
        return self.base.structure_constants

    def delta(self, i: int) -> np.ndarray:
        """Antisymmetric matrix of ``delta(e_i)``."""
        return self.cobracket[i]


def _as_vector(x, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise DimensionError(f"expected a coefficient vector of length {n}, got shape {x.shape}")
    return x


def bracket(algebra: LieAlgebra, x, y) -> np.ndarray:
    """Return ``[x, y]`` for coefficient vectors ``x`` and ``y``."""
    x = _as_vector(x, algebra.dim)
    y = _as_vector(y, algebra.dim)
    return np.einsum("i,j,ijk->k", x, y, algebra.structure_constants)


def jacobi_defect(algebra: LieAlgebra) -> float:
    """Max-norm of the cyclic sum ``[[e_i,e_j],e_k] + cyclic`` over basis triples."""
    c = algebra.structure_constants
    # [[e_i,e_j],e_k]_m = sum_l c[i,j,l] c[l,k,m]
    t = np.einsum("ijl,lkm->ijkm", c, c)
    cyc = t + t.transpose(1, 2, 0, 3) + t.transpose(2, 0, 1, 3)
    return float(np.max(np.abs(cyc))) if cyc.size else 0.0


def ad_bivector(algebra: LieAlgebra, x, bivector: np.ndarray) -> np.ndarray:
    """Leibniz action of ``ad_x`` on a bivector stored as an antisymmetric matrix."""
    a = algebra.ad(x)
    return a @ bivector + bivector @ a.T


def cocycle_defect(bialgebra: LieBialgebra) -> float:
    """Max-norm of ``delta([e_i,e_j]) - ad_{e_i} delta(e_j) + ad_{e_j} delta(e_i)``."""
    n = bialgebra.dim
    alg = bialgebra.base
    c = alg.structure_constants
    d = bialgebra.cobracket
    eye = np.eye(n)
    worst = 0.0
    for i in range(n):
        for j in range(n):
            lhs = np.einsum("k,kab->ab", c[i, j], d)
            rhs = ad_bivector(alg, eye[i], d[j]) - ad_bivector(alg, eye[j], d[i])
            worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


def dual_bracket(bialgebra: LieBialgebra) -> LieAlgebra:
    """Lie algebra on the dual space with constants ``c*[i, j, k] = d[k, i, j]``."""
    return LieAlgebra(np.ascontiguousarray(bialgebra.cobracket.transpose(1, 2, 0)))


def coboundary_cobracket(algebra: LieAlgebra, r: np.ndarray) -> LieBialgebra:
    """Cobracket ``delta(x) = ad_x r`` for an antisymmetric matrix ``r``."""
    r = np.asarray(r, dtype=float)
    n = algebra.dim
    if r.shape != (n, n):
        raise DimensionError(f"r must be ({n}, {n}), got {r.shape}")
    if not np.allclose(r, -r.T):
        raise ValueError("r must be antisymmetric")
    eye = np.eye(n)
    d = np.stack([ad_bivector(algebra, eye[i], r) for i in range(n)])
    return LieBialgebra(algebra, d)


@dataclass(frozen=True)
class KillingData:
    killing: np.ndarray
    dual_basis: np.ndarray  # row a holds the coefficients of e^a
    semisimple: bool


def killing_form(algebra: LieAlgebra) -> np.ndarray:
    c = algebra.structure_constants
    return np.einsum("ikl,jlk->ij", c, c)


def casimir_data(algebra: LieAlgebra, threshold: float | None = None) -> KillingData:
    """Killing matrix and its dual basis; raises for non-semisimple algebras."""
    b = killing_form(algebra)
    if threshold is None:
        threshold = 1e-9 * algebra.dim
    if abs(np.linalg.det(b)) <= threshold:
        raise NotSemisimpleError("not semisimple: Killing form is degenerate")
    # B(e_a, e^b) = delta_a^b with e^b = sum_c D[b, c] e_c  =>  B D^T = I
    dual = np.linalg.solve(b, np.eye(algebra.dim)).T
    return KillingData(killing=b, dual_basis=dual, semisimple=True)


def so3() -> LieAlgebra:
    """so(3) with ``[e_i, e_j] = eps_ijk e_k``."""
    c = np.zeros((3, 3, 3))
    for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        c[i, j, k] = 1.0
        c[j, i, k] = -1.0
    return LieAlgebra(c)


def abelian(n: int) -> LieAlgebra:
    return LieAlgebra(np.zeros((n, n, n)))


# -- text serialization -------------------------------------------------------

_ENTRY = re.compile(r"^(c|delta)\[(\d+)\]\[(\d+)\]\[(\d+)\]\s*=\s*(\S+)$")


def to_text(algebra: LieAlgebra | LieBialgebra) -> str:
    if isinstance(algebra, LieBialgebra):
        base, d = algebra.base, algebra.cobracket
    else:
        base, d = algebra, None
    lines = [f"dim = {base.dim}"]
    for name, arr in (("c", base.structure_constants), ("delta", d)):
        if arr is None:
            continue
        for i, j, k in zip(*np.nonzero(arr)):
            lines.append(f"{name}[{i}][{j}][{k}] = {float(arr[i, j, k])!r}")
    return "\n".join(lines) + "\n"


def from_text(text: str) -> LieAlgebra | LieBialgebra:
    dim = None
    entries = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("dim"):
            key, _, value = line.partition("=")
            if key.strip() != "dim":
                raise ValueError(f"unrecognized line: {raw!r}")
            dim = int(value)
            continue
        m = _ENTRY.match(line)
        if m is None:
            raise ValueError(f"unrecognized line: {raw!r}")
        entries.append((m.group(1), int(m.group(2)), int(m.group(3)), int(m.group(4)), float(m.group(5))))
    if dim is None:
        raise ValueError("missing 'dim' key")
    c = np.zeros((dim, dim, dim))
    d = None
    for name, i, j, k, v in entries:
        if max(i, j, k) >= dim:
            raise DimensionError(f"index out of range for dim={dim}: {(i, j, k)}")
        if name == "c":
            c[i, j, k] = v
        else:
            if d is None:
                d = np.zeros((dim, dim, dim))
            d[i, j, k] = v
    alg = LieAlgebra(c)
    return alg if d is None else LieBialgebra(alg, d)


def basis_pairs(n: int) -> list[tuple[int, int]]:
    return list(combinations(range(n), 2))


def basis_triples(n: int) -> list[tuple[int, int, int]]:
    return list(combinations(range(n), 3))
