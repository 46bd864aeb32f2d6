"""Infinitesimal momentum maps ``g -> Omega^1(M)`` and their defining axioms."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import liealg
from .backends import SPHERE, Backend, make_backend
from .errors import DimensionError, MissingCobracketError
from .fields import OneForm, ScalarField, VectorField, hk_norm
from .liealg import LieAlgebra, LieBialgebra
from .poisson import (
    PoissonStructure,
    anchor,
    flow_operator,
    koszul_coef,
    poisson_bracket,
    scalar_flow_matrix,
)


def _structure(algebra) -> np.ndarray:
    return algebra.structure_constants


@dataclass(frozen=True, eq=False)
class MomentumMap1:
    """``forms[i]`` holds the coefficients of the 1-form assigned to ``e_i``."""

    algebra: LieAlgebra | LieBialgebra
    backend: Backend
    forms: np.ndarray
    conjugator: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        f = np.array(self.forms, dtype=float)
        if f.shape != (self.algebra.dim, self.backend.n1):
            raise DimensionError(
                f"forms must have shape {(self.algebra.dim, self.backend.n1)}, got {f.shape}"
            )
        f.setflags(write=False)
        object.__setattr__(self, "forms", f)

    @property
    def dim(self) -> int:
        return self.algebra.dim

    def form(self, i: int) -> OneForm:
        return OneForm(self.backend, self.forms[i])

    def with_forms(self, forms: np.ndarray) -> "MomentumMap1":
        return MomentumMap1(self.algebra, self.backend, forms)

    def to_dict(self) -> dict:
        b = self.backend
        return {
            "algebra": liealg.to_text(self.algebra),
            "backend": b.kind,
            "N": b.N,
            "padding": b.padding,
            "forms": [[float(x) for x in row] for row in self.forms],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MomentumMap1":
        b = make_backend(d["backend"], int(d["N"]), int(d.get("padding", 2)))
        return cls(liealg.from_text(d["algebra"]), b, np.array(d["forms"], dtype=float))

    def dumps(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def loads(cls, text: str) -> "MomentumMap1":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class ScalarMomentumMap:
    """Classical momentum map: one Hamiltonian per basis element."""

    algebra: LieAlgebra
    backend: Backend
    hamiltonians: np.ndarray
    conjugator: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        h = np.array(self.hamiltonians, dtype=float)
        if h.shape != (self.algebra.dim, self.backend.n0):
            raise DimensionError(
                f"hamiltonians must have shape {(self.algebra.dim, self.backend.n0)}, got {h.shape}"
            )
        h.setflags(write=False)
        object.__setattr__(self, "hamiltonians", h)

    @property
    def dim(self) -> int:
        return self.algebra.dim

    def hamiltonian(self, i: int) -> ScalarField:
        return ScalarField(self.backend, self.hamiltonians[i])

    def with_hamiltonians(self, h: np.ndarray) -> "ScalarMomentumMap":
        return ScalarMomentumMap(self.algebra, self.backend, h)


def from_hamiltonians(pi: PoissonStructure, S: ScalarMomentumMap) -> MomentumMap1:
    """``alpha_i = dH_i``."""
    return MomentumMap1(S.algebra, pi.backend, pi.backend.d0(S.hamiltonians))


def generation_defect(pi: PoissonStructure, M1: MomentumMap1, targets: list[VectorField]) -> float:
    if len(targets) != M1.dim:
        raise DimensionError(f"expected {M1.dim} target fields, got {len(targets)}")
    worst = 0.0
    for i, target in enumerate(targets):
        worst = max(worst, (anchor(pi, M1.form(i)) - target).l2_norm())
    return worst


def hom_residuals(pi: PoissonStructure, forms: np.ndarray, c: np.ndarray) -> np.ndarray:
    """``[a_i, a_j]_pi - sum_k c_ij^k a_k`` for ``i < j``, stacked by pair."""
    n = forms.shape[0]
    pairs = liealg.basis_pairs(n)
    if not pairs:
        return np.zeros((0, forms.shape[1]))
    I = [i for i, _ in pairs]
    J = [j for _, j in pairs]
    br = koszul_coef(pi, forms[I], forms[J])
    lin = np.stack([c[i, j] @ forms for i, j in pairs])
    return br - lin


def hom_defect(pi: PoissonStructure, M1: MomentumMap1) -> float:
    r = hom_residuals(pi, M1.forms, _structure(M1.algebra))
    return float(np.max(hk_norm(r, pi.backend.lam1, 0), initial=0.0))


def chain_residuals(M1: MomentumMap1) -> np.ndarray:
    """``d alpha_i - sum_{j<k} d[i,j,k] alpha_j ^ alpha_k`` as 2-form densities."""
    if not isinstance(M1.algebra, LieBialgebra):
        raise MissingCobracketError("chain defect needs an algebra with a cobracket")
    b = M1.backend
    d = M1.algebra.cobracket
    n = M1.dim
    vals = b.synth1(M1.forms)
    out = b.d1(M1.forms)
    for i in range(n):
        acc = np.zeros(b.n_grid)
        for j, k in liealg.basis_pairs(n):
            if d[i, j, k] != 0.0:
                acc = acc + d[i, j, k] * b.cross(vals[j], vals[k])
        out[i] = out[i] - b.analyze0(acc)
    return out


def chain_defect(M1: MomentumMap1) -> float:
    r = chain_residuals(M1)
    return float(np.max(hk_norm(r, M1.backend.lam0, 0), initial=0.0))


def equivariance_defect(pi: PoissonStructure, S: ScalarMomentumMap) -> float:
    """``{H_i, H_j} - sum_k c_ij^k H_k`` with its mean removed, worst pair."""
    c = _structure(S.algebra)
    worst = 0.0
    for i, j in liealg.basis_pairs(S.dim):
        r = poisson_bracket(pi, S.hamiltonian(i), S.hamiltonian(j)).coef - c[i, j] @ S.hamiltonians
        r = np.where(pi.backend.lam0 > 0, r, 0.0)
        worst = max(worst, float(hk_norm(r, pi.backend.lam0, 0)))
    return worst


def perturb(pi: PoissonStructure, M1: MomentumMap1, K: ScalarField, eps: float,
            steps: int | None = None) -> MomentumMap1:
    """Conjugate ``M1`` by the Poisson flow of the closed generator ``d(eps K)``.

    The flow operator is kept on the result as ``conjugator``.
    """
    gen = OneForm(pi.backend, pi.backend.d0(eps * K.coef))
    F = flow_operator(pi, gen, 1.0, steps)
    return MomentumMap1(M1.algebra, M1.backend, F.apply_coef(M1.forms), conjugator=F.matrix)


def perturb_scalar(pi: PoissonStructure, S: ScalarMomentumMap, K: ScalarField, eps: float,
                   steps: int | None = None) -> ScalarMomentumMap:
    """Pull the Hamiltonians back by the time-1 flow of ``pi#(d(eps K))``."""
    gen = OneForm(pi.backend, pi.backend.d0(eps * K.coef))
    P = scalar_flow_matrix(pi, gen, 1.0, steps)
    return ScalarMomentumMap(S.algebra, S.backend, S.hamiltonians @ P.T, conjugator=P)


# -- shipped scenarios ----------------------------------------------------------


def sphere_poisson(backend: Backend) -> PoissonStructure:
    """Round sphere with ``pi# (dx_i) = x cross e_i`` and ``{x_i, x_j} = eps_ijk x_k``."""
    if backend.kind != SPHERE:
        raise ValueError("sphere scenario needs the sphere backend")
    return PoissonStructure.constant(backend, 1.0)


def so3_sphere_hamiltonians(backend: Backend) -> ScalarMomentumMap:
    return ScalarMomentumMap(liealg.so3(), backend, backend.coordinate_functions())


def so3_sphere_momentum(backend: Backend) -> MomentumMap1:
    pi = sphere_poisson(backend)
    return from_hamiltonians(pi, so3_sphere_hamiltonians(backend))


def rotation_fields(backend: Backend) -> list[VectorField]:
    """Analytic fields ``x cross e_i`` generated by ``H_i = x_i``."""
    x = backend.normal
    eye = np.eye(3)
    return [VectorField(backend, np.cross(x, eye[i][None, :])) for i in range(3)]


def torus_translation_momentum(backend: Backend) -> MomentumMap1:
    """Abelian ``R^2`` acting on symplectic ``T^2`` through ``(dtheta1, dtheta2)``."""
    forms = np.zeros((2, backend.n1))
    forms[0, 0] = 1.0
    forms[1, backend.n0] = 1.0
    return MomentumMap1(liealg.abelian(2), backend, forms)


def torus_translation_fields(backend: Backend) -> list[VectorField]:
    """``pi#(dtheta1) = d/dtheta2`` and ``pi#(dtheta2) = -d/dtheta1`` for ``pi = d1 ^ d2``."""
    one = np.ones(backend.n_grid)
    zero = np.zeros(backend.n_grid)
    return [VectorField(backend, np.stack([zero, one], -1)), VectorField(backend, np.stack([-one, zero], -1))]


def random_scalar(backend: Backend, rng: np.random.Generator, min_degree: int = 1,
                  max_degree: int = 3) -> ScalarField:
    """Normal coefficients on modes with ``min_degree <= degree <= max_degree``,
    scaled to unit L2 norm."""
    mask = (backend.deg0 >= min_degree) & (backend.deg0 <= max_degree)
    c = np.where(mask, rng.standard_normal(backend.n0), 0.0)
    return ScalarField(backend, c / np.linalg.norm(c))
