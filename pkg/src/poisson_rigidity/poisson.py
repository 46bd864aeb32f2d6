"""Poisson structures on a backend, the Koszul bracket and Poisson flows.

On a surface every bivector is Poisson.  With ``pi = p * vol^{-1}`` the
anchor is ``pi#(a) = p J a`` (``J`` the quarter turn), so that on the torus
``pi#(dtheta1) = d/dtheta2`` for ``p = 1``.  The Koszul bracket then reduces
to the pointwise formula

    [a, b]_pi = p (da) b - p (db) a + d(p a^b)

where ``da``, ``db`` and ``a^b`` denote densities.  :func:`koszul_bracket_cartan`
evaluates the general Lie-derivative formula instead and serves as an
independent route.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .backends import Backend
from .errors import BackendMismatchError, FlowDivergenceError
from .fields import (
    OneForm,
    ScalarField,
    TwoForm,
    VectorField,
    d_scalar,
    lie_derivative,
)

DEFAULT_STEPS_PER_UNIT = 64
_CHUNK = 256


@dataclass(frozen=True, eq=False)
class PoissonStructure:
    density: ScalarField

    @property
    def backend(self) -> Backend:
        return self.density.backend

    def __post_init__(self):
        object.__setattr__(self, "_p", self.density.values())

    @property
    def p_grid(self) -> np.ndarray:
        return self._p

    @classmethod
    def constant(cls, backend: Backend, value: float = 1.0):
        return cls(ScalarField.constant(backend, value))


def _same(pi: PoissonStructure, *objs):
    for o in objs:
        if o.backend is not pi.backend:
            raise BackendMismatchError(f"backend mismatch: {pi.backend!r} vs {o.backend!r}")


def anchor_pointwise(backend: Backend, p_values: np.ndarray, covector: np.ndarray) -> np.ndarray:
    """``pi#(w)`` at grid points given pointwise density and covector components."""
    return np.asarray(p_values)[..., None] * backend.rot(np.asarray(covector))


def anchor(pi: PoissonStructure, w: OneForm) -> VectorField:
    _same(pi, w)
    return VectorField(pi.backend, anchor_pointwise(pi.backend, pi.p_grid, w.values()), False)


def poisson_bracket(pi: PoissonStructure, F: ScalarField, G: ScalarField) -> ScalarField:
    """``{F, G} = pi(dF, dG)``."""
    _same(pi, F, G)
    b = pi.backend
    dF = b.synth1(b.d0(F.coef))
    dG = b.synth1(b.d0(G.coef))
    return ScalarField(b, b.analyze0(pi.p_grid * b.cross(dF, dG)))


def pi_pairing(pi: PoissonStructure, a: OneForm, c: OneForm) -> ScalarField:
    """``pi(a, c)``."""
    _same(pi, a, c)
    b = pi.backend
    return ScalarField(b, b.analyze0(pi.p_grid * b.cross(a.values(), c.values())))


def koszul_coef(pi: PoissonStructure, a: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Koszul bracket on coefficient arrays (broadcasting over leading axes)."""
    b = pi.backend
    p = pi.p_grid
    A = b.synth1(a)
    C = b.synth1(c)
    da = b.synth0(b.d1(a))
    dc = b.synth0(b.d1(c))
    pointwise = p[:, None] * (da[..., None] * C - dc[..., None] * A)
    scalar = b.analyze0(p * b.cross(A, C))
    return b.analyze1(pointwise) + b.d0(scalar)


def koszul_bracket(pi: PoissonStructure, a: OneForm, c: OneForm) -> OneForm:
    _same(pi, a, c)
    return OneForm(pi.backend, koszul_coef(pi, a.coef, c.coef))


def koszul_bracket_cartan(pi: PoissonStructure, a: OneForm, c: OneForm) -> OneForm:
    """``L_{pi#a} c - L_{pi#c} a - d(pi(a, c))`` assembled from Cartan calculus."""
    return lie_derivative(anchor(pi, a), c) - lie_derivative(anchor(pi, c), a) - d_scalar(pi_pairing(pi, a, c))


def koszul_twoform_coef(pi: PoissonStructure, a: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Leibniz extension of ``[a, .]_pi`` to 2-form densities:
    ``L_{pi#a} w + 2 p (da) w``."""
    b = pi.backend
    p = pi.p_grid
    A = b.synth1(a)
    da = b.synth0(b.d1(a))
    r = b.synth0(rho)
    lie = b.d1(b.analyze1(-(p * r)[..., None] * A))
    return lie + b.analyze0(2.0 * p * da * r)


def scalar_derivation_coef(pi: PoissonStructure, a: np.ndarray, f: np.ndarray) -> np.ndarray:
    """``(pi# a)(f) = pi(a, df)`` on coefficient arrays."""
    b = pi.backend
    return b.analyze0(pi.p_grid * b.cross(b.synth1(a), b.synth1(b.d0(f))))


def _assemble(fn, n: int) -> np.ndarray:
    eye = np.eye(n)
    cols = [fn(eye[i : i + _CHUNK]) for i in range(0, n, _CHUNK)]
    return np.concatenate(cols, axis=0).T


def koszul_matrix(pi: PoissonStructure, a: np.ndarray) -> np.ndarray:
    """Dense matrix of ``c -> [a, c]_pi`` on truncated 1-form coefficients."""
    a = np.asarray(a, dtype=float)
    return _assemble(lambda E: koszul_coef(pi, a, E), pi.backend.n1)


def twoform_matrix(pi: PoissonStructure, a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return _assemble(lambda E: koszul_twoform_coef(pi, a, E), pi.backend.n0)


def scalar_derivation_matrix(pi: PoissonStructure, a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return _assemble(lambda E: scalar_derivation_coef(pi, a, E), pi.backend.n0)


# -- flows -------------------------------------------------------------------------


def default_steps(t: float, steps_per_unit: int = DEFAULT_STEPS_PER_UNIT) -> int:
    return max(1, math.ceil(steps_per_unit * abs(t)))


def rk4_step_matrix(A: np.ndarray, h: float) -> np.ndarray:
    """One classical RK4 step for ``y' = A y`` as a matrix polynomial."""
    n = A.shape[0]
    hA = h * A
    hA2 = hA @ hA
    return np.eye(n) + hA + hA2 / 2.0 + (hA2 @ hA) / 6.0 + (hA2 @ hA2) / 24.0


def matrix_power(S: np.ndarray, k: int) -> np.ndarray:
    result = None
    base = S
    while k > 0:
        if k & 1:
            result = base if result is None else result @ base
        k >>= 1
        if k:
            base = base @ base
    return np.eye(S.shape[0]) if result is None else result


def rk4_propagator(A: np.ndarray, t: float, steps: int) -> np.ndarray:
    P = matrix_power(rk4_step_matrix(A, t / steps), steps)
    if not np.all(np.isfinite(P)):
        raise FlowDivergenceError("non-finite entries in flow propagator")
    return P


@dataclass(frozen=True, eq=False)
class FlowOperator:
    """Time-``t`` Poisson flow of ``generator`` on truncated 1-form coefficients."""

    generator: OneForm | None
    t: float
    matrix: np.ndarray
    steps: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def backend(self) -> Backend:
        return self.generator.backend

    def apply(self, w: OneForm) -> OneForm:
        return OneForm(w.backend, self.matrix @ w.coef)

    def apply_coef(self, c: np.ndarray) -> np.ndarray:
        return np.asarray(c) @ self.matrix.T

    def compose(self, other: "FlowOperator") -> "FlowOperator":
        """``self o other``."""
        return FlowOperator(None, self.t + other.t, self.matrix @ other.matrix, 0)

    def to_bytes(self) -> bytes:
        m = np.ascontiguousarray(self.matrix, dtype="<f8")
        header = f"FLOWOP {m.shape[0]} {m.shape[1]}\n".encode("ascii")
        return header + m.tobytes(order="C")

    @staticmethod
    def matrix_from_bytes(data: bytes) -> np.ndarray:
        header, _, body = data.partition(b"\n")
        tag, rows, cols = header.decode("ascii").split()
        if tag != "FLOWOP":
            raise ValueError("not a flow operator blob")
        rows, cols = int(rows), int(cols)
        if len(body) != 8 * rows * cols:
            raise ValueError("truncated flow operator blob")
        return np.frombuffer(body, dtype="<f8").reshape(rows, cols).copy()


def flow_oneform(pi: PoissonStructure, a: OneForm, b0: OneForm, t: float, steps: int | None = None) -> OneForm:
    """Integrate ``db/dt = [a, b]_pi`` by fixed-step RK4 in coefficient space."""
    _same(pi, a, b0)
    steps = default_steps(t) if steps is None else int(steps)
    if steps < 1:
        raise ValueError("steps must be positive")
    h = t / steps
    y = b0.coef.copy()
    ac = a.coef
    for _ in range(steps):
        k1 = koszul_coef(pi, ac, y)
        k2 = koszul_coef(pi, ac, y + 0.5 * h * k1)
        k3 = koszul_coef(pi, ac, y + 0.5 * h * k2)
        k4 = koszul_coef(pi, ac, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise FlowDivergenceError("non-finite values while integrating the Poisson flow")
    return OneForm(pi.backend, y)


def flow_operator(pi: PoissonStructure, a: OneForm, t: float, steps: int | None = None) -> FlowOperator:
    _same(pi, a)
    steps = default_steps(t) if steps is None else int(steps)
    A = koszul_matrix(pi, a.coef)
    return FlowOperator(a, float(t), rk4_propagator(A, t, steps), steps)


def flow_tolerance(A: np.ndarray, t: float, steps: int, P: np.ndarray | None = None) -> float:
    """Richardson estimate of the RK4 global error of ``P = flow(A, t, steps)``."""
    if P is None:
        P = rk4_propagator(A, t, steps)
    coarse = rk4_propagator(A, t, max(1, steps // 2))
    return float(np.max(np.abs(P - coarse)) / 15.0)


def twoform_flow_matrix(pi: PoissonStructure, a: OneForm, t: float, steps: int | None = None) -> np.ndarray:
    """Flow of the Leibniz-extended bracket on 2-form densities."""
    steps = default_steps(t) if steps is None else int(steps)
    return rk4_propagator(twoform_matrix(pi, a.coef), t, steps)


def scalar_flow_matrix(pi: PoissonStructure, a: OneForm, t: float, steps: int | None = None) -> np.ndarray:
    """Flow of ``f' = (pi# a)(f)``; the pullback by the flow of ``pi# a``."""
    steps = default_steps(t) if steps is None else int(steps)
    return rk4_propagator(scalar_derivation_matrix(pi, a.coef), t, steps)


def d_matrix(backend: Backend) -> np.ndarray:
    """Exterior derivative on scalars as a dense matrix."""
    return backend.d0(np.eye(backend.n0)).T


def d_commutation_defect(pi: PoissonStructure, a: OneForm, t: float, flow: np.ndarray | None = None,
                         steps: int | None = None) -> float:
    """Relative spectral norm of ``d o Psi_t - Phi_t o d`` (zero for closed ``a``)."""
    b = pi.backend
    D = d_matrix(b)
    Phi = flow_operator(pi, a, t, steps).matrix if flow is None else flow
    Psi = scalar_flow_matrix(pi, a, t, steps)
    diff = D @ Psi - Phi @ D
    return float(np.linalg.norm(diff, 2) / np.linalg.norm(D, 2))
