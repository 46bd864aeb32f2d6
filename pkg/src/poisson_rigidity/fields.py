"""Spectral fields on a backend and the Cartan calculus acting on them.

Products are evaluated pointwise on the backend's dealiasing grid and then
projected back to the truncation, so every operation returns the exact
truncation of the exact result for band-limited inputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .backends import SPHERE, TORUS, Backend, make_backend
from .errors import BackendMismatchError


def _check_same(*objs) -> Backend:
    b = objs[0].backend
    for o in objs[1:]:
        if o.backend is not b:
            raise BackendMismatchError(f"backend mismatch: {b!r} vs {o.backend!r}")
    return b


class _Spectral:
    """Linear-space arithmetic shared by coefficient-backed fields."""

    backend: Backend
    coef: np.ndarray

    def __post_init__(self):
        c = np.array(self.coef, dtype=float)
        if c.shape != (self._size(self.backend),):
            raise ValueError(
                f"{type(self).__name__} on {self.backend!r} needs {self._size(self.backend)} "
                f"coefficients, got shape {c.shape}"
            )
        c.setflags(write=False)
        object.__setattr__(self, "coef", c)

    @staticmethod
    def _size(backend):
        raise NotImplementedError

    def _new(self, coef):
        return type(self)(self.backend, coef)

    def __add__(self, other):
        if not isinstance(other, type(self)):
            return NotImplemented
        _check_same(self, other)
        return self._new(self.coef + other.coef)

    def __sub__(self, other):
        if not isinstance(other, type(self)):
            return NotImplemented
        _check_same(self, other)
        return self._new(self.coef - other.coef)

    def __neg__(self):
        return self._new(-self.coef)

    def __mul__(self, s):
        if isinstance(s, (int, float, np.floating, np.integer)):
            return self._new(float(s) * self.coef)
        return NotImplemented

    __rmul__ = __mul__

    @classmethod
    def zeros(cls, backend):
        return cls(backend, np.zeros(cls._size(backend)))


@dataclass(frozen=True, eq=False)
class ScalarField(_Spectral):
    backend: Backend
    coef: np.ndarray

    @staticmethod
    def _size(backend):
        return backend.n0

    def values(self) -> np.ndarray:
        return self.backend.synth0(self.coef)

    @classmethod
    def from_values(cls, backend, values):
        return cls(backend, backend.analyze0(values))

    @classmethod
    def constant(cls, backend, value=1.0):
        c = np.zeros(backend.n0)
        c[0] = value
        return cls(backend, c)

    @classmethod
    def from_function(cls, backend, fn):
        """Project a callable of the grid coordinates.

        Torus callables take ``(theta1, theta2)``; sphere callables take
        Cartesian ``(x, y, z)``.
        """
        return cls(backend, backend.scalar_from_function(fn))


@dataclass(frozen=True, eq=False)
class TwoForm(_Spectral):
    """Density relative to the backend's reference area form."""

    backend: Backend
    coef: np.ndarray

    @staticmethod
    def _size(backend):
        return backend.n0

    def density(self) -> ScalarField:
        return ScalarField(self.backend, self.coef)

    def values(self):
        return self.backend.synth0(self.coef)


@dataclass(frozen=True, eq=False)
class OneForm(_Spectral):
    backend: Backend
    coef: np.ndarray

    @staticmethod
    def _size(backend):
        return backend.n1

    def values(self) -> np.ndarray:
        """Pointwise ambient components, shape ``(n_grid, ambient_dim)``."""
        return self.backend.synth1(self.coef)

    @classmethod
    def from_values(cls, backend, values):
        return cls(backend, backend.analyze1(values))

    def components(self) -> tuple[ScalarField, ScalarField]:
        """``(f, g)`` with ``f dtheta1 + g dtheta2`` on the torus; Hodge potentials
        ``(F, G)`` with ``dF + *dG`` on the sphere."""
        b = self.backend
        if b.kind == TORUS:
            return ScalarField(b, self.coef[: b.n0]), ScalarField(b, self.coef[b.n0 :])
        F, G = b.hodge_potentials(self.coef)
        return ScalarField(b, F), ScalarField(b, G)

    @classmethod
    def from_components(cls, first: ScalarField, second: ScalarField):
        b = _check_same(first, second)
        if b.kind == TORUS:
            return cls(b, np.concatenate([first.coef, second.coef]))
        return cls(b, b.from_potentials(first.coef, second.coef))


@dataclass(frozen=True, eq=False)
class VectorField:
    """Tangent vector field sampled on the backend grid (ambient components)."""

    backend: Backend
    values: np.ndarray
    check_tangent: bool = True

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        b = self.backend
        if v.shape != (b.n_grid, b.ambient_dim):
            raise ValueError(f"vector field needs shape {(b.n_grid, b.ambient_dim)}, got {v.shape}")
        if b.kind == SPHERE and self.check_tangent:
            radial = np.max(np.abs(np.sum(v * b.normal, axis=-1)), initial=0.0)
            if radial > 1e-10 * max(1.0, np.max(np.abs(v), initial=0.0)):
                raise ValueError(f"vector field is not tangent to the sphere (radial part {radial:.3e})")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __add__(self, other):
        _check_same(self, other)
        return VectorField(self.backend, self.values + other.values, False)

    def __sub__(self, other):
        _check_same(self, other)
        return VectorField(self.backend, self.values - other.values, False)

    def __mul__(self, s):
        return VectorField(self.backend, float(s) * self.values, False)

    __rmul__ = __mul__

    def component_fields(self) -> list[ScalarField]:
        """Ambient components as truncated scalar fields."""
        b = self.backend
        return [ScalarField.from_values(b, self.values[:, i]) for i in range(b.ambient_dim)]

    def l2_norm(self) -> float:
        b = self.backend
        return float(np.sqrt(np.sum(b.weights * np.sum(self.values**2, axis=-1))))


# -- exterior calculus ---------------------------------------------------------


def d_scalar(F: ScalarField) -> OneForm:
    return OneForm(F.backend, F.backend.d0(F.coef))


def d_oneform(w: OneForm) -> TwoForm:
    return TwoForm(w.backend, w.backend.d1(w.coef))


def wedge11(a: OneForm, b: OneForm) -> TwoForm:
    bk = _check_same(a, b)
    return TwoForm(bk, bk.analyze0(bk.cross(a.values(), b.values())))


def contract(X: VectorField, w):
    """Interior product: 1-form -> scalar, 2-form -> 1-form."""
    bk = _check_same(X, w)
    if isinstance(w, OneForm):
        return ScalarField(bk, bk.analyze0(bk.dot(X.values, w.values())))
    if isinstance(w, TwoForm):
        rho = w.values()
        return OneForm(bk, bk.analyze1(rho[:, None] * bk.rot(X.values)))
    raise TypeError(f"cannot contract a vector field with {type(w).__name__}")


def lie_derivative(X: VectorField, w: OneForm) -> OneForm:
    """``L_X w = i_X dw + d i_X w``."""
    return contract(X, d_oneform(w)) + d_scalar(contract(X, w))


def apply_vector(X: VectorField, F: ScalarField) -> ScalarField:
    """Directional derivative ``X(F)``."""
    return contract(X, d_scalar(F))


def vector_bracket(X: VectorField, Y: VectorField) -> VectorField:
    """Lie bracket of vector fields from ambient components:
    ``[X, Y]^i = X(Y^i) - Y(X^i)``.  Exact when the components are band-limited."""
    bk = _check_same(X, Y)
    xs = X.component_fields()
    ys = Y.component_fields()
    out = np.stack(
        [apply_vector(X, yi).values() - apply_vector(Y, xi).values() for xi, yi in zip(xs, ys)], axis=-1
    )
    return VectorField(bk, out, False)


def hodge_decompose(w: OneForm) -> tuple[ScalarField, ScalarField]:
    """Sphere only: mean-free ``(F, G)`` with ``w = dF + *dG``."""
    if w.backend.kind != SPHERE:
        raise ValueError("Hodge potentials are only defined for the sphere backend")
    return w.components()


def hodge_assemble(F: ScalarField, G: ScalarField) -> OneForm:
    if F.backend.kind != SPHERE:
        raise ValueError("Hodge potentials are only defined for the sphere backend")
    return OneForm.from_components(F, G)


# -- norms and smoothing --------------------------------------------------------


def hk_norm(coef: np.ndarray, lam: np.ndarray, k: float) -> np.ndarray:
    """``sqrt(sum (1 + lam)^k c^2)`` along the last axis."""
    coef = np.asarray(coef, dtype=float)
    return np.sqrt(np.sum((1.0 + lam) ** k * coef**2, axis=-1))


def sobolev_norm(obj, k: float) -> float:
    if k < 0:
        raise ValueError("Sobolev order must be nonnegative")
    b = obj.backend
    lam = b.lam1 if isinstance(obj, OneForm) else b.lam0
    return float(hk_norm(obj.coef, lam, k))


def smooth(obj, t: float):
    """Hard spectral cutoff keeping modes of degree ``<= t``."""
    if t < 0:
        raise ValueError("cutoff must be nonnegative")
    b = obj.backend
    deg = b.deg1 if isinstance(obj, OneForm) else b.deg0
    return type(obj)(b, np.where(deg <= t, obj.coef, 0.0))


def smooth_coef(coef: np.ndarray, deg: np.ndarray, t: float | None) -> np.ndarray:
    if t is None:
        return coef
    return np.where(deg <= t, coef, 0.0)


# -- serialization ----------------------------------------------------------------

_TYPES = {"scalar": ScalarField, "oneform": OneForm, "twoform": TwoForm}


def field_to_dict(obj) -> dict:
    tag = {ScalarField: "scalar", OneForm: "oneform", TwoForm: "twoform"}[type(obj)]
    b = obj.backend
    comps = list(b.one_form_labels) if tag == "oneform" else ["density" if tag == "twoform" else "value"]
    return {
        "backend": b.kind,
        "N": b.N,
        "padding": b.padding,
        "type": tag,
        "components": comps,
        "coefficients": [float(x) for x in obj.coef],
    }


def field_from_dict(d: dict):
    b = make_backend(d["backend"], int(d["N"]), int(d.get("padding", 2)))
    return _TYPES[d["type"]](b, np.array(d["coefficients"], dtype=float))


def dumps_field(obj) -> str:
    return json.dumps(field_to_dict(obj))


def loads_field(text: str):
    return field_from_dict(json.loads(text))
